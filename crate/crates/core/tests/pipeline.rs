use dmdc_core::dmdc::dmdc_fit_unknown_b;
use dmdc_core::io::{
    read_matrix, read_model, sha256_file, write_matrix, write_model, MatrixFormat, ModelRecord,
    Provenance,
};
use dmdc_core::linalg::TruncationPolicy;
use dmdc_core::rom::{realize, simulate};
use dmdc_core::synth::gen_example2;

#[test]
fn generate_fit_store_reload_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_example2(4, 2, 30, 120, 11).unwrap();

    let mut paths = Vec::new();
    for (name, m, format) in [
        ("x.csv", &ds.x, MatrixFormat::Csv),
        ("xp.bin", &ds.xp, MatrixFormat::Bin),
        ("upsilon.csv", &ds.upsilon, MatrixFormat::Csv),
    ] {
        let path = dir.path().join(name);
        write_matrix(m, &path, format).unwrap();
        assert_eq!(read_matrix(&path, format).unwrap(), *m);
        paths.push(path);
    }

    let policy = TruncationPolicy::default();
    let (model, report) = dmdc_fit_unknown_b(&ds.x, &ds.xp, &ds.upsilon, policy, policy, ds.dt).unwrap();
    assert_eq!(report.omega_rank, 6);
    assert!(!report.collinearity_flag);

    let provenance = Provenance {
        truncation_p: Some(policy),
        truncation_r: Some(policy),
        seed: Some(11),
        ..Provenance::default()
    }
    .with_inputs(&paths)
    .unwrap();
    let record = ModelRecord::from_dmdc(&model, provenance);
    let model_path = dir.path().join("model.json");
    write_model(&record, &model_path).unwrap();
    let reloaded = read_model(&model_path).unwrap();
    assert_eq!(reloaded, record);
    assert_eq!(reloaded.provenance.inputs[1].sha256, sha256_file(&paths[1]).unwrap());

    // The reloaded model replays the training trajectory from its first snapshot.
    let ss = realize(&reloaded, None).unwrap();
    let z0 = ss.c.transpose() * ds.x.column(0);
    let replay = simulate(&ss, &z0, &ds.upsilon).unwrap();
    let err = (&replay - &ds.xp).norm() / ds.xp.norm();
    assert!(err < 1e-9, "replay error {err:e}");
}
