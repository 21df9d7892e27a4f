use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dmdc_core::dmd::{dmd_fit, split_trajectory, DEFAULT_EXPLICIT_LIMIT};
use dmdc_core::dmdc::{dmdc_fit_known_b, dmdc_fit_unknown_b, DmdcModel};
use dmdc_core::io::{
    format_matrix_csv, model_to_json, read_json_config, read_matrix, read_model,
    read_spectrum_document, truth_to_json, write_atomic, MatrixFormat, ModelRecord,
    Provenance, SpectrumDocument, TruthRecord,
};
use dmdc_core::linalg::{CMatrix, Matrix};
use dmdc_core::rom::{
    default_frequency_grid, frequency_response, log_grid, match_spectra,
    matched_mode_similarities, max_relative_sigma_gap, realize, FrequencyResponse,
    StateSpaceRealization,
};
use dmdc_core::synth::{
    add_noise, gen_example1, gen_example2, gen_sparse_fourier, ActuationSpec, SynthDataset,
};
use dmdc_core::DmdcError;
use num_complex::Complex64;

use crate::{
    truncation, CliError, CompareArgs, DataArgs, FitArgs, FitcArgs, FreqrespArgs, OutputArgs,
    SynthArgs,
};

type CmdResult = Result<(), CliError>;

/// Files produced by a command, written only once every one of them is ready.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn add_matrix(&mut self, stem: &str, m: &Matrix, format: MatrixFormat) {
        let bytes = match format {
            MatrixFormat::Csv => format_matrix_csv(m).into_bytes(),
            MatrixFormat::Bin => dmdc_core::io::encode_matrix_bin(m),
        };
        self.add(format!("{stem}.{}", format.extension()), bytes);
    }

    fn commit(self) -> CmdResult {
        std::fs::create_dir_all(&self.dir).map_err(|e| DmdcError::Io { path: self.dir.clone(), source: e })?;
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), |w| w.write_all(bytes))?;
        }
        Ok(())
    }
}

fn load(path: &Path, transpose: bool) -> Result<Matrix, CliError> {
    let m = read_matrix(path, MatrixFormat::from_path(path))?;
    Ok(if transpose { m.transpose() } else { m })
}

fn load_pair(data: &DataArgs) -> Result<(Matrix, Matrix, Vec<PathBuf>), CliError> {
    match (&data.traj, &data.x, &data.xp) {
        (Some(traj), _, _) => {
            let (x, xp) = split_trajectory(&load(traj, data.transpose_input)?)?;
            Ok((x, xp, vec![traj.clone()]))
        }
        (None, Some(x), Some(xp)) => Ok((
            load(x, data.transpose_input)?,
            load(xp, data.transpose_input)?,
            vec![x.clone(), xp.clone()],
        )),
        _ => Err(CliError::Usage("give either --traj or both --x and --xp".into())),
    }
}

fn eigen_table(values: &[Complex64]) -> String {
    let mut out = String::from("re,im,magnitude\n");
    for z in values {
        let _ = writeln!(out, "{:?},{:?},{:?}", z.re, z.im, z.norm());
    }
    out
}

fn mode_images(out: &mut Outputs, modes: &CMatrix, grid: Option<usize>) -> CmdResult {
    let Some(grid) = grid else { return Ok(()) };
    if grid == 0 || grid * grid != modes.nrows() {
        return Err(CliError::Usage(format!(
            "--mode-images {grid} does not tile a state of dimension {}",
            modes.nrows()
        )));
    }
    for j in 0..modes.ncols() {
        let image = Matrix::from_fn(grid, grid, |iy, ix| modes[(iy * grid + ix, j)].re);
        out.add(format!("mode_{j}.csv"), format_matrix_csv(&image));
    }
    Ok(())
}

fn finish_fit(record: &ModelRecord, modes: &CMatrix, output: &OutputArgs, mut out: Outputs) -> CmdResult {
    out.add("model.json", model_to_json(record)?);
    out.add("eigenvalues.csv", eigen_table(&record.eigenvalues));
    mode_images(&mut out, modes, output.mode_images)?;
    out.commit()?;
    print!("{}", eigen_table(&record.eigenvalues));
    Ok(())
}

pub(crate) fn fit(args: FitArgs) -> CmdResult {
    let trunc = truncation(args.rank_r, args.svd_threshold)?;
    let (x, xp, inputs) = load_pair(&args.data)?;
    let model = dmd_fit(&x, &xp, trunc, args.output.dt)?;
    let provenance = Provenance { truncation_r: Some(trunc), seed: args.output.seed, ..Default::default() }
        .with_inputs(&inputs)?;
    let record = ModelRecord::from_dmd(&model, provenance);
    println!("rank {}", model.rank);
    finish_fit(&record, &model.normalized_modes(), &args.output, Outputs::new(&args.output.out))
}

fn explicit_tables(out: &mut Outputs, model: &DmdcModel) -> CmdResult {
    if model.state_dim() <= DEFAULT_EXPLICIT_LIMIT {
        let (a_bar, b_bar) = model.explicit_operators(DEFAULT_EXPLICIT_LIMIT)?;
        out.add("a_bar.csv", format_matrix_csv(&a_bar));
        out.add("b_bar.csv", format_matrix_csv(&b_bar));
    }
    Ok(())
}

pub(crate) fn fitc(args: FitcArgs) -> CmdResult {
    if let (Some(p), Some(r)) = (args.rank_p, args.rank_r) {
        if p < r {
            return Err(CliError::Usage(format!("--rank-p {p} must not be smaller than --rank-r {r}")));
        }
    }
    if args.b_matrix.is_some() && args.rank_p.is_some() {
        return Err(CliError::Usage("--rank-p applies only when the input map is estimated".into()));
    }
    let trunc_r = truncation(args.rank_r, args.svd_threshold)?;
    let trunc_p = truncation(args.rank_p, args.svd_threshold)?;
    let (x, xp, mut inputs) = load_pair(&args.data)?;
    let upsilon = load(&args.upsilon, args.data.transpose_input)?;
    inputs.push(args.upsilon.clone());
    let dt = args.output.dt;

    let mut provenance = Provenance { truncation_r: Some(trunc_r), seed: args.output.seed, ..Default::default() };
    let model = match &args.b_matrix {
        Some(b_path) => {
            let b = load(b_path, false)?;
            inputs.push(b_path.clone());
            dmdc_fit_known_b(&x, &xp, &upsilon, &b, trunc_r, dt)?
        }
        None => {
            provenance.truncation_p = Some(trunc_p);
            let (model, report) = dmdc_fit_unknown_b(&x, &xp, &upsilon, trunc_p, trunc_r, dt)?;
            println!(
                "identifiability: omega_rank={} required_rank={} collinear={}",
                report.omega_rank, report.required_rank, report.collinearity_flag
            );
            if report.collinearity_flag {
                eprintln!(
                    "warning: collinear input-state data (rank of [X; Upsilon] is {}, separating A from B needs {})",
                    report.omega_rank, report.required_rank
                );
            }
            model
        }
    };
    println!("ranks p={} r={}", model.input_rank, model.output_rank);
    let record = ModelRecord::from_dmdc(&model, provenance.with_inputs(&inputs)?);

    let mut out = Outputs::new(&args.output.out);
    out.add("b_tilde.csv", format_matrix_csv(&model.b_tilde));
    explicit_tables(&mut out, &model)?;
    println!("b_tilde");
    print!("{}", format_matrix_csv(&model.b_tilde));
    println!("eigenvalues");
    finish_fit(&record, &model.normalized_modes(), &args.output, out)
}

fn synth_dataset(args: &SynthArgs) -> Result<SynthDataset, CliError> {
    let m = args.m.unwrap_or(match args.example {
        1 => 5,
        2 => 200,
        _ => 60,
    });
    if m < 2 {
        return Err(CliError::Usage(format!("--m must be at least 2, got {m}")));
    }
    let ds = match args.example {
        1 => gen_example1([args.x0[0], args.x0[1]], args.gain, m)?,
        2 => gen_example2(args.states, args.inputs, args.outputs, m, args.seed)?,
        _ => {
            let spec: ActuationSpec = match &args.actuation {
                Some(path) => read_json_config(path)?,
                None => ActuationSpec::default(),
            };
            gen_sparse_fourier(args.grid, args.modes, m, args.seed, &spec)?
        }
    };
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(CliError::Usage(format!("--noise must be non-negative, got {}", args.noise)));
    }
    if args.noise > 0.0 {
        let sigma = args.noise * ds.signal_rms();
        return Ok(add_noise(&ds, sigma, args.seed)?);
    }
    Ok(ds)
}

pub(crate) fn synth(args: SynthArgs) -> CmdResult {
    let ds = synth_dataset(&args)?;
    let format = MatrixFormat::from(args.format);
    let b_snapshot = match &ds.truth.c_true {
        Some(c) => c * &ds.truth.b_true,
        None => ds.truth.b_true.clone(),
    };
    let mut out = Outputs::new(&args.out);
    out.add_matrix("x", &ds.x, format);
    out.add_matrix("xp", &ds.xp, format);
    out.add_matrix("upsilon", &ds.upsilon, format);
    out.add_matrix("b", &b_snapshot, format);
    out.add("truth.json", truth_to_json(&TruthRecord { truth: ds.truth.clone(), dt: ds.dt }));
    for (name, bytes) in &out.files {
        println!("{} ({} bytes)", args.out.join(name).display(), bytes.len());
    }
    out.commit()
}

fn realization_of(doc: &SpectrumDocument) -> Option<Result<StateSpaceRealization, DmdcError>> {
    match doc {
        SpectrumDocument::Model(m) if m.b_tilde.is_some() => Some(realize(m, None)),
        SpectrumDocument::Model(_) => None,
        SpectrumDocument::Truth(t) => Some(t.truth.realization(t.dt)),
    }
}

fn emit(table: String, out: Option<&Path>, name: &str) -> CmdResult {
    match out {
        Some(dir) => {
            let mut files = Outputs::new(dir);
            files.add(name, table);
            files.commit()
        }
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

pub(crate) fn compare(args: CompareArgs) -> CmdResult {
    let left = read_spectrum_document(&args.model)?;
    let right = read_spectrum_document(&args.against)?;
    let matching = match_spectra(left.eigenvalues(), right.eigenvalues())?;

    let mut table = String::from("metric,index,value\n");
    let _ = writeln!(table, "spectral_distance,,{:?}", matching.max_distance());
    for (&(i, _), d) in matching.pairs.iter().zip(&matching.distances) {
        let _ = writeln!(table, "eigenvalue_error,{i},{d:?}");
    }
    if let (Some(a), Some(b)) = (left.modes(), right.modes()) {
        for (&(i, _), s) in matching.pairs.iter().zip(matched_mode_similarities(&matching, &a, &b)?) {
            let _ = writeln!(table, "mode_similarity,{i},{s:?}");
        }
    }
    if let (Some(a), Some(b)) = (realization_of(&left), realization_of(&right)) {
        let (a, b) = (a?, b?);
        if a.outputs() == b.outputs() && a.inputs() == b.inputs() {
            let grid = default_frequency_grid();
            match (frequency_response(&a, &grid), frequency_response(&b, &grid)) {
                (Ok(ca), Ok(cb)) => {
                    let _ = writeln!(table, "max_relative_sigma_gap,,{:?}", max_relative_sigma_gap(&ca, &cb)?);
                }
                (Err(DmdcError::SingularFrequency { omega, .. }), _)
                | (_, Err(DmdcError::SingularFrequency { omega, .. })) => {
                    eprintln!("warning: pole on the unit circle at omega = {omega}; sigma gap skipped");
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
    }
    emit(table, args.out.as_deref(), "compare.csv")
}

pub(crate) fn freqresp(args: FreqrespArgs) -> CmdResult {
    let ss = match (&args.model, &args.a, &args.b) {
        (Some(path), _, _) => {
            let record = read_model(path)?;
            if record.b_tilde.is_none() {
                return Err(DmdcError::InvalidInput(format!(
                    "{}: model has no inputs",
                    path.display()
                ))
                .into());
            }
            realize(&record, None)?
        }
        (None, Some(a), Some(b)) => {
            let a = load(a, false)?;
            let b = load(b, false)?;
            let c = match &args.c {
                Some(c) => load(c, false)?,
                None => Matrix::identity(a.nrows(), a.nrows()),
            };
            StateSpaceRealization::new(a, b, c, args.dt)?
        }
        _ => return Err(CliError::Usage("give --model or --a and --b".into())),
    };
    let pi = std::f64::consts::PI;
    let (lo, hi) = (args.omega_min, args.omega_max);
    if !(lo > 0.0 && lo <= hi && hi <= pi) || args.omega_count == 0 {
        return Err(CliError::Usage(format!(
            "frequency grid needs 0 < omega-min <= omega-max <= pi and a positive count, got [{lo}, {hi}] x {}",
            args.omega_count
        )));
    }
    let grid = log_grid(lo, hi, args.omega_count);
    let response = FrequencyResponse::new(&ss)?;
    let k = ss.outputs().min(ss.inputs());

    let mut table = String::from("omega");
    for i in 1..=k {
        let _ = write!(table, ",sigma_{i}");
    }
    table.push_str(",status\n");
    for (index, &omega) in grid.iter().enumerate() {
        match response.sigma_at(omega, index) {
            Ok(sigmas) => {
                let _ = write!(table, "{omega:?}");
                for s in sigmas {
                    let _ = write!(table, ",{s:?}");
                }
                table.push_str(",ok\n");
            }
            Err(DmdcError::SingularFrequency { .. }) => {
                eprintln!("warning: omega = {omega} is a pole; row flagged");
                let _ = write!(table, "{omega:?}");
                for _ in 0..k {
                    table.push_str(",nan");
                }
                table.push_str(",singular\n");
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(table, args.out.as_deref(), "freqresp.csv")
}
