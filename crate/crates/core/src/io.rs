//! Matrix files (CSV and a little-endian binary layout), model and ground
//! truth documents, and JSON run configuration.
//!
//! Matrix files store one snapshot per column. Model documents are JSON;
//! every real number is written as a `[decimal, "0x<bits>"]` pair whose hex
//! half carries the exact IEEE-754 bit pattern and is authoritative on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dmd::DmdModel;
use crate::dmdc::{DmdcModel, DmdcVariant};
use crate::error::{DmdcError, Result};
use crate::linalg::{CMatrix, Matrix, TruncationPolicy};
use crate::rom::ReducedModel;
use crate::synth::GroundTruth;

/// Leading bytes of a binary matrix file.
pub const MATRIX_MAGIC: &[u8; 8] = b"DMDCMAT1";

const BIN_HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// `.bin` files are binary, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => MatrixFormat::Bin,
            _ => MatrixFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Bin => "bin",
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| DmdcError::io(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| DmdcError::io(&dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out).map_err(|e| DmdcError::io(path, e))?;
        out.flush().map_err(|e| DmdcError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| DmdcError::io(path, e.error))?;
    Ok(())
}

/// Parses CSV text into a matrix. Rows and columns in errors are 1-based.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<Matrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in csv.records() {
        let record = record.map_err(|e| DmdcError::Format {
            line: e.position().map(|p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(DmdcError::Format {
                    line,
                    msg: format!("expected {c} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        rows += 1;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DmdcError::Parse { row: rows, col: j + 1, cell: cell.to_string() })?;
            values.push(v);
        }
    }
    let cols = cols.ok_or_else(|| DmdcError::Format { line: None, msg: "no data rows".into() })?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(BufReader::new(open(path)?)).map_err(|e| match e {
        DmdcError::Format { line, msg } => {
            DmdcError::Format { line, msg: format!("{}: {msg}", path.display()) }
        }
        other => other,
    })
}

/// CSV text of `m`, one row per line, shortest round-trip decimals
/// (scientific notation for very large or small magnitudes).
pub fn format_matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let text = format_matrix_csv(m);
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn encode_matrix_bin(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BIN_HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix_bin(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < MATRIX_MAGIC.len() || &bytes[..8] != MATRIX_MAGIC {
        return Err(DmdcError::Format { line: None, msg: "missing DMDCMAT1 magic".into() });
    }
    if bytes.len() < BIN_HEADER_LEN {
        return Err(DmdcError::Length(format!(
            "header needs {BIN_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8-byte slice"));
    let (rows, cols) = (word(8), word(16));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(BIN_HEADER_LEN as u64));
    let payload = bytes.len() as u64;
    match expected {
        Some(n) if n == payload => {}
        _ => {
            return Err(DmdcError::Length(format!(
                "{rows}x{cols} matrix needs {} bytes, file has {payload}",
                expected.map_or_else(|| "too many".to_string(), |n| n.to_string())
            )))
        }
    }
    let data: Vec<f64> = bytes[BIN_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Matrix::from_vec(rows as usize, cols as usize, data))
}

pub fn read_matrix_bin(path: &Path) -> Result<Matrix> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| DmdcError::io(path, e))?;
    decode_matrix_bin(&bytes)
}

pub fn write_matrix_bin(m: &Matrix, path: &Path) -> Result<()> {
    let bytes = encode_matrix_bin(m);
    write_atomic(path, |w| w.write_all(&bytes))
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    match format {
        MatrixFormat::Csv => read_matrix_csv(path),
        MatrixFormat::Bin => read_matrix_bin(path),
    }
}

pub fn write_matrix(m: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_matrix_csv(m, path),
        MatrixFormat::Bin => write_matrix_bin(m, path),
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| DmdcError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Reads a JSON configuration document such as an actuation spec.
pub fn read_json_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| DmdcError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| DmdcError::Schema(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "dmd")]
    Dmd,
    #[serde(rename = "dmdc-known-b")]
    DmdcKnownB,
    #[serde(rename = "dmdc-unknown-b")]
    DmdcUnknownB,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Dmd => "dmd",
            ModelKind::DmdcKnownB => "dmdc-known-b",
            ModelKind::DmdcUnknownB => "dmdc-unknown-b",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    /// Input-space truncation (unknown-map fits only).
    pub truncation_p: Option<TruncationPolicy>,
    pub truncation_r: Option<TruncationPolicy>,
    pub seed: Option<u64>,
}

impl Provenance {
    /// Records the digest of each input file.
    pub fn with_inputs<P: AsRef<Path>>(mut self, paths: &[P]) -> Result<Self> {
        for p in paths {
            let p = p.as_ref();
            self.inputs.push(InputDigest { path: p.display().to_string(), sha256: sha256_file(p)? });
        }
        Ok(self)
    }
}

/// A fitted model in exchangeable form.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelRecord {
    pub kind: ModelKind,
    /// Input-space rank p; absent for plain DMD.
    pub rank_p: Option<usize>,
    pub rank_r: usize,
    pub dt: f64,
    pub a_tilde: Matrix,
    pub b_tilde: Option<Matrix>,
    pub basis: Matrix,
    pub eigenvalues: Vec<Complex64>,
    pub modes: CMatrix,
    pub provenance: Provenance,
}

impl ModelRecord {
    pub fn from_dmd(model: &DmdModel, provenance: Provenance) -> Self {
        Self {
            kind: ModelKind::Dmd,
            rank_p: None,
            rank_r: model.rank,
            dt: model.dt,
            a_tilde: model.a_tilde.clone(),
            b_tilde: None,
            basis: model.basis.clone(),
            eigenvalues: model.eigen.values.clone(),
            modes: model.modes.clone(),
            provenance,
        }
    }

    pub fn from_dmdc(model: &DmdcModel, provenance: Provenance) -> Self {
        let kind = match model.variant {
            DmdcVariant::KnownInputMap => ModelKind::DmdcKnownB,
            DmdcVariant::UnknownInputMap => ModelKind::DmdcUnknownB,
        };
        Self {
            kind,
            rank_p: Some(model.input_rank),
            rank_r: model.output_rank,
            dt: model.dt,
            a_tilde: model.a_tilde.clone(),
            b_tilde: Some(model.b_tilde.clone()),
            basis: model.basis.clone(),
            eigenvalues: model.eigen.values.clone(),
            modes: model.modes.clone(),
            provenance,
        }
    }

    fn validate(&self) -> Result<()> {
        let r = self.a_tilde.nrows();
        let ok = self.a_tilde.is_square()
            && self.basis.ncols() == r
            && self.b_tilde.as_ref().is_none_or(|b| b.nrows() == r)
            && self.eigenvalues.len() == r
            && self.modes.ncols() == r
            && (self.modes.nrows() == self.basis.nrows() || r == 0);
        if !ok {
            return Err(DmdcError::Schema(format!(
                "inconsistent model dimensions: a_tilde {}x{}, basis {}x{}, {} eigenvalues, modes {}x{}",
                self.a_tilde.nrows(),
                self.a_tilde.ncols(),
                self.basis.nrows(),
                self.basis.ncols(),
                self.eigenvalues.len(),
                self.modes.nrows(),
                self.modes.ncols()
            )));
        }
        if (self.kind == ModelKind::Dmd) != self.b_tilde.is_none() {
            return Err(DmdcError::Schema(format!(
                "kind {} {} an input map",
                self.kind.tag(),
                if self.b_tilde.is_some() { "must not carry" } else { "requires" }
            )));
        }
        Ok(())
    }

    /// Unit-norm modes, one column per eigenvalue.
    pub fn normalized_modes(&self) -> CMatrix {
        crate::dmd::normalize_columns(&self.modes)
    }
}

impl ReducedModel for ModelRecord {
    fn reduced_dynamics(&self) -> &Matrix {
        &self.a_tilde
    }
    fn reduced_input(&self) -> Option<&Matrix> {
        self.b_tilde.as_ref()
    }
    fn lift_basis(&self) -> &Matrix {
        &self.basis
    }
    fn sample_interval(&self) -> f64 {
        self.dt
    }
}

/// Ground truth of a synthetic dataset in exchangeable form.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub truth: GroundTruth,
    pub dt: f64,
}

mod encode {
    use super::*;

    pub fn real(v: f64) -> Value {
        let hex = format!("0x{:016x}", v.to_bits());
        let dec = serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null);
        Value::Array(vec![dec, Value::String(hex)])
    }

    pub fn complex(z: Complex64) -> Value {
        Value::Array(vec![real(z.re), real(z.im)])
    }

    pub fn matrix(m: &Matrix) -> Value {
        Value::Array(m.row_iter().map(|row| Value::Array(row.iter().map(|&v| real(v)).collect())).collect())
    }

    pub fn cmatrix(m: &CMatrix) -> Value {
        Value::Array(
            m.row_iter().map(|row| Value::Array(row.iter().map(|&z| complex(z)).collect())).collect(),
        )
    }

    pub fn complex_list(v: &[Complex64]) -> Value {
        Value::Array(v.iter().map(|&z| complex(z)).collect())
    }
}

mod decode {
    use super::*;

    fn schema(what: &str, msg: impl std::fmt::Display) -> DmdcError {
        DmdcError::Schema(format!("{what}: {msg}"))
    }

    pub fn real(v: &Value, what: &str) -> Result<f64> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| schema(what, "not a float")),
            Value::Array(pair) if pair.len() == 2 => {
                let hex = pair[1].as_str().ok_or_else(|| schema(what, "hex half must be a string"))?;
                let digits = hex.strip_prefix("0x").ok_or_else(|| schema(what, "hex half lacks 0x"))?;
                let bits = u64::from_str_radix(digits, 16).map_err(|e| schema(what, e))?;
                let value = f64::from_bits(bits);
                if !value.is_finite() {
                    return Err(schema(what, "non-finite value"));
                }
                if let Some(dec) = pair[0].as_f64() {
                    if dec != value {
                        return Err(schema(what, format!("decimal {dec} disagrees with {hex}")));
                    }
                }
                Ok(value)
            }
            _ => Err(schema(what, "expected a number or a [decimal, hex] pair")),
        }
    }

    pub fn complex(v: &Value, what: &str) -> Result<Complex64> {
        match v.as_array() {
            Some(pair) if pair.len() == 2 => Ok(Complex64::new(real(&pair[0], what)?, real(&pair[1], what)?)),
            _ => Err(schema(what, "expected a [re, im] pair")),
        }
    }

    fn rows<'a>(v: &'a Value, what: &str) -> Result<(usize, Vec<&'a Vec<Value>>)> {
        let rows = v.as_array().ok_or_else(|| schema(what, "expected an array of rows"))?;
        let rows: Vec<&Vec<Value>> = rows
            .iter()
            .map(|r| r.as_array().ok_or_else(|| schema(what, "row is not an array")))
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(schema(what, "ragged rows"));
        }
        Ok((cols, rows))
    }

    pub fn matrix(v: &Value, what: &str) -> Result<Matrix> {
        let (cols, rows) = rows(v, what)?;
        let mut m = Matrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                m[(i, j)] = real(cell, what)?;
            }
        }
        Ok(m)
    }

    pub fn cmatrix(v: &Value, what: &str) -> Result<CMatrix> {
        let (cols, rows) = rows(v, what)?;
        let mut m = CMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                m[(i, j)] = complex(cell, what)?;
            }
        }
        Ok(m)
    }

    pub fn complex_list(v: &Value, what: &str) -> Result<Vec<Complex64>> {
        v.as_array()
            .ok_or_else(|| schema(what, "expected an array"))?
            .iter()
            .map(|z| complex(z, what))
            .collect()
    }

    pub fn field<'a>(doc: &'a Value, key: &str) -> Result<&'a Value> {
        doc.get(key).ok_or_else(|| DmdcError::Schema(format!("missing field {key:?}")))
    }

    pub fn optional<'a>(doc: &'a Value, key: &str) -> Option<&'a Value> {
        doc.get(key).filter(|v| !v.is_null())
    }

    pub fn typed<T: DeserializeOwned>(v: &Value, what: &str) -> Result<T> {
        serde_json::from_value(v.clone()).map_err(|e| schema(what, e))
    }
}

const TRUTH_KIND: &str = "truth";

fn parse_document(text: &str) -> Result<(String, Value)> {
    if text.trim().is_empty() {
        return Err(DmdcError::Schema("empty document".into()));
    }
    let doc: Value = serde_json::from_str(text).map_err(|e| DmdcError::Format {
        line: Some(e.line()),
        msg: e.to_string(),
    })?;
    let kind = doc
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| DmdcError::Schema("missing string field \"kind\"".into()))?
        .to_string();
    Ok((kind, doc))
}

pub fn model_to_json(record: &ModelRecord) -> Result<String> {
    record.validate()?;
    let doc = serde_json::json!({
        "kind": record.kind.tag(),
        "rank_p": record.rank_p,
        "rank_r": record.rank_r,
        "dt": encode::real(record.dt),
        "a_tilde": encode::matrix(&record.a_tilde),
        "b_tilde": record.b_tilde.as_ref().map(encode::matrix),
        "basis": encode::matrix(&record.basis),
        "eigenvalues": encode::complex_list(&record.eigenvalues),
        "modes": encode::cmatrix(&record.modes),
        "provenance": record.provenance,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("JSON values always serialize"))
}

pub fn model_from_json(text: &str) -> Result<ModelRecord> {
    use decode::*;
    let (kind, doc) = parse_document(text)?;
    let kind: ModelKind = serde_json::from_value(Value::String(kind.clone()))
        .map_err(|_| DmdcError::Schema(format!("unknown model kind {kind:?}")))?;
    let basis = matrix(field(&doc, "basis")?, "basis")?;
    let mut modes = cmatrix(field(&doc, "modes")?, "modes")?;
    if modes.nrows() == 0 {
        modes = CMatrix::zeros(basis.nrows(), modes.ncols());
    }
    let record = ModelRecord {
        kind,
        rank_p: optional(&doc, "rank_p").map(|v| typed(v, "rank_p")).transpose()?,
        rank_r: typed(field(&doc, "rank_r")?, "rank_r")?,
        dt: real(field(&doc, "dt")?, "dt")?,
        a_tilde: matrix(field(&doc, "a_tilde")?, "a_tilde")?,
        b_tilde: optional(&doc, "b_tilde").map(|v| matrix(v, "b_tilde")).transpose()?,
        basis,
        eigenvalues: complex_list(field(&doc, "eigenvalues")?, "eigenvalues")?,
        modes,
        provenance: optional(&doc, "provenance")
            .map(|v| typed(v, "provenance"))
            .transpose()?
            .unwrap_or_default(),
    };
    record.validate()?;
    Ok(record)
}

pub fn write_model(record: &ModelRecord, path: &Path) -> Result<()> {
    let text = model_to_json(record)?;
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn read_model(path: &Path) -> Result<ModelRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| DmdcError::io(path, e))?;
    model_from_json(&text)
}

pub fn truth_to_json(record: &TruthRecord) -> String {
    let t = &record.truth;
    let doc = serde_json::json!({
        "kind": TRUTH_KIND,
        "dt": encode::real(record.dt),
        "seed": t.seed,
        "a_true": encode::matrix(&t.a_true),
        "b_true": encode::matrix(&t.b_true),
        "c_true": t.c_true.as_ref().map(encode::matrix),
        "eigenvalues": encode::complex_list(&t.eigs_true),
        "modes": t.modes_true.as_ref().map(encode::cmatrix),
    });
    serde_json::to_string_pretty(&doc).expect("JSON values always serialize")
}

pub fn truth_from_json(text: &str) -> Result<TruthRecord> {
    use decode::*;
    let (kind, doc) = parse_document(text)?;
    if kind != TRUTH_KIND {
        return Err(DmdcError::Schema(format!("expected kind \"truth\", found {kind:?}")));
    }
    let truth = GroundTruth {
        a_true: matrix(field(&doc, "a_true")?, "a_true")?,
        b_true: matrix(field(&doc, "b_true")?, "b_true")?,
        c_true: optional(&doc, "c_true").map(|v| matrix(v, "c_true")).transpose()?,
        eigs_true: complex_list(field(&doc, "eigenvalues")?, "eigenvalues")?,
        modes_true: optional(&doc, "modes").map(|v| cmatrix(v, "modes")).transpose()?,
        seed: typed(field(&doc, "seed")?, "seed")?,
    };
    Ok(TruthRecord { truth, dt: real(field(&doc, "dt")?, "dt")? })
}

pub fn write_truth(record: &TruthRecord, path: &Path) -> Result<()> {
    let text = truth_to_json(record);
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn read_truth(path: &Path) -> Result<TruthRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| DmdcError::io(path, e))?;
    truth_from_json(&text)
}

/// Either kind of document: a fitted model or a ground truth.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumDocument {
    Model(ModelRecord),
    Truth(TruthRecord),
}

impl SpectrumDocument {
    pub fn eigenvalues(&self) -> &[Complex64] {
        match self {
            SpectrumDocument::Model(m) => &m.eigenvalues,
            SpectrumDocument::Truth(t) => &t.truth.eigs_true,
        }
    }

    /// Unit-norm spatial modes, when the document carries them.
    pub fn modes(&self) -> Option<CMatrix> {
        match self {
            SpectrumDocument::Model(m) => Some(m.normalized_modes()),
            SpectrumDocument::Truth(t) => t.truth.modes_true.clone(),
        }
    }
}

pub fn read_spectrum_document(path: &Path) -> Result<SpectrumDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| DmdcError::io(path, e))?;
    let (kind, _) = parse_document(&text)?;
    if kind == TRUTH_KIND {
        truth_from_json(&text).map(SpectrumDocument::Truth)
    } else {
        model_from_json(&text).map(SpectrumDocument::Model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmdc::{dmdc_fit_known_b, dmdc_fit_unknown_b};
    use crate::synth::{gen_example1, gen_example2, gen_sparse_fourier, ActuationSpec};
    use proptest::prelude::*;

    fn example1_x() -> Matrix {
        Matrix::from_row_slice(2, 4, &[4.0, 2.0, 1.0, 0.5, 7.0, 0.7, 0.07, 0.007])
    }

    #[test]
    fn csv_parses_small_matrix() {
        let m = parse_matrix_csv("1,2\n3,4".as_bytes()).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let spaced = parse_matrix_csv(" 1 , 2 \n\n3,4\n".as_bytes()).unwrap();
        assert_eq!(spaced, m);
    }

    #[test]
    fn csv_reads_example_file_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "4,2,1,0.5\n7,0.7,0.07,0.007\n").unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), example1_x());
    }

    #[test]
    fn csv_errors_carry_locations() {
        match parse_matrix_csv("1,2\n3,4\n5\n".as_bytes()) {
            Err(DmdcError::Format { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_matrix_csv("1,2\n3,abc\n".as_bytes()) {
            Err(DmdcError::Parse { row: 2, col: 2, cell }) => assert_eq!(cell, "abc"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_matrix_csv("1,nan\n".as_bytes()), Err(DmdcError::Parse { .. })));
        assert!(matches!(parse_matrix_csv("".as_bytes()), Err(DmdcError::Format { .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_matrix_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn binary_layout_and_errors() {
        let one = Matrix::from_element(1, 1, 42.0);
        let bytes = encode_matrix_bin(&one);
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[..8], b"DMDCMAT1");
        assert_eq!(decode_matrix_bin(&bytes).unwrap(), one);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_matrix_bin(&bad), Err(DmdcError::Format { .. })));
        assert!(matches!(decode_matrix_bin(&bytes[..31]), Err(DmdcError::Length(_))));
        assert!(matches!(decode_matrix_bin(&bytes[..12]), Err(DmdcError::Length(_))));
        assert!(matches!(decode_matrix_bin(b"DMD"), Err(DmdcError::Format { .. })));

        let mut huge = bytes[..24].to_vec();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_matrix_bin(&huge), Err(DmdcError::Length(_))));
    }

    #[test]
    fn column_major_payload() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let bytes = encode_matrix_bin(&m);
        let second = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        assert_eq!(second, 3.0);
    }

    #[test]
    fn binary_round_trip_of_field_snapshots() {
        let ds = gen_sparse_fourier(32, 3, 6, 4, &ActuationSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_matrix_bin(&ds.x, &path).unwrap();
        let back = read_matrix_bin(&path).unwrap();
        assert!(back.iter().zip(ds.x.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(MatrixFormat::from_path(&path), MatrixFormat::Bin);
        assert_eq!(MatrixFormat::from_path(Path::new("x.csv")), MatrixFormat::Csv);
    }

    fn example1_record() -> ModelRecord {
        let ds = gen_example1([4.0, 7.0], -1.0, 5).unwrap();
        let model = dmdc_fit_known_b(
            &ds.x,
            &ds.xp,
            &ds.upsilon,
            &ds.truth.b_true,
            TruncationPolicy::default(),
            1.0,
        )
        .unwrap();
        ModelRecord::from_dmdc(&model, Provenance::default())
    }

    #[test]
    fn example1_model_document_lists_eigenvalues() {
        let text = model_to_json(&example1_record()).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["kind"], "dmdc-known-b");
        let eigs = decode::complex_list(&doc["eigenvalues"], "eigenvalues").unwrap();
        assert!((eigs[0] - Complex64::new(1.5, 0.0)).norm() < 1e-10);
        assert!((eigs[1] - Complex64::new(0.1, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn model_schema_errors() {
        assert!(matches!(model_from_json(""), Err(DmdcError::Schema(_))));
        assert!(matches!(model_from_json("  \n"), Err(DmdcError::Schema(_))));
        assert!(matches!(model_from_json("{}"), Err(DmdcError::Schema(_))));
        let text = model_to_json(&example1_record()).unwrap();
        let renamed = text.replace("dmdc-known-b", "dmdc-mystery");
        match model_from_json(&renamed) {
            Err(DmdcError::Schema(msg)) => assert!(msg.contains("dmdc-mystery")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(model_from_json("{not json"), Err(DmdcError::Format { .. })));

        let mut doc: Value = serde_json::from_str(&text).unwrap();
        doc["a_tilde"][0][0][1] = Value::String("0x3ff0000000000000".into());
        assert!(matches!(model_from_json(&doc.to_string()), Err(DmdcError::Schema(_))));
        doc["a_tilde"] = serde_json::json!([[1.0], [2.0]]);
        assert!(matches!(model_from_json(&doc.to_string()), Err(DmdcError::Schema(_))));
    }

    #[test]
    fn provenance_digests_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "abc").unwrap();
        let prov = Provenance::default().with_inputs(&[&path]).unwrap();
        assert_eq!(
            prov.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn truth_round_trip_and_kind_dispatch() {
        let ds = gen_sparse_fourier(8, 2, 5, 1, &ActuationSpec::default()).unwrap();
        let record = TruthRecord { truth: ds.truth.clone(), dt: ds.dt };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.json");
        write_truth(&record, &path).unwrap();
        assert_eq!(read_truth(&path).unwrap(), record);
        match read_spectrum_document(&path).unwrap() {
            SpectrumDocument::Truth(t) => assert_eq!(t, record),
            other => panic!("unexpected {other:?}"),
        }
        let model_path = dir.path().join("model.json");
        write_model(&example1_record(), &model_path).unwrap();
        assert!(matches!(read_spectrum_document(&model_path).unwrap(), SpectrumDocument::Model(_)));
        assert!(matches!(read_truth(&model_path), Err(DmdcError::Schema(_))));
    }

    #[test]
    fn json_config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("act.json");
        std::fs::write(&path, r#"{"center": [10, 12], "amplitude": -2.0}"#).unwrap();
        let spec: ActuationSpec = read_json_config(&path).unwrap();
        assert_eq!(spec.center, Some([10.0, 12.0]));
        std::fs::write(&path, r#"{"amplitud": -2.0}"#).unwrap();
        assert!(matches!(read_json_config::<ActuationSpec>(&path), Err(DmdcError::Schema(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn csv_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 100)) {
            let m = Matrix::from_vec(10, 10, values);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_matrix_csv(&m, &path).unwrap();
            let back = read_matrix_csv(&path).unwrap();
            prop_assert!((back - &m).amax() <= 1e-15 * m.amax().max(1.0));
        }

        #[test]
        fn binary_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let m = Matrix::from_fn(rows, cols, |i, j| {
                f64::from_bits(seed.rotate_left((i * 7 + j) as u32) & 0x7fef_ffff_ffff_ffff)
            });
            let back = decode_matrix_bin(&encode_matrix_bin(&m)).unwrap();
            prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn model_round_trip_is_bitwise(n in 2usize..5, l in 1usize..3, seed in any::<u64>()) {
            let ds = gen_example2(n, l, n + 3, 40, seed).unwrap();
            let (model, _) = dmdc_fit_unknown_b(
                &ds.x, &ds.xp, &ds.upsilon,
                TruncationPolicy::default(), TruncationPolicy::default(), 1.0,
            ).unwrap();
            let prov = Provenance {
                truncation_p: Some(TruncationPolicy::default()),
                truncation_r: Some(TruncationPolicy::Rank(n)),
                seed: Some(seed),
                ..Provenance::default()
            };
            let record = ModelRecord::from_dmdc(&model, prov);
            let back = model_from_json(&model_to_json(&record).unwrap()).unwrap();
            prop_assert_eq!(&back, &record);
            let bits = |m: &Matrix| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.a_tilde), bits(&record.a_tilde));
            prop_assert_eq!(bits(&back.basis), bits(&record.basis));
        }
    }
}
