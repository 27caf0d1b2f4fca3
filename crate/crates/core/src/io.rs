//! File formats: numeric matrix CSV, label CSV and the JSON result document.
//!
//! Matrices are plain CSV with rows as samples and an optional header line
//! (detected by a non-numeric first record). Values are written with 17
//! significant digits so that a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{AkmConfig, BiclusterResult, FitReport, RestartSummary, Source};
use crate::loss::{penalized_loss, CenterSet, LossError, LossReport};
use crate::matrix::{DataMatrix, ModelError, Partition};
use crate::rng::GENERATOR_NAME;

/// Relative tolerance for stored-vs-recomputed loss checks.
pub const LOSS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("line {line}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        line: u64,
        column: usize,
        value: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: value {value} is not finite")]
    NonFinite { line: u64, column: usize, value: f64 },
    #[error("no data rows")]
    Empty,
    #[error("labels line {line}: {message}")]
    Label { line: u64, message: String },
    #[error("result document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("result document is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn line_of(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

/// Parses a numeric CSV matrix. A first record containing any non-numeric
/// field is treated as a header and skipped.
pub fn parse_matrix<R: Read>(reader: R) -> Result<DataMatrix, IoError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv {
            line: index as u64 + 1,
            source,
        })?;
        let line = line_of(&record, index as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if index == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let expected = *n_cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(IoError::Ragged {
                line,
                expected,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| IoError::Parse {
                line,
                column: column + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(IoError::NonFinite {
                    line,
                    column: column + 1,
                    value,
                });
            }
            values.push(value);
        }
        n_rows += 1;
    }
    match n_cols {
        Some(m) if n_rows > 0 => Ok(DataMatrix::new(n_rows, m, values)?),
        _ => Err(IoError::Empty),
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DataMatrix, IoError> {
    parse_matrix(open(path.as_ref())?)
}

pub fn write_matrix_to<W: Write>(mut out: W, x: &DataMatrix) -> Result<(), IoError> {
    for row in x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, x: &DataMatrix) -> Result<(), IoError> {
    write_matrix_to(create(path.as_ref())?, x)
}

/// Reads a single column of positive integer labels (1-based). A
/// non-numeric first line is skipped as a header.
pub fn parse_labels<R: Read>(reader: R) -> Result<Vec<usize>, IoError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv {
            line: index as u64 + 1,
            source,
        })?;
        let line = line_of(&record, index as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 1 {
            return Err(IoError::Label {
                line,
                message: format!("expected one field, found {}", record.len()),
            });
        }
        match record[0].parse::<usize>() {
            Ok(0) => {
                return Err(IoError::Label {
                    line,
                    message: "labels are 1-based; found 0".into(),
                })
            }
            Ok(label) => labels.push(label),
            Err(_) if index == 0 => continue,
            Err(_) => {
                return Err(IoError::Label {
                    line,
                    message: format!("cannot parse {:?} as a label", &record[0]),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(labels)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>, IoError> {
    parse_labels(open(path.as_ref())?)
}

pub fn write_labels_to<W: Write>(mut out: W, labels: &[usize]) -> Result<(), IoError> {
    for label in labels {
        writeln!(out, "{label}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<(), IoError> {
    write_labels_to(create(path.as_ref())?, labels)
}

/// Algorithm parameters as stored in a result document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub k: usize,
    pub lambda: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub empty_cluster_retry_cap: usize,
}

impl From<&AkmConfig> for FitParams {
    fn from(cfg: &AkmConfig) -> Self {
        Self {
            k: cfg.k,
            lambda: cfg.lambda,
            restarts: cfg.restarts,
            seed: cfg.seed,
            max_outer_iters: cfg.max_outer_iters,
            max_inner_iters: cfg.max_inner_iters,
            empty_cluster_retry_cap: cfg.empty_cluster_retry_cap,
        }
    }
}

impl From<FitParams> for AkmConfig {
    fn from(p: FitParams) -> Self {
        AkmConfig {
            k: p.k,
            lambda: p.lambda,
            restarts: p.restarts,
            max_outer_iters: p.max_outer_iters,
            max_inner_iters: p.max_inner_iters,
            empty_cluster_retry_cap: p.empty_cluster_retry_cap,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredLoss {
    pub risk: f64,
    pub penalty: f64,
    pub total: f64,
    pub lambda: f64,
    /// 1-based label of the unpenalized bicluster, absent when lambda is 0.
    pub noise_bicluster: Option<usize>,
}

impl From<&LossReport> for StoredLoss {
    fn from(l: &LossReport) -> Self {
        Self {
            risk: l.risk,
            penalty: l.penalty,
            total: l.total,
            lambda: l.lambda,
            noise_bicluster: l.noise_bicluster.map(|j| j + 1),
        }
    }
}

/// Serialized outcome of a fit. Labels are 1-based; `centers[j]` is the
/// center of bicluster `j` over its own columns in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub version: String,
    pub generator: String,
    pub params: FitParams,
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub centers: BTreeMap<usize, Vec<f64>>,
    pub loss: StoredLoss,
    pub source: Source,
    pub restart_index: usize,
    pub outer_iterations: usize,
    pub run_seed: u64,
    pub restarts: Vec<RestartSummary>,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

impl ResultDocument {
    pub fn from_fit(cfg: &AkmConfig, report: &FitReport) -> Self {
        let best = &report.best;
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: GENERATOR_NAME.to_string(),
            params: FitParams::from(cfg),
            n_rows: best.row_partition.len(),
            n_cols: best.col_partition.len(),
            row_labels: best.row_partition.to_one_based(),
            col_labels: best.col_partition.to_one_based(),
            centers: best
                .centers
                .centers()
                .iter()
                .enumerate()
                .map(|(j, c)| (j + 1, c.clone()))
                .collect(),
            loss: StoredLoss::from(&best.loss),
            source: best.source,
            restart_index: best.restart_index,
            outer_iterations: best.outer_iterations,
            run_seed: best.seed,
            restarts: report.restarts.clone(),
        }
    }

    pub fn row_partition(&self) -> Result<Partition, ModelError> {
        Partition::from_one_based(&self.row_labels, self.params.k)
    }

    pub fn col_partition(&self) -> Result<Partition, ModelError> {
        Partition::from_one_based(&self.col_labels, self.params.k)
    }

    /// Structural checks that need no data: lengths, valid partitions,
    /// center shapes and `total = risk + penalty`.
    pub fn check(&self) -> Result<(), IoError> {
        let bad = |msg: String| Err(IoError::Inconsistent(msg));
        if self.row_labels.len() != self.n_rows || self.col_labels.len() != self.n_cols {
            return bad(format!(
                "label lengths {}x{} do not match the recorded shape {}x{}",
                self.row_labels.len(),
                self.col_labels.len(),
                self.n_rows,
                self.n_cols
            ));
        }
        let cols = self.col_partition()?;
        self.row_partition()?;
        let keys: Vec<usize> = self.centers.keys().copied().collect();
        if keys != (1..=self.params.k).collect::<Vec<_>>() {
            return bad(format!("center keys {keys:?} are not 1..={}", self.params.k));
        }
        CenterSet::new(self.centers.values().cloned().collect(), &cols)?;
        let l = &self.loss;
        if relative_gap(l.total, l.risk + l.penalty) > LOSS_TOLERANCE {
            return bad(format!(
                "total {} differs from risk {} + penalty {}",
                l.total, l.risk, l.penalty
            ));
        }
        if l.noise_bicluster.is_some_and(|j| j == 0 || j > self.params.k) {
            return bad(format!("noise bicluster {:?} out of range", l.noise_bicluster));
        }
        Ok(())
    }

    /// Recomputes the loss on `x` from the stored state and compares it to
    /// the stored value.
    pub fn verify_against(&self, x: &DataMatrix) -> Result<LossReport, IoError> {
        self.check()?;
        if (x.n_rows(), x.n_cols()) != (self.n_rows, self.n_cols) {
            return Err(IoError::Inconsistent(format!(
                "matrix is {}x{} but the result was fitted on {}x{}",
                x.n_rows(),
                x.n_cols(),
                self.n_rows,
                self.n_cols
            )));
        }
        let rows = self.row_partition()?;
        let cols = self.col_partition()?;
        let centers = CenterSet::new(self.centers.values().cloned().collect(), &cols)?;
        let loss = penalized_loss(x, &rows, &cols, &centers, self.loss.lambda)?;
        if relative_gap(loss.total, self.loss.total) > LOSS_TOLERANCE {
            return Err(IoError::Inconsistent(format!(
                "stored loss {} but recomputed {}",
                self.loss.total, loss.total
            )));
        }
        Ok(loss)
    }

    /// Rebuilds the in-memory result (restart summaries are not included).
    pub fn to_result(&self) -> Result<BiclusterResult, IoError> {
        self.check()?;
        let rows = self.row_partition()?;
        let cols = self.col_partition()?;
        let centers = CenterSet::new(self.centers.values().cloned().collect(), &cols)?;
        let l = self.loss;
        Ok(BiclusterResult {
            row_partition: rows,
            col_partition: cols,
            centers,
            loss: LossReport {
                risk: l.risk,
                penalty: l.penalty,
                total: l.total,
                lambda: l.lambda,
                noise_bicluster: l.noise_bicluster.map(|j| j - 1),
            },
            restart_index: self.restart_index,
            outer_iterations: self.outer_iterations,
            source: self.source,
            seed: self.run_seed,
        })
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses a document and runs [`ResultDocument::check`].
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let doc: Self = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let mut out = create(path.as_ref())?;
        out.write_all(self.to_json()?.as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let mut text = String::new();
        open(path.as_ref())?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), IoError> {
    let mut out = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::akm_fit_report;

    #[test]
    fn header_is_detected_and_skipped() {
        let x = parse_matrix("g1,g2\n1,2\n3.5, -4e-3\n".as_bytes()).unwrap();
        assert_eq!(x.to_rows(), vec![vec![1.0, 2.0], vec![3.5, -4e-3]]);
        let y = parse_matrix("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(y.n_rows(), 2);
    }

    #[test]
    fn errors_name_line_and_column() {
        match parse_matrix("1,2\n3,x\n".as_bytes()) {
            Err(IoError::Parse { line, column, value }) => {
                assert_eq!((line, column, value.as_str()), (2, 2, "x"));
            }
            other => panic!("{other:?}"),
        }
        match parse_matrix("1,2\n3\n".as_bytes()) {
            Err(IoError::Ragged { line, expected, found }) => assert_eq!((line, expected, found), (2, 2, 1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_matrix("1,inf\n".as_bytes()), Err(IoError::NonFinite { .. })));
        assert!(matches!(parse_matrix("a,b\n".as_bytes()), Err(IoError::Empty)));
    }

    #[test]
    fn extreme_values_round_trip() {
        let vals = vec![0.1, -1.0 / 3.0, f64::MIN_POSITIVE, f64::MAX, 5e-324, -0.0];
        let x = DataMatrix::new(2, 3, vals).unwrap();
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &x).unwrap();
        let y = parse_matrix(buf.as_slice()).unwrap();
        for (a, b) in x.values().iter().zip(y.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn labels_round_trip_and_reject_zero() {
        let mut buf = Vec::new();
        write_labels_to(&mut buf, &[1, 2, 2, 1]).unwrap();
        assert_eq!(parse_labels(buf.as_slice()).unwrap(), vec![1, 2, 2, 1]);
        assert_eq!(parse_labels("class\n2\n1\n".as_bytes()).unwrap(), vec![2, 1]);
        assert!(parse_labels("1\n0\n".as_bytes()).is_err());
        assert!(parse_labels("1\nq\n".as_bytes()).is_err());
    }

    fn two_block() -> DataMatrix {
        DataMatrix::from_rows(&[
            [5.0, 5.0, 0.0, 0.0],
            [5.0, 5.0, 0.0, 0.0],
            [0.0, 0.0, 3.0, 3.0],
            [0.0, 0.0, 3.0, 3.0],
        ])
        .unwrap()
    }

    #[test]
    fn result_document_round_trips_and_verifies() {
        let x = two_block();
        let cfg = AkmConfig::new(2, 11).with_restarts(5).with_lambda(0.1);
        let report = akm_fit_report(&x, &cfg).unwrap();
        let doc = ResultDocument::from_fit(&cfg, &report);
        let back = ResultDocument::from_json(&doc.to_json().unwrap()).unwrap();
        // Restart traces are not serialized, so compare the JSON forms.
        assert_eq!(back.to_json().unwrap(), doc.to_json().unwrap());
        back.verify_against(&x).unwrap();
        assert_eq!(back.to_result().unwrap(), report.best);
        assert_eq!(doc.restarts.len(), 5);
    }

    #[test]
    fn tampered_documents_fail_loudly() {
        let x = two_block();
        let cfg = AkmConfig::new(2, 3).with_restarts(3);
        let doc = ResultDocument::from_fit(&cfg, &akm_fit_report(&x, &cfg).unwrap());

        let mut total = doc.clone();
        total.loss.total += 1.0;
        assert!(matches!(total.check(), Err(IoError::Inconsistent(_))));

        let mut labels = doc.clone();
        labels.row_labels = vec![1, 1, 1, 1];
        assert!(labels.check().is_err());

        let mut centers = doc.clone();
        centers.centers.get_mut(&1).unwrap()[0] += 1.0;
        centers.check().unwrap();
        assert!(matches!(centers.verify_against(&x), Err(IoError::Inconsistent(_))));
    }
}
