//! Simulation benchmarks: grids of block-model cells, replicated runs of
//! AKM at several penalty levels and of the separate k-means baseline, and
//! mean / standard-error summaries of the entry misclassification rate.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{akm_fit_lambdas, AkmConfig};
use crate::evaluation::{entry_misclassification_rate, Alignment};
use crate::io::{write_json, IoError};
use crate::kmeans::{separate_kmeans, KMeansConfig};
use crate::matrix::{DataMatrix, Partition};
use crate::rng::derive_seed;
use crate::simgen::{generate, BlockModelSpec, Setting};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown plan key {key:?}; valid keys: {}", PLAN_KEYS.join(", "))]
    UnknownKey { key: String },
    #[error("plan line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid value {value:?} for {key}: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub const PLAN_KEYS: [&str; 14] = [
    "preset",
    "settings",
    "a",
    "b",
    "n",
    "replicates",
    "methods",
    "restarts",
    "max_outer_iters",
    "max_inner_iters",
    "retry_cap",
    "seed",
    "alignment",
    "timing",
];

/// A method compared in a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Alternating k-means with the given penalty weight.
    Akm { lambda: f64 },
    /// Separate Euclidean k-means on rows and columns.
    Km,
}

impl Method {
    pub const DEFAULT: [Method; 4] = [
        Method::Akm { lambda: 0.0 },
        Method::Akm { lambda: 0.1 },
        Method::Akm { lambda: 1.0 },
        Method::Km,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Akm { lambda } => write!(f, "akm({lambda})"),
            Method::Km => f.write_str("km"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    /// Accepts `km`, `akm` (lambda 0) or `akm(<lambda>)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("km") {
            return Ok(Method::Km);
        }
        if s.eq_ignore_ascii_case("akm") {
            return Ok(Method::Akm { lambda: 0.0 });
        }
        let inner = s
            .strip_prefix("akm(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("expected km, akm or akm(<lambda>), got {s:?}"))?;
        let lambda: f64 = inner
            .trim()
            .parse()
            .map_err(|_| format!("bad lambda {inner:?}"))?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(format!("lambda must be nonnegative, got {lambda}"));
        }
        Ok(Method::Akm { lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub setting: Setting,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub settings: Vec<Setting>,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub restarts: usize,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub retry_cap: usize,
    pub seed: u64,
    pub alignment: Alignment,
    /// Record wall-clock seconds per run. Off by default because timings
    /// make the output files differ between otherwise identical runs.
    pub timing: bool,
}

impl BenchPlan {
    /// Small, CI-speed configuration.
    pub fn desk() -> Self {
        Self {
            settings: Setting::ALL.to_vec(),
            a_values: vec![0.5, 1.0],
            b_values: vec![0.2, 0.3],
            n: 200,
            replicates: 10,
            methods: Method::DEFAULT.to_vec(),
            restarts: 20,
            max_outer_iters: 100,
            max_inner_iters: 100,
            retry_cap: 20,
            seed: 0,
            alignment: Alignment::default(),
            timing: false,
        }
    }

    /// Full-scale configuration: n = 400, 100 restarts, 50 replicates.
    pub fn paper() -> Self {
        Self {
            n: 400,
            replicates: 50,
            restarts: 100,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &setting in &self.settings {
            for &a in &self.a_values {
                for &b in &self.b_values {
                    cells.push(Cell { setting, a, b });
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Invalid(m.to_string()));
        if self.cells().is_empty() {
            return bad("the grid is empty");
        }
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.restarts == 0 || self.max_outer_iters == 0 || self.max_inner_iters == 0 || self.retry_cap == 0 {
            return bad("restarts and iteration caps must be at least 1");
        }
        for cell in self.cells() {
            BlockModelSpec::new(cell.setting, self.n, cell.a, cell.b, 0)
                .validate()
                .map_err(|e| BenchError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the desk preset (or the preset
    /// named by a `preset` line, wherever it appears). Lists are
    /// comma-separated; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut pairs = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BenchError::Syntax {
                line: index + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let mut plan = Self::desk();
        if let Some((_, name)) = pairs.iter().rev().find(|(k, _)| k == "preset") {
            plan = Self::preset(name).ok_or_else(|| BenchError::Value {
                key: "preset".into(),
                value: name.clone(),
                message: "expected desk or paper".into(),
            })?;
        }
        for (key, value) in &pairs {
            plan.set(key, value)?;
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Sets one plan key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let err = |message: String| BenchError::Value {
            key: key.to_string(),
            value: value.to_string(),
            message,
        };
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
            v.split(',').map(num).collect()
        }
        match key {
            "preset" => {}
            "settings" => {
                self.settings = value
                    .split(',')
                    .map(|s| s.trim().parse::<Setting>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()
                    .map_err(err)?
            }
            "a" => self.a_values = list(value).map_err(err)?,
            "b" => self.b_values = list(value).map_err(err)?,
            "n" => self.n = num(value).map_err(err)?,
            "replicates" => self.replicates = num(value).map_err(err)?,
            "methods" => {
                self.methods = split_methods(value)
                    .iter()
                    .map(|m| m.parse())
                    .collect::<Result<_, _>>()
                    .map_err(err)?
            }
            "restarts" => self.restarts = num(value).map_err(err)?,
            "max_outer_iters" => self.max_outer_iters = num(value).map_err(err)?,
            "max_inner_iters" => self.max_inner_iters = num(value).map_err(err)?,
            "retry_cap" => self.retry_cap = num(value).map_err(err)?,
            "seed" => self.seed = num(value).map_err(err)?,
            "alignment" => {
                self.alignment = match value {
                    "independent" => Alignment::Independent,
                    "joint" => Alignment::Joint,
                    _ => return Err(err("expected independent or joint".into())),
                }
            }
            "timing" => self.timing = num(value).map_err(err)?,
            _ => return Err(BenchError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    fn akm_config(&self, seed: u64) -> AkmConfig {
        AkmConfig {
            k: 2,
            lambda: 0.0,
            restarts: self.restarts,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            empty_cluster_retry_cap: self.retry_cap,
            seed,
        }
    }
}

/// Splits a method list on commas outside parentheses.
fn split_methods(value: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0usize, 0);
    for (i, c) in value.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(value[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(value[start..].trim());
    parts
}

/// One method on one replicate of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub cell: Cell,
    pub replicate: usize,
    pub data_seed: u64,
    pub method: Method,
    pub rate: Option<f64>,
    pub error: Option<String>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cell: Cell,
    pub method: Method,
    /// `None` when every replicate failed.
    pub mean: Option<f64>,
    /// Sample standard deviation over `sqrt(count)`; 0 for one replicate.
    pub std_error: Option<f64>,
    pub count: usize,
    pub failures: usize,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub plan: BenchPlan,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<Summary>,
}

/// Seed of the generated matrix for `replicate` of grid cell `cell_index`.
pub fn replicate_seed(master: u64, cell_index: usize, replicate: usize) -> u64 {
    derive_seed(master, &[cell_index as u64, replicate as u64])
}

fn run_replicate(plan: &BenchPlan, cell_index: usize, cell: Cell, replicate: usize) -> Vec<ReplicateRecord> {
    let data_seed = replicate_seed(plan.seed, cell_index, replicate);
    let record = |method, outcome: Result<f64, String>, seconds| ReplicateRecord {
        cell,
        replicate,
        data_seed,
        method,
        rate: outcome.as_ref().ok().copied(),
        error: outcome.err(),
        seconds,
    };
    let data = match generate(&BlockModelSpec::new(cell.setting, plan.n, cell.a, cell.b, data_seed)) {
        Ok(d) => d,
        Err(e) => {
            return plan
                .methods
                .iter()
                .map(|&m| record(m, Err(e.to_string()), None))
                .collect()
        }
    };
    let rate = |rows: &Partition, cols: &Partition| {
        entry_misclassification_rate(rows, cols, &data.row_classes, &data.col_classes, plan.alignment)
            .map(|r| r.rate)
            .map_err(|e| e.to_string())
    };
    let timed = |t: Instant| plan.timing.then(|| t.elapsed().as_secs_f64());

    let mut out = Vec::with_capacity(plan.methods.len());
    let lambdas: Vec<f64> = plan
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Akm { lambda } => Some(*lambda),
            Method::Km => None,
        })
        .collect();
    let mut akm = Vec::new();
    if !lambdas.is_empty() {
        let start = Instant::now();
        let fits = akm_fit_lambdas(&data.x, &plan.akm_config(derive_seed(data_seed, &[1])), &lambdas);
        let seconds = timed(start);
        match fits {
            Ok(reports) => {
                for (lambda, report) in lambdas.iter().zip(reports) {
                    let r = rate(&report.best.row_partition, &report.best.col_partition);
                    akm.push((*lambda, r, seconds));
                }
            }
            Err(e) => akm.extend(lambdas.iter().map(|&l| (l, Err(e.to_string()), seconds))),
        }
    }
    for &method in &plan.methods {
        match method {
            Method::Akm { lambda } => {
                let (_, r, s) = akm.iter().find(|(l, _, _)| *l == lambda).cloned().expect("fitted");
                out.push(record(method, r, s));
            }
            Method::Km => {
                let start = Instant::now();
                let r = km_rate(&data.x, plan, derive_seed(data_seed, &[2]))
                    .and_then(|(rows, cols)| rate(&rows, &cols));
                out.push(record(method, r, timed(start)));
            }
        }
    }
    out
}

fn km_rate(x: &DataMatrix, plan: &BenchPlan, seed: u64) -> Result<(Partition, Partition), String> {
    let cfg = KMeansConfig {
        max_iters: plan.max_inner_iters,
        retry_cap: plan.retry_cap,
        ..KMeansConfig::new(2, seed)
    };
    separate_kmeans(x, &cfg, plan.restarts).map_err(|e| e.to_string())
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport, BenchError> {
    plan.validate()?;
    let jobs: Vec<(usize, Cell, usize)> = plan
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(i, cell)| (0..plan.replicates).map(move |r| (i, cell, r)))
        .collect();
    let records: Vec<ReplicateRecord> = jobs
        .into_par_iter()
        .flat_map_iter(|(i, cell, r)| run_replicate(plan, i, cell, r))
        .collect();
    let summaries = summarize(&plan.cells(), &plan.methods, &records);
    Ok(BenchReport {
        plan: plan.clone(),
        records,
        summaries,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Aggregates records per (cell, method), in grid and method order.
pub fn summarize(cells: &[Cell], methods: &[Method], records: &[ReplicateRecord]) -> Vec<Summary> {
    let mut out = Vec::new();
    for cell in cells {
        for method in methods {
            let group: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.cell == *cell && r.method == *method)
                .collect();
            let rates: Vec<f64> = group.iter().filter_map(|r| r.rate).collect();
            let m = mean(&rates);
            let std_error = m.map(|m| {
                if rates.len() < 2 {
                    0.0
                } else {
                    let var = rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
                    (var / rates.len() as f64).sqrt()
                }
            });
            let seconds: Vec<f64> = group.iter().filter_map(|r| r.seconds).collect();
            out.push(Summary {
                cell: *cell,
                method: *method,
                mean: m,
                std_error,
                count: rates.len(),
                failures: group.len() - rates.len(),
                mean_seconds: mean(&seconds),
            });
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(mut out: W, records: &[ReplicateRecord]) -> Result<(), IoError> {
    writeln!(out, "setting,a,b,replicate,data_seed,method,rate,seconds,error")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},\"{}\",{},{},\"{}\"",
            r.cell.setting,
            r.cell.a,
            r.cell.b,
            r.replicate,
            r.data_seed,
            r.method,
            opt(r.rate),
            opt(r.seconds),
            r.error.as_deref().unwrap_or("").replace('"', "'")
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, summaries: &[Summary]) -> Result<(), IoError> {
    writeln!(out, "setting,a,b,method,mean,std_error,count,failures,mean_seconds")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},\"{}\",{},{},{},{},{}",
            s.cell.setting,
            s.cell.a,
            s.cell.b,
            s.method,
            opt(s.mean),
            opt(s.std_error),
            s.count,
            s.failures,
            opt(s.mean_seconds)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One row per cell, one `mean(se)` column per method, three decimals.
pub fn write_table_csv<W: Write>(mut out: W, report: &BenchReport) -> Result<(), IoError> {
    let methods = &report.plan.methods;
    write!(out, "setting,a,b")?;
    for m in methods {
        write!(out, ",\"{m}\"")?;
    }
    writeln!(out)?;
    for cell in report.plan.cells() {
        write!(out, "{},{},{}", cell.setting, cell.a, cell.b)?;
        for m in methods {
            let s = report
                .summaries
                .iter()
                .find(|s| s.cell == cell && s.method == *m);
            match s.and_then(|s| s.mean.zip(s.std_error)) {
                Some((mean, se)) => write!(out, ",{mean:.3}({se:.3})")?,
                None => write!(out, ",NA")?,
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

impl BenchReport {
    /// Writes `records.csv`, `summary.csv`, `table.csv` and `summary.json`
    /// into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), IoError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.to_path_buf(),
            source,
        })?;
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path)
                .map(std::io::BufWriter::new)
                .map_err(|source| IoError::File { path, source })
        };
        write_records_csv(create("records.csv")?, &self.records)?;
        write_summary_csv(create("summary.csv")?, &self.summaries)?;
        write_table_csv(create("table.csv")?, self)?;
        write_json(dir.join("summary.json"), self)
    }

    pub fn summary(&self, cell: &Cell, method: Method) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.cell == *cell && s.method == method)
    }
}
