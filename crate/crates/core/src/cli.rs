//! Batch commands behind the `akm` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 algorithm failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{run_bench, BenchError, BenchPlan};
use crate::engine::{akm_fit_report, AkmConfig, EngineError};
use crate::evaluation::{
    elbow_curve_with, entry_misclassification_rate, sample_misclassification_rate, Alignment,
    EvalError,
};
use crate::io::{
    read_labels, read_matrix, write_json, write_labels, write_matrix, IoError, ResultDocument,
};
use crate::rng::{entropy_seed, GENERATOR_NAME};
use crate::simgen::{generate, BlockModelSpec, Setting, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("algorithm failure: {0}")]
    Algorithm(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Algorithm(_) => 3,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Algorithm(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec(_) | SimError::UnknownSetting(_) => CliError::Usage(e.to_string()),
            _ => CliError::Algorithm(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "akm", version, about = "Alternating k-means biclustering")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit biclusters to a CSV matrix and write a JSON result document.
    Fit(FitArgs),
    /// Generate a block-model matrix with its true row and column classes.
    Simulate(SimulateArgs),
    /// Score a result document against true labels.
    Eval(EvalArgs),
    /// Best loss for each k in a range, as a two-column CSV.
    Elbow(ElbowArgs),
    /// Run a simulation benchmark grid.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Master seed; drawn from system entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub max_outer_iters: usize,
    #[arg(long, default_value_t = 100)]
    pub max_inner_iters: usize,
    /// Attempts per restart before giving up on empty clusters.
    #[arg(long, default_value_t = 20)]
    pub retry_cap: usize,
}

impl EngineArgs {
    fn config(&self, k: usize, lambda: f64, seed: u64) -> AkmConfig {
        AkmConfig {
            k,
            lambda,
            restarts: self.restarts,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            empty_cluster_retry_cap: self.retry_cap,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Numeric CSV, rows are samples.
    pub matrix: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// mean-shift, variance-shift or mean-and-variance (or 1, 2, 3).
    #[arg(long)]
    pub setting: Setting,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Matrix CSV path. Labels and metadata go next to it as
    /// `<stem>_rows.csv`, `<stem>_cols.csv` and `<stem>_meta.json` unless
    /// given explicitly.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub row_labels: Option<PathBuf>,
    #[arg(long)]
    pub col_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignmentArg {
    Independent,
    Joint,
}

impl From<AlignmentArg> for Alignment {
    fn from(a: AlignmentArg) -> Self {
        match a {
            AlignmentArg::Independent => Alignment::Independent,
            AlignmentArg::Joint => Alignment::Joint,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result document written by `akm fit`.
    pub result: PathBuf,
    /// True row classes (1-based labels CSV).
    #[arg(long)]
    pub rows: PathBuf,
    /// True column classes; enables the entry misclassification rate.
    #[arg(long)]
    pub cols: Option<PathBuf>,
    /// Original matrix; when given, the stored loss is recomputed and checked.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlignmentArg::Independent)]
    pub alignment: AlignmentArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ElbowArgs {
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long)]
    pub k_max: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Two-column `k,loss` CSV; a JSON sidecar with seeds is written next
    /// to it with a `.json` extension.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Plan file of `key = value` lines.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Record wall-clock times (makes outputs run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Directory receiving records.csv, summary.csv, table.csv, summary.json.
    #[arg(long)]
    pub output: PathBuf,
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = entropy_seed();
        eprintln!("no --seed given; using seed {s}");
        s
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn cmd_fit(args: &FitArgs) -> Result<ResultDocument, CliError> {
    let x = read_matrix(&args.matrix)?;
    let cfg = args.engine.config(args.k, args.lambda, seed_or_entropy(args.engine.seed));
    let report = akm_fit_report(&x, &cfg)?;
    let doc = ResultDocument::from_fit(&cfg, &report);
    doc.verify_against(&x)?;
    doc.save(&args.output)?;
    println!(
        "loss {} (risk {}, penalty {}) from restart {} [{}], seed {}",
        doc.loss.total,
        doc.loss.risk,
        doc.loss.penalty,
        doc.restart_index,
        serde_json::to_string(&doc.source).unwrap_or_default().trim_matches('"'),
        cfg.seed
    );
    Ok(doc)
}

#[derive(Debug, Serialize)]
struct SimulationMeta {
    spec: BlockModelSpec,
    n_rows: usize,
    n_cols: usize,
    generator: &'static str,
    version: &'static str,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let spec = BlockModelSpec::new(args.setting, args.n, args.a, args.b, seed_or_entropy(args.seed));
    let data = generate(&spec)?;
    write_matrix(&args.output, &data.x)?;
    let rows = args.row_labels.clone().unwrap_or_else(|| sibling(&args.output, "_rows.csv"));
    let cols = args.col_labels.clone().unwrap_or_else(|| sibling(&args.output, "_cols.csv"));
    write_labels(&rows, &data.row_classes)?;
    write_labels(&cols, &data.col_classes)?;
    let meta = SimulationMeta {
        spec,
        n_rows: data.x.n_rows(),
        n_cols: data.x.n_cols(),
        generator: GENERATOR_NAME,
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(sibling(&args.output, "_meta.json"), &meta)?;
    println!(
        "wrote {}x{} {} matrix to {} (seed {})",
        data.x.n_rows(),
        data.x.n_cols(),
        spec.setting,
        args.output.display(),
        spec.seed
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutput {
    pub sample_rate: f64,
    pub row_mapping: Vec<usize>,
    pub entry_rate: Option<f64>,
    pub col_rate: Option<f64>,
    pub alignment: Alignment,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutput, CliError> {
    let doc = ResultDocument::load(&args.result)?;
    if let Some(m) = &args.matrix {
        doc.verify_against(&read_matrix(m)?)?;
    }
    let rows = doc.row_partition().map_err(IoError::from)?;
    let cols = doc.col_partition().map_err(IoError::from)?;
    let true_rows = read_labels(&args.rows)?;
    let sample = sample_misclassification_rate(&rows, &true_rows)?;
    let mut out = EvalOutput {
        sample_rate: sample.achieved_rate,
        row_mapping: sample.mapping,
        entry_rate: None,
        col_rate: None,
        alignment: args.alignment.into(),
    };
    if let Some(path) = &args.cols {
        let true_cols = read_labels(path)?;
        let entry = entry_misclassification_rate(&rows, &cols, &true_rows, &true_cols, out.alignment)?;
        out.entry_rate = Some(entry.rate);
        out.col_rate = Some(entry.cols.achieved_rate);
    }
    println!("sample misclassification rate: {}", out.sample_rate);
    if let Some(r) = out.entry_rate {
        println!("entry misclassification rate: {r}");
    }
    if let Some(path) = &args.output {
        write_json(path, &out)?;
    }
    Ok(out)
}

pub fn cmd_elbow(args: &ElbowArgs) -> Result<(), CliError> {
    let x = read_matrix(&args.matrix)?;
    let base = args.engine.config(1, 0.0, seed_or_entropy(args.engine.seed));
    base.validate(&x)?;
    let curve = elbow_curve_with(&x, args.k_min, args.k_max, &base)?;
    let mut csv = String::from("k,loss\n");
    for (k, loss) in curve.k_values.iter().zip(&curve.losses) {
        match loss {
            Some(l) => csv.push_str(&format!("{k},{l}\n")),
            None => csv.push_str(&format!("{k},NA\n")),
        }
        println!("k = {k}: {}", loss.map_or("failed".to_string(), |l| l.to_string()));
    }
    std::fs::write(&args.output, csv).map_err(|source| IoError::File {
        path: args.output.clone(),
        source,
    })?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        master_seed: u64,
        curve: &'a crate::evaluation::ElbowCurve,
    }
    write_json(
        args.output.with_extension("json"),
        &Sidecar {
            master_seed: base.seed,
            curve: &curve,
        },
    )?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let (mut plan, plan_has_seed) = match &args.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
                path: path.clone(),
                source,
            })?;
            let has_seed = text
                .lines()
                .filter_map(|l| l.split('#').next()?.split_once('='))
                .any(|(k, _)| k.trim() == "seed");
            (BenchPlan::parse(&text)?, has_seed)
        }
        None => (BenchPlan::desk(), false),
    };
    if let Some(preset) = args.preset {
        let base = match preset {
            Preset::Desk => BenchPlan::desk(),
            Preset::Paper => BenchPlan::paper(),
        };
        plan.n = base.n;
        plan.replicates = base.replicates;
        plan.restarts = base.restarts;
    }
    if let Some(r) = args.replicates {
        plan.replicates = r;
    }
    if let Some(r) = args.restarts {
        plan.restarts = r;
    }
    plan.timing |= args.timing;
    plan.seed = match args.seed {
        Some(s) => s,
        None if plan_has_seed => plan.seed,
        None => seed_or_entropy(None),
    };
    let report = run_bench(&plan)?;
    report.write_dir(&args.output)?;
    for s in &report.summaries {
        println!(
            "{} a={} b={} {}: {} ({} ok, {} failed)",
            s.cell.setting,
            s.cell.a,
            s.cell.b,
            s.method,
            s.mean.map_or("NA".into(), |m| format!("{m:.3}")),
            s.count,
            s.failures
        );
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Elbow(a) => cmd_elbow(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses `args`, runs the command on a pool of `--threads` workers and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("usage error: --threads must be at least 1");
            return 1;
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 3;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
