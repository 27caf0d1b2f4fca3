//! Alternating k-means biclustering.
//!
//! A single run clusters rows and columns separately with Euclidean
//! k-means, then alternates a row phase (Lloyd iterations on the rows
//! under the dn norm with the column groups held fixed) and a column phase
//! (the same on the transposed matrix) until neither partition moves. The
//! run keeps whichever of the two recorded states (after separate k-means,
//! after alternation) has the smaller loss. [`akm_fit`] repeats this from
//! random row/column permutations and keeps the best restart.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kmeans::{lloyd_kmeans, KMeansConfig, KMeansError};
use crate::loss::{
    argmin, bicluster_norms, empirical_risk, inverse_sizes, row_distances, CenterSet, LossError,
    LossReport,
};
use crate::matrix::{DataMatrix, ModelError, Partition};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("all {restarts} restarts failed on empty clusters ({retry_cap} attempts each)")]
    AllRestartsFailed { restarts: usize, retry_cap: usize },
    #[error(transparent)]
    KMeans(#[from] KMeansError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An assignment step left at least one cluster without members; the run
/// cannot continue and must be restarted.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("assignment emptied clusters {empty:?} in round {round}")]
pub struct RestartRequired {
    pub round: usize,
    pub empty: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AkmConfig {
    pub k: usize,
    pub lambda: f64,
    pub restarts: usize,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub empty_cluster_retry_cap: usize,
    pub seed: u64,
}

impl AkmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            lambda: 0.0,
            restarts: 100,
            max_outer_iters: 100,
            max_inner_iters: 100,
            empty_cluster_retry_cap: 20,
            seed,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self, x: &DataMatrix) -> Result<(), EngineError> {
        let bound = x.n_rows().min(x.n_cols());
        if self.k == 0 || self.k > bound {
            return Err(EngineError::InvalidConfig(format!(
                "k = {} must lie in 1..={bound} for a {}x{} matrix",
                self.k,
                x.n_rows(),
                x.n_cols()
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "lambda = {} must be finite and nonnegative",
                self.lambda
            )));
        }
        for (name, v) in [
            ("restarts", self.restarts),
            ("max_outer_iters", self.max_outer_iters),
            ("max_inner_iters", self.max_inner_iters),
            ("empty_cluster_retry_cap", self.empty_cluster_retry_cap),
        ] {
            if v == 0 {
                return Err(EngineError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Which recorded state of a run produced the reported loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    SeparateKmeans,
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiclusterResult {
    pub row_partition: Partition,
    pub col_partition: Partition,
    pub centers: CenterSet,
    pub loss: LossReport,
    pub restart_index: usize,
    pub outer_iterations: usize,
    pub source: Source,
    /// Seed of the winning single run.
    pub seed: u64,
}

/// Cluster means of every row group on its own column group.
pub fn update_centers(
    x: &DataMatrix,
    rows: &Partition,
    cols: &Partition,
) -> Result<CenterSet, EngineError> {
    check_shapes(x, rows, cols)?;
    let spread = center_spread(x, rows.labels(), cols, &rows.sizes());
    Ok(gather_centers(&spread, cols))
}

fn check_shapes(x: &DataMatrix, rows: &Partition, cols: &Partition) -> Result<(), EngineError> {
    if rows.len() != x.n_rows() {
        return Err(EngineError::Shape {
            what: "row partition length",
            expected: x.n_rows(),
            got: rows.len(),
        });
    }
    if cols.len() != x.n_cols() {
        return Err(EngineError::Shape {
            what: "column partition length",
            expected: x.n_cols(),
            got: cols.len(),
        });
    }
    if rows.k() != cols.k() {
        return Err(EngineError::Shape {
            what: "row partition k",
            expected: cols.k(),
            got: rows.k(),
        });
    }
    Ok(())
}

/// Centers laid out along the columns (see [`CenterSet::spread`]).
fn center_spread(
    x: &DataMatrix,
    row_labels: &[usize],
    cols: &Partition,
    row_sizes: &[usize],
) -> Vec<f64> {
    let col_labels = cols.labels();
    let mut acc = vec![0.0; x.n_cols()];
    for (row, &g) in x.rows().zip(row_labels) {
        for ((a, &v), &cg) in acc.iter_mut().zip(row).zip(col_labels) {
            if cg == g {
                *a += v;
            }
        }
    }
    for (a, &cg) in acc.iter_mut().zip(col_labels) {
        *a /= row_sizes[cg] as f64;
    }
    acc
}

fn gather_centers(spread: &[f64], cols: &Partition) -> CenterSet {
    let mut centers = vec![Vec::new(); cols.k()];
    for (&v, &g) in spread.iter().zip(cols.labels()) {
        centers[g].push(v);
    }
    CenterSet::new(centers, cols).expect("centers gathered along the partition match it")
}

/// Result of one dn-norm assignment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// 0-based nearest center per row (ties to the lowest label).
    pub labels: Vec<usize>,
    /// Mean of the per-row minimal distances.
    pub risk: f64,
    /// Set when some label in `0..k` received no rows; `labels` then do not
    /// form a valid partition.
    pub empty_cluster: bool,
}

impl Assignment {
    pub fn into_partition(self, k: usize) -> Result<Partition, ModelError> {
        Partition::new(self.labels, k)
    }
}

pub fn assign_rows(
    x: &DataMatrix,
    cols: &Partition,
    centers: &CenterSet,
) -> Result<Assignment, EngineError> {
    if cols.len() != x.n_cols() {
        return Err(EngineError::Shape {
            what: "column partition length",
            expected: x.n_cols(),
            got: cols.len(),
        });
    }
    if !centers.is_built_for(cols) {
        return Err(LossError::PartitionMismatch.into());
    }
    Ok(assign_spread(x, cols, &centers.spread(cols), &inverse_sizes(cols)))
}

fn assign_spread(x: &DataMatrix, cols: &Partition, spread: &[f64], inv: &[f64]) -> Assignment {
    let k = cols.k();
    let mut scratch = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut labels = Vec::with_capacity(x.n_rows());
    let mut total = 0.0;
    for row in x.rows() {
        row_distances(row, cols.labels(), spread, inv, &mut scratch);
        let (j, d) = argmin(&scratch);
        labels.push(j);
        counts[j] += 1;
        total += d;
    }
    Assignment {
        labels,
        risk: total / x.n_rows() as f64,
        empty_cluster: counts.contains(&0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    /// Final partition of the phase's rows.
    pub partition: Partition,
    pub centers: CenterSet,
    /// Empirical risk of `centers` at exit.
    pub risk: f64,
    /// Empirical risk after every center update; non-increasing.
    pub trace: Vec<f64>,
    /// Number of update/assign rounds performed.
    pub rounds: usize,
    pub converged: bool,
}

/// Lloyd iterations on the rows of `x` under the dn norm with the column
/// groups `cols` fixed, starting from `rows_init`.
pub fn row_phase(
    x: &DataMatrix,
    cols: &Partition,
    rows_init: &Partition,
    max_iters: usize,
) -> Result<Result<PhaseOutcome, RestartRequired>, EngineError> {
    check_shapes(x, rows_init, cols)?;
    if max_iters == 0 {
        return Err(EngineError::InvalidConfig("max_inner_iters must be at least 1".into()));
    }
    Ok(run_phase(x, cols, rows_init, max_iters))
}

fn run_phase(
    x: &DataMatrix,
    cols: &Partition,
    rows_init: &Partition,
    max_iters: usize,
) -> Result<PhaseOutcome, RestartRequired> {
    let k = cols.k();
    let inv = inverse_sizes(cols);
    let mut rows = rows_init.clone();
    let mut trace = Vec::new();
    for round in 1..=max_iters {
        let spread = center_spread(x, rows.labels(), cols, &rows.sizes());
        let assignment = assign_spread(x, cols, &spread, &inv);
        trace.push(assignment.risk);
        if assignment.empty_cluster {
            let mut used = vec![false; k];
            assignment.labels.iter().for_each(|&l| used[l] = true);
            let empty = (0..k).filter(|&j| !used[j]).collect();
            return Err(RestartRequired { round, empty });
        }
        if assignment.labels == rows.labels() {
            return Ok(PhaseOutcome {
                partition: rows,
                centers: gather_centers(&spread, cols),
                risk: assignment.risk,
                trace,
                rounds: round,
                converged: true,
            });
        }
        rows = Partition::new(assignment.labels, k).expect("no empty clusters");
    }
    let spread = center_spread(x, rows.labels(), cols, &rows.sizes());
    let risk = assign_spread(x, cols, &spread, &inv).risk;
    trace.push(risk);
    Ok(PhaseOutcome {
        partition: rows,
        centers: gather_centers(&spread, cols),
        risk,
        trace,
        rounds: max_iters,
        converged: false,
    })
}

/// Row phase on the transpose: returns a new column partition of `x`.
/// The centers live on the row groups of `x`.
pub fn column_phase(
    x: &DataMatrix,
    rows: &Partition,
    cols_init: &Partition,
    max_iters: usize,
) -> Result<Result<PhaseOutcome, RestartRequired>, EngineError> {
    row_phase(&x.transpose(), rows, cols_init, max_iters)
}

/// A `(J, I)` state evaluated on the original matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedState {
    pub rows: Partition,
    pub cols: Partition,
    pub centers: CenterSet,
    pub risk: f64,
    pub block_norms: Vec<f64>,
}

impl EvaluatedState {
    pub fn evaluate(x: &DataMatrix, rows: Partition, cols: Partition) -> Result<Self, EngineError> {
        let centers = update_centers(x, &rows, &cols)?;
        let risk = empirical_risk(x, &cols, &centers)?;
        let block_norms = bicluster_norms(x, &rows, &cols);
        Ok(Self {
            rows,
            cols,
            centers,
            risk,
            block_norms,
        })
    }

    pub fn loss(&self, total_norm: f64, lambda: f64) -> LossReport {
        LossReport::from_parts(self.risk, total_norm, &self.block_norms, lambda)
    }
}

/// Both recorded states of a single run, mapped back to the original
/// row/column order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub separate: EvaluatedState,
    pub alternating: EvaluatedState,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Every row- and column-phase risk trace, in execution order.
    pub phase_traces: Vec<Vec<f64>>,
    pub seed: u64,
}

impl RunOutcome {
    /// Final choice: the alternating state unless separate k-means is
    /// strictly better under `lambda`.
    pub fn select(&self, total_norm: f64, lambda: f64) -> (Source, &EvaluatedState, LossReport) {
        let sep = self.separate.loss(total_norm, lambda);
        let alt = self.alternating.loss(total_norm, lambda);
        if sep.total < alt.total {
            (Source::SeparateKmeans, &self.separate, sep)
        } else {
            (Source::Alternating, &self.alternating, alt)
        }
    }

    /// Largest step-to-step increase over all phase traces (`<= 0` means
    /// every trace is non-increasing).
    pub fn max_trace_increase(&self) -> f64 {
        self.phase_traces
            .iter()
            .flat_map(|t| t.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Failure of a single run.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Restart(#[from] RestartRequired),
    #[error(transparent)]
    Fatal(#[from] EngineError),
}

/// Runs one restart on `x` reordered by `row_order`/`col_order` and maps
/// the partitions back to the original order.
pub fn run_permuted(
    x: &DataMatrix,
    cfg: &AkmConfig,
    row_order: &[usize],
    col_order: &[usize],
    run_seed: u64,
) -> Result<RunOutcome, RunError> {
    let y = x.permuted(row_order, col_order);
    let yt = y.transpose();
    let raw = run_on(&y, &yt, cfg, run_seed)?;
    let separate = EvaluatedState::evaluate(
        x,
        raw.separate.0.unpermute(row_order),
        raw.separate.1.unpermute(col_order),
    )?;
    let alternating = EvaluatedState::evaluate(
        x,
        raw.alternating.0.unpermute(row_order),
        raw.alternating.1.unpermute(col_order),
    )?;
    Ok(RunOutcome {
        separate,
        alternating,
        outer_iterations: raw.outer_iterations,
        converged: raw.converged,
        phase_traces: raw.phase_traces,
        seed: run_seed,
    })
}

struct RawRun {
    separate: (Partition, Partition),
    alternating: (Partition, Partition),
    outer_iterations: usize,
    converged: bool,
    phase_traces: Vec<Vec<f64>>,
}

fn run_on(y: &DataMatrix, yt: &DataMatrix, cfg: &AkmConfig, seed: u64) -> Result<RawRun, RunError> {
    let km = |points: &DataMatrix, stream: u64| {
        let km_cfg = KMeansConfig {
            k: cfg.k,
            max_iters: cfg.max_inner_iters,
            seed: rng::derive_seed(seed, &[stream]),
            retry_cap: cfg.empty_cluster_retry_cap,
        };
        match lloyd_kmeans(points, &km_cfg) {
            Ok(r) => Ok(r.partition),
            Err(KMeansError::PersistentEmptyCluster { .. }) => Err(RunError::Restart(RestartRequired {
                round: 0,
                empty: Vec::new(),
            })),
            Err(e) => Err(RunError::Fatal(e.into())),
        }
    };
    let rows0 = km(y, 0)?;
    let cols0 = km(yt, 1)?;

    let mut rows = rows0.clone();
    let mut cols = cols0.clone();
    let mut phase_traces = Vec::new();
    let mut converged = false;
    let mut outer = 0;
    while outer < cfg.max_outer_iters {
        outer += 1;
        let rp = run_phase(y, &cols, &rows, cfg.max_inner_iters)?;
        let cp = run_phase(yt, &rp.partition, &cols, cfg.max_inner_iters)?;
        let stable = rp.partition == rows && cp.partition == cols;
        phase_traces.push(rp.trace);
        phase_traces.push(cp.trace);
        rows = rp.partition;
        cols = cp.partition;
        if stable {
            converged = true;
            break;
        }
    }
    Ok(RawRun {
        separate: (rows0, cols0),
        alternating: (rows, cols),
        outer_iterations: outer,
        converged,
        phase_traces,
    })
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// One run of the algorithm on `x` as given (no permutation).
pub fn akm_single_run(x: &DataMatrix, cfg: &AkmConfig, run_seed: u64) -> Result<BiclusterResult, RunError> {
    cfg.validate(x)?;
    let out = run_permuted(x, cfg, &identity(x.n_rows()), &identity(x.n_cols()), run_seed)?;
    let (source, state, loss) = out.select(x.frobenius_sq(), cfg.lambda);
    Ok(BiclusterResult {
        row_partition: state.rows.clone(),
        col_partition: state.cols.clone(),
        centers: state.centers.clone(),
        loss,
        restart_index: 0,
        outer_iterations: out.outer_iterations,
        source,
        seed: run_seed,
    })
}

/// Per-restart bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart_index: usize,
    /// Attempts discarded because of empty clusters.
    pub retries: usize,
    pub completed: bool,
    pub loss: Option<f64>,
    pub source: Option<Source>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub run_seed: Option<u64>,
    #[serde(skip)]
    pub max_trace_increase: f64,
    #[serde(skip)]
    pub phase_traces: Vec<Vec<f64>>,
}

/// Best result over all restarts plus the per-restart summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub best: BiclusterResult,
    pub restarts: Vec<RestartSummary>,
}

/// Outcome of one restart slot before per-lambda selection.
struct RestartRun {
    index: usize,
    retries: usize,
    outcome: Option<RunOutcome>,
}

fn shuffled(n: usize, rng: &mut rng::StreamRng) -> Vec<usize> {
    let mut v = identity(n);
    v.shuffle(rng);
    v
}

fn run_restart(x: &DataMatrix, cfg: &AkmConfig, index: usize) -> Result<RestartRun, EngineError> {
    for attempt in 0..cfg.empty_cluster_retry_cap {
        let mut stream = rng::stream(cfg.seed, &[index as u64, attempt as u64]);
        let row_order = shuffled(x.n_rows(), &mut stream);
        let col_order = shuffled(x.n_cols(), &mut stream);
        let run_seed: u64 = stream.random();
        match run_permuted(x, cfg, &row_order, &col_order, run_seed) {
            Ok(outcome) => {
                return Ok(RestartRun {
                    index,
                    retries: attempt,
                    outcome: Some(outcome),
                })
            }
            Err(RunError::Restart(r)) => {
                log::debug!("restart {index} attempt {attempt}: {r}");
            }
            Err(RunError::Fatal(e)) => return Err(e),
        }
    }
    Ok(RestartRun {
        index,
        retries: cfg.empty_cluster_retry_cap,
        outcome: None,
    })
}

/// Multi-restart fit, selecting once per value in `lambdas`.
///
/// The restarts do not depend on lambda, so each lambda's report equals
/// what [`akm_fit_report`] returns with `cfg.lambda` set to that value.
pub fn akm_fit_lambdas(
    x: &DataMatrix,
    cfg: &AkmConfig,
    lambdas: &[f64],
) -> Result<Vec<FitReport>, EngineError> {
    cfg.validate(x)?;
    for &lambda in lambdas {
        AkmConfig { lambda, ..*cfg }.validate(x)?;
    }
    let runs: Vec<RestartRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(x, cfg, r))
        .collect::<Result<_, _>>()?;
    if runs.iter().all(|r| r.outcome.is_none()) {
        return Err(EngineError::AllRestartsFailed {
            restarts: cfg.restarts,
            retry_cap: cfg.empty_cluster_retry_cap,
        });
    }
    let total_norm = x.frobenius_sq();
    Ok(lambdas
        .iter()
        .map(|&lambda| select_best(&runs, total_norm, lambda))
        .collect())
}

fn select_best(runs: &[RestartRun], total_norm: f64, lambda: f64) -> FitReport {
    let mut best: Option<(usize, Source, &EvaluatedState, LossReport, &RunOutcome)> = None;
    let mut summaries = Vec::with_capacity(runs.len());
    for run in runs {
        let Some(out) = &run.outcome else {
            summaries.push(RestartSummary {
                restart_index: run.index,
                retries: run.retries,
                completed: false,
                loss: None,
                source: None,
                outer_iterations: 0,
                converged: false,
                run_seed: None,
                max_trace_increase: f64::NEG_INFINITY,
                phase_traces: Vec::new(),
            });
            continue;
        };
        let (source, state, loss) = out.select(total_norm, lambda);
        summaries.push(RestartSummary {
            restart_index: run.index,
            retries: run.retries,
            completed: true,
            loss: Some(loss.total),
            source: Some(source),
            outer_iterations: out.outer_iterations,
            converged: out.converged,
            run_seed: Some(out.seed),
            max_trace_increase: out.max_trace_increase(),
            phase_traces: out.phase_traces.clone(),
        });
        // strict comparison keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|b| loss.total < b.3.total) {
            best = Some((run.index, source, state, loss, out));
        }
    }
    let (restart_index, source, state, loss, out) = best.expect("at least one restart completed");
    FitReport {
        best: BiclusterResult {
            row_partition: state.rows.clone(),
            col_partition: state.cols.clone(),
            centers: state.centers.clone(),
            loss,
            restart_index,
            outer_iterations: out.outer_iterations,
            source,
            seed: out.seed,
        },
        restarts: summaries,
    }
}

pub fn akm_fit_report(x: &DataMatrix, cfg: &AkmConfig) -> Result<FitReport, EngineError> {
    Ok(akm_fit_lambdas(x, cfg, &[cfg.lambda])?
        .pop()
        .expect("one lambda requested"))
}

/// Runs `cfg.restarts` permuted restarts and returns the minimum-loss result.
pub fn akm_fit(x: &DataMatrix, cfg: &AkmConfig) -> Result<BiclusterResult, EngineError> {
    akm_fit_report(x, cfg).map(|r| r.best)
}
