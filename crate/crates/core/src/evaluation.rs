//! Misclassification rates under best label alignment, and elbow curves.
//!
//! Predicted labels are arbitrary, so every rate is minimized over
//! bijections from predicted labels to true classes. When the two label
//! sets differ in size, both are padded to `K = max(k_pred, k_true)`;
//! predicted clusters mapped onto a padding class count entirely as errors.
//! Alignment is exhaustive up to `K = 8` and greedy above.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::engine::{akm_fit, AkmConfig};
use crate::matrix::{DataMatrix, Partition};
use crate::rng;

/// Largest label count aligned by exhaustive search (8! = 40320 maps).
pub const MAX_EXHAUSTIVE_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{what}: prediction covers {predicted} items, truth {truth}")]
    LengthMismatch {
        what: &'static str,
        predicted: usize,
        truth: usize,
    },
    #[error("true class labels are 1-based; found 0 at position {0}")]
    ZeroClass(usize),
    #[error("invalid k range {k_min}..={k_max} for a matrix with min dimension {bound}")]
    BadRange {
        k_min: usize,
        k_max: usize,
        bound: usize,
    },
}

/// How predicted row and column labels are matched to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Row labels and column labels each get their own best bijection.
    #[default]
    Independent,
    /// One bijection serves rows and columns together (bicluster `j`
    /// couples row group `j` and column group `j`).
    Joint,
}

/// Bijection from predicted labels to true classes and the rate it attains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAlignment {
    /// `mapping[p]` is the 1-based true class assigned to predicted label
    /// `p + 1`; values above the number of true classes are padding.
    pub mapping: Vec<usize>,
    pub achieved_rate: f64,
    /// False when the greedy fallback was used.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRate {
    pub rate: f64,
    pub alignment: Alignment,
    pub rows: LabelAlignment,
    pub cols: LabelAlignment,
}

/// Confusion counts `table[p][t]` padded to a square `K x K`.
struct Confusion {
    table: Vec<Vec<usize>>,
    total: usize,
}

impl Confusion {
    fn new(pred: &[usize], truth: &[usize], size: usize) -> Self {
        let mut table = vec![vec![0; size]; size];
        for (&p, &t) in pred.iter().zip(truth) {
            table[p][t - 1] += 1;
        }
        Self {
            table,
            total: truth.len(),
        }
    }

    fn correct(&self, sigma: &[usize]) -> usize {
        sigma.iter().enumerate().map(|(p, &t)| self.table[p][t]).sum()
    }

    fn alignment(&self, sigma: &[usize], exhaustive: bool) -> LabelAlignment {
        LabelAlignment {
            mapping: sigma.iter().map(|t| t + 1).collect(),
            achieved_rate: (self.total - self.correct(sigma)) as f64 / self.total as f64,
            exhaustive,
        }
    }
}

fn check_truth(what: &'static str, pred: &Partition, truth: &[usize]) -> Result<usize, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            what,
            predicted: pred.len(),
            truth: truth.len(),
        });
    }
    if let Some(pos) = truth.iter().position(|&t| t == 0) {
        return Err(EvalError::ZeroClass(pos));
    }
    Ok(truth.iter().copied().max().unwrap_or(1))
}

/// Greedy bijection: repeatedly match the pair with the largest score.
fn greedy(size: usize, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut sigma = vec![usize::MAX; size];
    let mut taken = vec![false; size];
    let mut pairs: Vec<(usize, usize)> = (0..size).cartesian_product(0..size).collect();
    pairs.sort_by(|&(a, b), &(c, d)| score(c, d).total_cmp(&score(a, b)));
    for (p, t) in pairs {
        if sigma[p] == usize::MAX && !taken[t] {
            sigma[p] = t;
            taken[t] = true;
        }
    }
    sigma
}

/// Bijection maximizing `objective`; the first maximizer in lexicographic
/// order wins.
fn best_bijection(
    size: usize,
    objective: impl Fn(&[usize]) -> f64,
    greedy_score: impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, bool) {
    if size > MAX_EXHAUSTIVE_K {
        log::warn!("aligning {size} labels greedily; the rate is an upper bound");
        return (greedy(size, greedy_score), false);
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for sigma in (0..size).permutations(size) {
        let value = objective(&sigma);
        if best.as_ref().is_none_or(|b| value > b.1) {
            best = Some((sigma, value));
        }
    }
    (best.expect("at least one permutation").0, true)
}

/// Fraction of rows in the wrong cluster under the best relabeling.
pub fn sample_misclassification_rate(
    pred: &Partition,
    truth: &[usize],
) -> Result<LabelAlignment, EvalError> {
    let k_true = check_truth("rows", pred, truth)?;
    let size = pred.k().max(k_true);
    let conf = Confusion::new(pred.labels(), truth, size);
    let (sigma, exhaustive) = best_bijection(
        size,
        |s| conf.correct(s) as f64,
        |p, t| conf.table[p][t] as f64,
    );
    Ok(conf.alignment(&sigma, exhaustive))
}

/// Fraction of entries whose row or column lies in the wrong cluster.
pub fn entry_misclassification_rate(
    pred_rows: &Partition,
    pred_cols: &Partition,
    true_rows: &[usize],
    true_cols: &[usize],
    alignment: Alignment,
) -> Result<EntryRate, EvalError> {
    let kr = check_truth("rows", pred_rows, true_rows)?;
    let kc = check_truth("columns", pred_cols, true_cols)?;
    let (n, m) = (true_rows.len(), true_cols.len());
    let wrong = |row_ok: usize, col_ok: usize| n * m - row_ok * col_ok;

    let (rc, cc, row_sigma, col_sigma, exhaustive) = match alignment {
        Alignment::Independent => {
            let rs = pred_rows.k().max(kr);
            let cs = pred_cols.k().max(kc);
            let rc = Confusion::new(pred_rows.labels(), true_rows, rs);
            let cc = Confusion::new(pred_cols.labels(), true_cols, cs);
            let (r_sigma, r_ex) =
                best_bijection(rs, |s| rc.correct(s) as f64, |p, t| rc.table[p][t] as f64);
            let (c_sigma, c_ex) =
                best_bijection(cs, |s| cc.correct(s) as f64, |p, t| cc.table[p][t] as f64);
            (rc, cc, r_sigma, c_sigma, r_ex && c_ex)
        }
        Alignment::Joint => {
            let size = pred_rows.k().max(pred_cols.k()).max(kr).max(kc);
            let rc = Confusion::new(pred_rows.labels(), true_rows, size);
            let cc = Confusion::new(pred_cols.labels(), true_cols, size);
            let (sigma, exhaustive) = best_bijection(
                size,
                |s| -(wrong(rc.correct(s), cc.correct(s)) as f64),
                |p, t| rc.table[p][t] as f64 / n as f64 + cc.table[p][t] as f64 / m as f64,
            );
            (rc, cc, sigma.clone(), sigma, exhaustive)
        }
    };
    Ok(EntryRate {
        rate: wrong(rc.correct(&row_sigma), cc.correct(&col_sigma)) as f64 / (n * m) as f64,
        alignment,
        rows: rc.alignment(&row_sigma, exhaustive),
        cols: cc.alignment(&col_sigma, exhaustive),
    })
}

/// Best total loss (lambda = 0) for each `k` in a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    pub k_values: Vec<usize>,
    /// `None` where every restart failed for that `k`.
    pub losses: Vec<Option<f64>>,
    pub restarts: Vec<usize>,
    pub seeds: Vec<u64>,
}

pub fn elbow_curve(
    x: &DataMatrix,
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<ElbowCurve, EvalError> {
    elbow_curve_with(x, k_min, k_max, &AkmConfig::new(1, seed).with_restarts(restarts))
}

/// Elbow curve using the caps, restarts and master seed of `base`; `k` and
/// `lambda` are overridden, and each `k` gets a seed derived from the master.
pub fn elbow_curve_with(
    x: &DataMatrix,
    k_min: usize,
    k_max: usize,
    base: &AkmConfig,
) -> Result<ElbowCurve, EvalError> {
    let bound = x.n_rows().min(x.n_cols());
    if k_min == 0 || k_min > k_max || k_max > bound {
        return Err(EvalError::BadRange { k_min, k_max, bound });
    }
    let mut curve = ElbowCurve {
        k_values: Vec::new(),
        losses: Vec::new(),
        restarts: Vec::new(),
        seeds: Vec::new(),
    };
    for k in k_min..=k_max {
        let cfg = AkmConfig {
            k,
            lambda: 0.0,
            seed: elbow_seed(base.seed, k),
            ..*base
        };
        let loss = match akm_fit(x, &cfg) {
            Ok(r) => Some(r.loss.total),
            Err(e) => {
                log::warn!("elbow: k = {k} failed: {e}");
                None
            }
        };
        curve.k_values.push(k);
        curve.losses.push(loss);
        curve.restarts.push(cfg.restarts);
        curve.seeds.push(cfg.seed);
    }
    Ok(curve)
}

/// Seed used for `k` on an elbow curve with master seed `seed`.
pub fn elbow_seed(seed: u64, k: usize) -> u64 {
    rng::derive_seed(seed, &[k as u64])
}
