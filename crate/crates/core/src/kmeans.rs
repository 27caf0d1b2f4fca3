//! Euclidean Lloyd k-means.
//!
//! Used to initialize the biclustering runs and, applied separately to
//! rows and columns, as the KM comparison method.

use rand::seq::index;

use crate::matrix::{DataMatrix, Partition};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KMeansError {
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("cannot form {k} clusters from {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error("empty clusters persisted after {attempts} reseedings")]
    PersistentEmptyCluster { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Number of fresh initializations tried when empty-cluster repair fails.
    pub retry_cap: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            seed,
            retry_cap: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub partition: Partition,
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the final state.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of squares after every center update.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &DataMatrix, centers: &[Vec<f64>], labels: &mut [usize], dist: &mut [f64]) {
    for (i, p) in points.rows().enumerate() {
        let mut best = (0, sq_dist(p, &centers[0]));
        for (j, c) in centers.iter().enumerate().skip(1) {
            let d = sq_dist(p, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        labels[i] = best.0;
        dist[i] = best.1;
    }
}

/// Moves the point farthest from its own center into each empty cluster,
/// taking only from clusters that keep at least one member.
fn repair_empty(
    points: &DataMatrix,
    k: usize,
    centers: &mut [Vec<f64>],
    labels: &mut [usize],
    dist: &mut [f64],
) -> bool {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            });
        let Some(i) = donor else {
            return false;
        };
        sizes[labels[i]] -= 1;
        sizes[empty] = 1;
        labels[i] = empty;
        dist[i] = 0.0;
        centers[empty] = points.row(i).to_vec();
    }
    true
}

fn means(points: &DataMatrix, k: usize, labels: &[usize]) -> Vec<Vec<f64>> {
    let dim = points.n_cols();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let inv = 1.0 / c as f64;
        s.iter_mut().for_each(|v| *v *= inv);
    }
    sums
}

fn inertia(points: &DataMatrix, centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .rows()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum()
}

/// Clusters the rows of `points` with Lloyd iterations from a Forgy
/// initialization (k distinct rows drawn without replacement).
pub fn lloyd_kmeans(points: &DataMatrix, cfg: &KMeansConfig) -> Result<KMeansResult, KMeansError> {
    let n = points.n_rows();
    if cfg.k == 0 {
        return Err(KMeansError::ZeroClusters);
    }
    if cfg.k > n {
        return Err(KMeansError::TooFewPoints { k: cfg.k, points: n });
    }
    if cfg.max_iters == 0 {
        return Err(KMeansError::ZeroIterations);
    }
    let attempts = cfg.retry_cap.max(1);
    for attempt in 0..attempts {
        if let Some(result) = lloyd_attempt(points, cfg, attempt as u64) {
            return Ok(result);
        }
        log::debug!("k-means attempt {attempt} left a cluster empty; reseeding");
    }
    Err(KMeansError::PersistentEmptyCluster { attempts })
}

fn lloyd_attempt(points: &DataMatrix, cfg: &KMeansConfig, attempt: u64) -> Option<KMeansResult> {
    let n = points.n_rows();
    let k = cfg.k;
    let mut rng = rng::stream(cfg.seed, &[attempt]);
    let mut centers: Vec<Vec<f64>> = index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| points.row(i).to_vec())
        .collect();

    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0; n];
    assign(points, &centers, &mut labels, &mut dist);
    if !repair_empty(points, k, &mut centers, &mut labels, &mut dist) {
        return None;
    }

    let mut trace = Vec::new();
    let mut next = labels.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        centers = means(points, k, &labels);
        trace.push(inertia(points, &centers, &labels));
        assign(points, &centers, &mut next, &mut dist);
        if !repair_empty(points, k, &mut centers, &mut next, &mut dist) {
            return None;
        }
        if next == labels {
            converged = true;
            break;
        }
        std::mem::swap(&mut labels, &mut next);
    }
    if !converged {
        centers = means(points, k, &labels);
        trace.push(inertia(points, &centers, &labels));
    }
    let inertia = *trace.last().expect("at least one iteration");
    Some(KMeansResult {
        partition: Partition::new(labels, k).ok()?,
        centers,
        inertia,
        iterations,
        converged,
        trace,
    })
}

/// Best of `restarts` independent Lloyd runs by within-cluster sum of squares.
pub fn kmeans_best_of(
    points: &DataMatrix,
    cfg: &KMeansConfig,
    restarts: usize,
) -> Result<KMeansResult, KMeansError> {
    let mut best: Option<KMeansResult> = None;
    let mut last_err = None;
    for r in 0..restarts.max(1) {
        let run_cfg = KMeansConfig {
            seed: rng::derive_seed(cfg.seed, &[r as u64]),
            ..*cfg
        };
        match lloyd_kmeans(points, &run_cfg) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart ran"))
}

/// KM baseline: independent k-means on the rows and on the columns.
pub fn separate_kmeans(
    x: &DataMatrix,
    cfg: &KMeansConfig,
    restarts: usize,
) -> Result<(Partition, Partition), KMeansError> {
    let rows = kmeans_best_of(
        x,
        &KMeansConfig {
            seed: rng::derive_seed(cfg.seed, &[0]),
            ..*cfg
        },
        restarts,
    )?;
    let cols = kmeans_best_of(
        &x.transpose(),
        &KMeansConfig {
            seed: rng::derive_seed(cfg.seed, &[1]),
            ..*cfg
        },
        restarts,
    )?;
    Ok((rows.partition, cols.partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> DataMatrix {
        DataMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    /// Minimum within-cluster sum of squares over every labeling.
    fn brute_force_wcss(points: &DataMatrix, k: usize) -> f64 {
        let n = points.n_rows();
        (0..n)
            .map(|_| 0..k)
            .multi_cartesian_product()
            .filter_map(|labels| {
                let p = Partition::new(labels, k).ok()?;
                let c = means(points, k, p.labels());
                Some(inertia(points, &c, p.labels()))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn separates_two_groups() {
        let pts = column(&[0.0, 0.1, 10.0, 10.1]);
        let res = lloyd_kmeans(&pts, &KMeansConfig::new(2, 3)).unwrap();
        let l = res.partition.labels();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
        let oracle = brute_force_wcss(&pts, 2);
        assert!((res.inertia - oracle).abs() < 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = DataMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]]).unwrap();
        let res = lloyd_kmeans(&pts, &KMeansConfig::new(1, 0)).unwrap();
        assert_eq!(res.partition.labels(), &[0, 0, 0]);
        assert_eq!(res.centers, vec![vec![2.0, 4.0]]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = column(&[3.0, -1.0, 7.5, 2.0, 0.0]);
        let res = lloyd_kmeans(&pts, &KMeansConfig::new(5, 11)).unwrap();
        assert_eq!(res.partition.sizes(), vec![1; 5]);
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = column(&[1.0, 1.0, 1.0, 1.0]);
        let res = lloyd_kmeans(&pts, &KMeansConfig::new(3, 5)).unwrap();
        assert_eq!(res.partition.k(), 3);
    }

    #[test]
    fn errors() {
        let pts = column(&[1.0, 2.0]);
        assert_eq!(
            lloyd_kmeans(&pts, &KMeansConfig::new(3, 0)),
            Err(KMeansError::TooFewPoints { k: 3, points: 2 })
        );
        assert_eq!(
            lloyd_kmeans(&pts, &KMeansConfig::new(0, 0)),
            Err(KMeansError::ZeroClusters)
        );
        let cfg = KMeansConfig {
            max_iters: 0,
            ..KMeansConfig::new(1, 0)
        };
        assert_eq!(lloyd_kmeans(&pts, &cfg), Err(KMeansError::ZeroIterations));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let pts = column(&(0..40).map(|i| (i * i % 17) as f64).collect::<Vec<_>>());
        let cfg = KMeansConfig {
            max_iters: 1,
            ..KMeansConfig::new(4, 9)
        };
        let res = lloyd_kmeans(&pts, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
    }

    proptest! {
        #[test]
        fn lloyd_is_deterministic_monotone_and_valid(
            values in prop::collection::vec(-10.0f64..10.0, 6..30),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let n = values.len() / 2;
            let pts = DataMatrix::new(n, 2, values[..2 * n].to_vec()).unwrap();
            let k = k.min(n);
            let cfg = KMeansConfig::new(k, seed);
            let a = lloyd_kmeans(&pts, &cfg).unwrap();
            let b = lloyd_kmeans(&pts, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.partition.sizes().iter().filter(|&&s| s > 0).count(), k);
            for w in a.trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
            }
        }
    }
}
