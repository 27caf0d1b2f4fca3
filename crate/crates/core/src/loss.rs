//! Dimensionality-normalized residuals, the empirical clustering risk and
//! its penalized variant.

use crate::matrix::{DataMatrix, ModelError, Partition};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("dn norm of an empty vector is undefined")]
    EmptyVector,
    #[error("center set was built against a different column partition")]
    PartitionMismatch,
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lambda must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `||v||^2 / len(v)`.
pub fn dn_norm_sq(v: &[f64]) -> Result<f64, LossError> {
    if v.is_empty() {
        return Err(LossError::EmptyVector);
    }
    Ok(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// One center per bicluster; center `j` lives on column group `j` of the
/// column partition it was built against.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    centers: Vec<Vec<f64>>,
    partition_tag: u64,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>, cols: &Partition) -> Result<Self, LossError> {
        if centers.len() != cols.k() {
            return Err(LossError::Shape {
                what: "number of centers",
                expected: cols.k(),
                got: centers.len(),
            });
        }
        for (center, size) in centers.iter().zip(cols.sizes()) {
            if center.len() != size {
                return Err(LossError::Shape {
                    what: "center length",
                    expected: size,
                    got: center.len(),
                });
            }
        }
        Ok(Self {
            centers,
            partition_tag: cols.fingerprint(),
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j]
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.centers
    }

    pub fn is_built_for(&self, cols: &Partition) -> bool {
        self.partition_tag == cols.fingerprint()
    }

    /// Lays the ragged centers out along the columns: entry `c` is the
    /// coordinate of center `cols[c]` that corresponds to column `c`.
    pub(crate) fn spread(&self, cols: &Partition) -> Vec<f64> {
        let mut cursor = vec![0usize; self.k()];
        cols.labels()
            .iter()
            .map(|&g| {
                let v = self.centers[g][cursor[g]];
                cursor[g] += 1;
                v
            })
            .collect()
    }
}

/// Per-cluster dn distances of one row to every center.
///
/// `spread` is [`CenterSet::spread`], `inv_sizes[j] = 1 / |I_j|`.
#[inline]
pub(crate) fn row_distances(
    row: &[f64],
    col_labels: &[usize],
    spread: &[f64],
    inv_sizes: &[f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|d| *d = 0.0);
    for ((&x, &c), &g) in row.iter().zip(spread).zip(col_labels) {
        let r = x - c;
        out[g] += r * r;
    }
    for (d, w) in out.iter_mut().zip(inv_sizes) {
        *d *= w;
    }
}

/// Index and value of the minimum; ties go to the lowest index.
#[inline]
pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

pub(crate) fn inverse_sizes(cols: &Partition) -> Vec<f64> {
    cols.sizes().into_iter().map(|s| 1.0 / s as f64).collect()
}

/// Risk together with the row-wise nearest center.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEvaluation {
    pub risk: f64,
    /// 0-based nearest-center label per row.
    pub labels: Vec<usize>,
    pub distances: Vec<f64>,
}

fn check_centers(x: &DataMatrix, cols: &Partition, centers: &CenterSet) -> Result<(), LossError> {
    if cols.len() != x.n_cols() {
        return Err(LossError::Shape {
            what: "column partition length",
            expected: x.n_cols(),
            got: cols.len(),
        });
    }
    if !centers.is_built_for(cols) {
        return Err(LossError::PartitionMismatch);
    }
    Ok(())
}

pub fn evaluate_risk(
    x: &DataMatrix,
    cols: &Partition,
    centers: &CenterSet,
) -> Result<RiskEvaluation, LossError> {
    check_centers(x, cols, centers)?;
    let spread = centers.spread(cols);
    let inv = inverse_sizes(cols);
    let mut scratch = vec![0.0; cols.k()];
    let mut labels = Vec::with_capacity(x.n_rows());
    let mut distances = Vec::with_capacity(x.n_rows());
    let mut total = 0.0;
    for row in x.rows() {
        row_distances(row, cols.labels(), &spread, &inv, &mut scratch);
        let (j, d) = argmin(&scratch);
        labels.push(j);
        distances.push(d);
        total += d;
    }
    Ok(RiskEvaluation {
        risk: total / x.n_rows() as f64,
        labels,
        distances,
    })
}

/// Mean over rows of the smallest dn residual to any center on its column group.
pub fn empirical_risk(
    x: &DataMatrix,
    cols: &Partition,
    centers: &CenterSet,
) -> Result<f64, LossError> {
    evaluate_risk(x, cols, centers).map(|e| e.risk)
}

/// Squared Frobenius norm of every bicluster submatrix `X[J_j, I_j]`.
pub fn bicluster_norms(x: &DataMatrix, rows: &Partition, cols: &Partition) -> Vec<f64> {
    let mut norms = vec![0.0; rows.k()];
    for (i, row) in x.rows().enumerate() {
        let g = rows.label(i);
        for (v, &cg) in row.iter().zip(cols.labels()) {
            if cg == g {
                norms[g] += v * v;
            }
        }
    }
    norms
}

/// Penalty for the given bicluster norms. The bicluster with the smallest
/// norm is exempt (the noise bicluster); returns `(penalty, noise)`.
pub fn penalty(total_norm: f64, block_norms: &[f64], lambda: f64) -> (f64, Option<usize>) {
    if lambda == 0.0 {
        return (0.0, None);
    }
    let (noise, _) = argmin(block_norms);
    let sum: f64 = block_norms
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != noise)
        .map(|(_, &b)| total_norm / (b + 1.0))
        .sum();
    (lambda * sum, Some(noise))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub risk: f64,
    pub penalty: f64,
    pub total: f64,
    pub lambda: f64,
    /// 0-based label of the unpenalized bicluster; `None` when `lambda == 0`.
    pub noise_bicluster: Option<usize>,
}

impl LossReport {
    pub fn from_parts(risk: f64, total_norm: f64, block_norms: &[f64], lambda: f64) -> Self {
        let (penalty, noise_bicluster) = penalty(total_norm, block_norms, lambda);
        Self {
            risk,
            penalty,
            total: risk + penalty,
            lambda,
            noise_bicluster,
        }
    }
}

pub fn penalized_loss(
    x: &DataMatrix,
    rows: &Partition,
    cols: &Partition,
    centers: &CenterSet,
    lambda: f64,
) -> Result<LossReport, LossError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LossError::BadLambda(lambda));
    }
    if rows.len() != x.n_rows() {
        return Err(LossError::Shape {
            what: "row partition length",
            expected: x.n_rows(),
            got: rows.len(),
        });
    }
    if rows.k() != cols.k() {
        return Err(LossError::Shape {
            what: "row partition k",
            expected: cols.k(),
            got: rows.k(),
        });
    }
    let risk = empirical_risk(x, cols, centers)?;
    let norms = bicluster_norms(x, rows, cols);
    Ok(LossReport::from_parts(risk, x.frobenius_sq(), &norms, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    fn part(one_based: &[usize], k: usize) -> Partition {
        Partition::from_one_based(one_based, k).unwrap()
    }

    #[test]
    fn dn_norm_examples() {
        assert_eq!(dn_norm_sq(&[1.0, 4.0]).unwrap(), 8.5);
        assert_eq!(dn_norm_sq(&[0.0; 7]).unwrap(), 0.0);
        for len in 1..10 {
            let v = vec![-2.5; len];
            assert!((dn_norm_sq(&v).unwrap() - 6.25).abs() < 1e-12);
        }
        assert_eq!(dn_norm_sq(&[]), Err(LossError::EmptyVector));
    }

    #[test]
    fn zero_risk_single_cluster() {
        let x = m(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let cols = Partition::trivial(3).unwrap();
        let c = CenterSet::new(vec![vec![1.0, 2.0, 3.0]], &cols).unwrap();
        assert_eq!(empirical_risk(&x, &cols, &c).unwrap(), 0.0);
    }

    #[test]
    fn two_cluster_risk_examples() {
        let x = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let cols = part(&[1, 2], 2);
        let c = CenterSet::new(vec![vec![1.0], vec![1.0]], &cols).unwrap();
        let eval = evaluate_risk(&x, &cols, &c).unwrap();
        assert_eq!(eval.risk, 0.0);
        assert_eq!(eval.labels, vec![0, 1]);

        let x = m(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let c = CenterSet::new(vec![vec![2.0], vec![1.0]], &cols).unwrap();
        assert_eq!(empirical_risk(&x, &cols, &c).unwrap(), 0.0);
        let c = CenterSet::new(vec![vec![0.0], vec![1.0]], &cols).unwrap();
        assert_eq!(empirical_risk(&x, &cols, &c).unwrap(), 0.5);
    }

    #[test]
    fn risk_ties_break_low() {
        let x = m(&[&[1.0, 1.0]]);
        let cols = part(&[1, 2], 2);
        let c = CenterSet::new(vec![vec![0.0], vec![0.0]], &cols).unwrap();
        assert_eq!(evaluate_risk(&x, &cols, &c).unwrap().labels, vec![0]);
    }

    #[test]
    fn mismatched_centers_rejected() {
        let x = m(&[&[1.0, 0.0, 2.0]]);
        let a = part(&[1, 2, 2], 2);
        let b = part(&[1, 1, 2], 2);
        let c = CenterSet::new(vec![vec![0.0], vec![0.0, 0.0]], &a).unwrap();
        assert_eq!(empirical_risk(&x, &b, &c), Err(LossError::PartitionMismatch));
        assert!(CenterSet::new(vec![vec![0.0]], &a).is_err());
        assert!(CenterSet::new(vec![vec![0.0], vec![0.0]], &a).is_err());
    }

    #[test]
    fn penalized_examples() {
        let x = m(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let rows = part(&[1, 2], 2);
        let cols = part(&[1, 2], 2);
        let c = CenterSet::new(vec![vec![2.0], vec![1.0]], &cols).unwrap();
        let report = penalized_loss(&x, &rows, &cols, &c, 1.0).unwrap();
        assert_eq!(report.risk, 0.0);
        assert_eq!(report.noise_bicluster, Some(1));
        assert_eq!(report.total, 1.0);

        let zero = penalized_loss(&x, &rows, &cols, &c, 0.0).unwrap();
        assert_eq!(zero.penalty, 0.0);
        assert_eq!(zero.noise_bicluster, None);
        assert_eq!(zero.total, zero.risk);

        let one = Partition::trivial(2).unwrap();
        let c1 = CenterSet::new(vec![vec![1.0, 0.5]], &one).unwrap();
        for lambda in [0.0, 0.1, 1.0, 50.0] {
            let r = penalized_loss(&x, &one, &one, &c1, lambda).unwrap();
            assert_eq!(r.penalty, 0.0);
        }
        assert!(matches!(
            penalized_loss(&x, &rows, &cols, &c, -1.0),
            Err(LossError::BadLambda(_))
        ));
    }

    fn arb_state() -> impl Strategy<Value = (DataMatrix, Partition, Partition, CenterSet)> {
        (2usize..6, 2usize..6, 1usize..3).prop_flat_map(|(n, m, k)| {
            (
                prop::collection::vec(-5.0f64..5.0, n * m),
                prop::collection::vec(0..k, n),
                prop::collection::vec(0..k, m),
                prop::collection::vec(-5.0f64..5.0, m),
            )
                .prop_filter_map("labels must use all clusters", move |(v, r, c, cv)| {
                    let x = DataMatrix::new(n, m, v).ok()?;
                    let rows = Partition::new(r, k).ok()?;
                    let cols = Partition::new(c, k).ok()?;
                    let mut centers = vec![Vec::new(); k];
                    for (j, &g) in cols.labels().iter().enumerate() {
                        centers[g].push(cv[j]);
                    }
                    let centers = CenterSet::new(centers, &cols).ok()?;
                    Some((x, rows, cols, centers))
                })
        })
    }

    proptest! {
        #[test]
        fn dn_matches_euclidean(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let euclid = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dn = dn_norm_sq(&v).unwrap();
            let expected = euclid * euclid / v.len() as f64;
            prop_assert!((dn - expected).abs() <= 1e-9 * expected.max(1.0));
        }

        #[test]
        fn risk_nonnegative_and_relabel_invariant((x, rows, cols, c) in arb_state()) {
            let risk = empirical_risk(&x, &cols, &c).unwrap();
            prop_assert!(risk >= 0.0);
            // Reverse the cluster labels on both the column groups and centers.
            let k = cols.k();
            let flipped = Partition::new(cols.labels().iter().map(|l| k - 1 - l).collect(), k).unwrap();
            let mut centers = c.centers().to_vec();
            centers.reverse();
            let c2 = CenterSet::new(centers, &flipped).unwrap();
            let risk2 = empirical_risk(&x, &flipped, &c2).unwrap();
            prop_assert!((risk - risk2).abs() <= 1e-12 * risk.max(1.0));
            let _ = rows;
        }

        #[test]
        fn penalized_monotone_in_lambda((x, rows, cols, c) in arb_state()) {
            let mut prev = f64::NEG_INFINITY;
            for lambda in [0.0, 0.01, 0.1, 1.0, 10.0] {
                let r = penalized_loss(&x, &rows, &cols, &c, lambda).unwrap();
                prop_assert!(r.total >= prev);
                prop_assert!((r.total - (r.risk + r.penalty)).abs() <= 1e-12 * r.total.abs().max(1.0));
                prev = r.total;
            }
        }
    }
}
