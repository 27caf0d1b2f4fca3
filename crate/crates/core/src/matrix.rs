//! Dense matrices, index sets and partitions.
//!
//! Indices are 0-based inside the crate. The 1-based convention used in
//! label files and result documents is handled by the `*_one_based`
//! conversions on [`IndexSet`] and [`Partition`].

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

/// Errors raised while constructing the core data types.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} values for the matrix shape, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("index set must be nonempty")]
    EmptyIndexSet,
    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("index set is not strictly increasing at position {position}")]
    NotIncreasing { position: usize },
    #[error("partition needs k >= 1")]
    ZeroClusters,
    #[error("label {label} at position {position} is outside 1..={k}")]
    LabelOutOfRange { position: usize, label: usize, k: usize },
    #[error("cluster {cluster} of {k} has no members")]
    EmptyCluster { cluster: usize, k: usize },
}

/// Dense `n x m` matrix of finite reals stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(ModelError::EmptyMatrix {
                rows: n_rows,
                cols: n_cols,
            });
        }
        if values.len() != n_rows * n_cols {
            return Err(ModelError::ValueCount {
                expected: n_rows * n_cols,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                row: pos / n_cols,
                col: pos % n_cols,
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ModelError> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(ModelError::RaggedRow {
                    row: i,
                    expected: n_cols,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_cols, values)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Result<Self, ModelError> {
        Self::new(n_rows, n_cols, vec![0.0; n_rows * n_cols])
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_cols)
    }

    /// Row-major view of all entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> DataMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.n_cols {
            values.extend((0..self.n_rows).map(|i| self.get(i, j)));
        }
        DataMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            values,
        }
    }

    /// Sum of squared entries (the squared Frobenius norm).
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn submatrix<'a>(&'a self, rows: &'a IndexSet, cols: &'a IndexSet) -> SubmatrixView<'a> {
        debug_assert!(rows.bound() <= self.n_rows && cols.bound() <= self.n_cols);
        SubmatrixView {
            matrix: self,
            rows: rows.as_slice(),
            cols: cols.as_slice(),
        }
    }

    /// Returns the matrix whose row `i` is `self.row(row_order[i])` and whose
    /// column `j` is column `col_order[j]` of `self`.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> DataMatrix {
        assert_eq!(row_order.len(), self.n_rows);
        assert_eq!(col_order.len(), self.n_cols);
        let mut values = Vec::with_capacity(self.values.len());
        for &r in row_order {
            let row = self.row(r);
            values.extend(col_order.iter().map(|&c| row[c]));
        }
        DataMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values,
        }
    }
}

/// Borrowed view of the rows × columns selection of a [`DataMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct SubmatrixView<'a> {
    matrix: &'a DataMatrix,
    rows: &'a [usize],
    cols: &'a [usize],
}

impl SubmatrixView<'_> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(self.rows[row], self.cols[col])
    }

    pub fn frobenius_sq(&self) -> f64 {
        let mut acc = 0.0;
        for &r in self.rows {
            let row = self.matrix.row(r);
            for &c in self.cols {
                acc += row[c] * row[c];
            }
        }
        acc
    }

    pub fn to_matrix(&self) -> DataMatrix {
        let values = self
            .rows
            .iter()
            .flat_map(|&r| self.cols.iter().map(move |&c| self.matrix.get(r, c)))
            .collect();
        DataMatrix::new(self.rows.len(), self.cols.len(), values)
            .expect("a view of a valid matrix over nonempty index sets is valid")
    }
}

/// Nonempty, strictly increasing set of 0-based indices below `bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, bound: usize) -> Result<Self, ModelError> {
        if indices.is_empty() {
            return Err(ModelError::EmptyIndexSet);
        }
        for (pos, &idx) in indices.iter().enumerate() {
            if idx >= bound {
                return Err(ModelError::IndexOutOfRange { index: idx, bound });
            }
            if pos > 0 && indices[pos - 1] >= idx {
                return Err(ModelError::NotIncreasing { position: pos });
            }
        }
        Ok(Self { indices, bound })
    }

    pub fn from_one_based(indices: &[usize], bound: usize) -> Result<Self, ModelError> {
        let zero = indices
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or(ModelError::IndexOutOfRange { index: 0, bound })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(zero, bound)
    }

    pub fn full(bound: usize) -> Result<Self, ModelError> {
        Self::new((0..bound).collect(), bound)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of the dimension the indices point into.
    pub fn bound(&self) -> usize {
        self.bound
    }
}

/// Subvector of `x` at the positions in `idx`, in index order.
pub fn project(x: &[f64], idx: &IndexSet) -> Vec<f64> {
    assert!(
        idx.bound() <= x.len(),
        "index set bound {} exceeds vector length {}",
        idx.bound(),
        x.len()
    );
    idx.as_slice().iter().map(|&i| x[i]).collect()
}

/// Assignment of `0..len` to `k` nonempty, mutually exclusive groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    k: usize,
    labels: Vec<usize>,
}

impl Partition {
    /// Builds a partition from 0-based labels. Every label in `0..k` must be used.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroClusters);
        }
        let mut used = vec![false; k];
        for (position, &label) in labels.iter().enumerate() {
            if label >= k {
                return Err(ModelError::LabelOutOfRange {
                    position,
                    label: label + 1,
                    k,
                });
            }
            used[label] = true;
        }
        if let Some(cluster) = used.iter().position(|u| !u) {
            return Err(ModelError::EmptyCluster {
                cluster: cluster + 1,
                k,
            });
        }
        Ok(Self { k, labels })
    }

    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self, ModelError> {
        let zero = labels
            .iter()
            .enumerate()
            .map(|(position, &l)| {
                l.checked_sub(1)
                    .ok_or(ModelError::LabelOutOfRange { position, label: l, k })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(zero, k)
    }

    /// Single-cluster partition of `len` items.
    pub fn trivial(len: usize) -> Result<Self, ModelError> {
        Self::new(vec![0; len], 1)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn group(&self, cluster: usize) -> IndexSet {
        let members = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect();
        IndexSet::new(members, self.labels.len()).expect("partition clusters are nonempty")
    }

    pub fn groups(&self) -> Vec<IndexSet> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        members
            .into_iter()
            .map(|m| IndexSet::new(m, self.labels.len()).expect("partition clusters are nonempty"))
            .collect()
    }

    /// Stable hash of `(k, labels)` used to tie center sets to the column
    /// partition they were computed against.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.hash(&mut hasher);
        hasher.finish()
    }

    /// Relabels items after a reordering: item `order[i]` of the original
    /// ground set receives the label of item `i` of `self`.
    pub fn unpermute(&self, order: &[usize]) -> Partition {
        assert_eq!(order.len(), self.labels.len());
        let mut labels = vec![0; self.labels.len()];
        for (i, &orig) in order.iter().enumerate() {
            labels[orig] = self.labels[i];
        }
        Partition { k: self.k, labels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn project_examples() {
        let x = [1.0, 3.0, 4.0, 7.0];
        let idx = IndexSet::from_one_based(&[1, 3], 4).unwrap();
        assert_eq!(project(&x, &idx), vec![1.0, 4.0]);
        let second = IndexSet::from_one_based(&[2, 4], 4).unwrap();
        assert_eq!(project(&x, &second), vec![3.0, 7.0]);
        assert_eq!(project(&x, &IndexSet::full(4).unwrap()), x.to_vec());
        let y = [5.0, 6.0];
        assert_eq!(project(&y, &IndexSet::from_one_based(&[2], 2).unwrap()), vec![6.0]);
    }

    #[test]
    fn transpose_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(x.transpose(), m(&[&[1.0, 3.0], &[2.0, 4.0]]));
        let row = m(&[&[1.0, 2.0, 3.0]]);
        let col = row.transpose();
        assert_eq!((col.n_rows(), col.n_cols()), (3, 1));
        assert_eq!(col.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(DataMatrix::zeros(3, 3).unwrap().frobenius_sq(), 0.0);
        assert_eq!(m(&[&[1.0, 2.0], &[3.0, 4.0]]).frobenius_sq(), 30.0);
        assert_eq!(m(&[&[1.0, 0.0], &[0.0, 1.0]]).frobenius_sq(), 2.0);
    }

    #[test]
    fn submatrix_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let r = IndexSet::from_one_based(&[1], 2).unwrap();
        let c = IndexSet::from_one_based(&[2], 2).unwrap();
        assert_eq!(x.submatrix(&r, &c).to_matrix(), m(&[&[2.0]]));
        let all_r = IndexSet::full(2).unwrap();
        let all_c = IndexSet::full(2).unwrap();
        assert_eq!(x.submatrix(&all_r, &all_c).to_matrix(), x);

        let y = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let r = IndexSet::from_one_based(&[2], 2).unwrap();
        let c = IndexSet::from_one_based(&[1, 3], 3).unwrap();
        let view = y.submatrix(&r, &c);
        assert_eq!(view.to_matrix(), m(&[&[4.0, 6.0]]));
        assert_eq!(view.frobenius_sq(), 52.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DataMatrix::new(0, 2, vec![]),
            Err(ModelError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            DataMatrix::new(2, 2, vec![1.0; 3]),
            Err(ModelError::ValueCount { .. })
        ));
        assert_eq!(
            DataMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]),
            Err(ModelError::NonFinite { row: 1, col: 0 })
        );
        assert!(DataMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(matches!(
            DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(ModelError::RaggedRow { row: 1, .. })
        ));
        assert_eq!(IndexSet::new(vec![], 3), Err(ModelError::EmptyIndexSet));
        assert!(IndexSet::new(vec![0, 3], 3).is_err());
        assert!(IndexSet::new(vec![1, 1], 3).is_err());
        assert!(IndexSet::from_one_based(&[0], 3).is_err());
    }

    #[test]
    fn partition_rejects_unused_label() {
        assert_eq!(
            Partition::new(vec![0, 0, 2], 3),
            Err(ModelError::EmptyCluster { cluster: 2, k: 3 })
        );
        assert!(Partition::new(vec![0, 3], 3).is_err());
        assert!(Partition::new(vec![0], 0).is_err());
        assert!(Partition::from_one_based(&[0, 1], 1).is_err());
        let p = Partition::from_one_based(&[2, 1, 2], 2).unwrap();
        assert_eq!(p.labels(), &[1, 0, 1]);
        assert_eq!(p.to_one_based(), vec![2, 1, 2]);
        assert_eq!(p.sizes(), vec![1, 2]);
        assert_eq!(p.group(1).as_slice(), &[0, 2]);
    }

    #[test]
    fn unpermute_inverts_reordering() {
        // original labels (a,b,c,d) reordered by order=[2,0,3,1]
        let original = Partition::new(vec![0, 1, 1, 0], 2).unwrap();
        let order = [2, 0, 3, 1];
        let reordered =
            Partition::new(order.iter().map(|&o| original.label(o)).collect(), 2).unwrap();
        assert_eq!(reordered.unpermute(&order), original);
    }

    fn arb_matrix() -> impl Strategy<Value = DataMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            prop::collection::vec(-100.0f64..100.0, n * m)
                .prop_map(move |v| DataMatrix::new(n, m, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn double_transpose_is_identity(x in arb_matrix()) {
            prop_assert_eq!(x.transpose().transpose(), x);
        }

        #[test]
        fn frobenius_invariant_under_transpose(x in arb_matrix()) {
            let a = x.frobenius_sq();
            let b = x.transpose().frobenius_sq();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn projection_length_and_identity(
            x in prop::collection::vec(-10.0f64..10.0, 1..10),
            mask in prop::collection::vec(any::<bool>(), 10),
        ) {
            prop_assert_eq!(project(&x, &IndexSet::full(x.len()).unwrap()), x.clone());
            let picked: Vec<usize> = (0..x.len()).filter(|&i| mask[i]).collect();
            if let Ok(idx) = IndexSet::new(picked.clone(), x.len()) {
                let p = project(&x, &idx);
                prop_assert_eq!(p.len(), idx.len());
                for (v, &i) in p.iter().zip(&picked) {
                    prop_assert_eq!(*v, x[i]);
                }
            }
        }

        #[test]
        fn block_tiling_preserves_frobenius(
            x in arb_matrix(),
            row_seed in prop::collection::vec(0usize..3, 6),
            col_seed in prop::collection::vec(0usize..3, 6),
        ) {
            // Any labeling with used labels compacted tiles X into k_r × k_c blocks.
            let compact = |raw: &[usize]| {
                let mut map = std::collections::BTreeMap::new();
                let labels: Vec<usize> = raw.iter().map(|&l| {
                    let next = map.len();
                    *map.entry(l).or_insert(next)
                }).collect();
                Partition::new(labels, map.len()).unwrap()
            };
            let rp = compact(&row_seed[..x.n_rows()]);
            let cp = compact(&col_seed[..x.n_cols()]);
            let mut total = 0.0;
            for rg in rp.groups() {
                for cg in cp.groups() {
                    total += x.submatrix(&rg, &cg).frobenius_sq();
                }
            }
            let full = x.frobenius_sq();
            prop_assert!((total - full).abs() <= 1e-9 * full.max(1.0));
        }
    }
}
