//! Row-list sparse matrices for graph aggregation.

use ndarray::Array2;

/// Sparse square matrix with column-sorted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseMatrix {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Builds from (row, col, value) triplets; duplicate coordinates sum.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of {n}x{n}");
            rows[i].push((j, v));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((last, acc)) if *last == j => *acc += v,
                    _ => merged.push((j, v)),
                }
            }
            *row = merged;
        }
        SparseMatrix { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|pos| self.rows[i][pos].1)
            .unwrap_or(0.0)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v).sum()
    }

    /// Dense row-major copy (testing and small-scale checks).
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Left-multiplies a dense matrix: `(self * x)` where `x` is n-by-d.
    pub fn mat_apply(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "row count mismatch");
        let d = x.ncols();
        let mut out = Array2::zeros((self.n, d));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                for col in 0..d {
                    out[(i, col)] += w * x[(j, col)];
                }
            }
        }
        out
    }

    /// Elementwise mean over the union sparsity pattern: absent entries
    /// count as zero.
    pub fn elementwise_mean(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
        assert_eq!(a.n, b.n, "size mismatch");
        let mut rows = Vec::with_capacity(a.n);
        for i in 0..a.n {
            let (ra, rb) = (&a.rows[i], &b.rows[i]);
            let mut merged = Vec::with_capacity(ra.len().max(rb.len()));
            let (mut p, mut q) = (0, 0);
            while p < ra.len() || q < rb.len() {
                let ja = ra.get(p).map(|&(j, _)| j);
                let jb = rb.get(q).map(|&(j, _)| j);
                match (ja, jb) {
                    (Some(j1), Some(j2)) if j1 == j2 => {
                        merged.push((j1, (ra[p].1 + rb[q].1) / 2.0));
                        p += 1;
                        q += 1;
                    }
                    (Some(j1), Some(j2)) if j1 < j2 => {
                        merged.push((j1, ra[p].1 / 2.0));
                        p += 1;
                    }
                    (Some(_), Some(j2)) => {
                        merged.push((j2, rb[q].1 / 2.0));
                        q += 1;
                    }
                    (Some(j1), None) => {
                        merged.push((j1, ra[p].1 / 2.0));
                        p += 1;
                    }
                    (None, Some(j2)) => {
                        merged.push((j2, rb[q].1 / 2.0));
                        q += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
            rows.push(merged);
        }
        SparseMatrix { n: a.n, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_sum_duplicates_and_sort_columns() {
        let m = SparseMatrix::from_triplets(3, vec![(0, 2, 1.0), (0, 1, 2.0), (0, 2, 0.5)]);
        assert_eq!(m.row(0), &[(1, 2.0), (2, 1.5)]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row_sum(0), 3.5);
    }

    #[test]
    fn mat_apply_matches_dense_product() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 1, 1.0)]);
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let got = m.mat_apply(&x);
        assert_eq!(got, array![[2.0, 3.0], [3.0, 4.0]]);
        assert_eq!(m.to_dense().dot(&x), got);
    }

    #[test]
    fn elementwise_mean_unions_patterns() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 0.4)]);
        let b = SparseMatrix::from_triplets(2, vec![(0, 0, 0.5), (1, 1, 0.8)]);
        let m = SparseMatrix::elementwise_mean(&a, &b);
        assert_eq!(m.get(0, 0), 0.75);
        assert_eq!(m.get(0, 1), 0.2);
        assert_eq!(m.get(1, 1), 0.4);
        assert_eq!(m.nnz(), 3);
    }
}
