use nalgebra::DMatrix;

/// Symmetric sparse matrix in compressed row storage.
///
/// Both triangles are stored, so rows double as columns and products never
/// need to special-case the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Sums duplicate entries. The caller supplies both `(i, j)` and `(j, i)`.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            assert!(i < dim && j < dim, "entry ({i}, {j}) outside a {dim}x{dim} matrix");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix { dim, row_ptr, cols, vals }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    /// `self + s * other` on the union of patterns.
    pub fn add_scaled(&self, s: f64, other: &SparseSymMatrix) -> SparseSymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut e = self.triplets();
        e.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, s * v)));
        Self::from_triplets(self.dim, e)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    /// Principal submatrix on `idx` (in that order).
    pub fn principal(&self, idx: &[usize]) -> SparseSymMatrix {
        let pos = self.positions(idx);
        let mut e = Vec::new();
        for (a, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if let Some(b) = pos[j] {
                    e.push((a, b, v));
                }
            }
        }
        Self::from_triplets(idx.len(), e)
    }

    /// Dense rectangular block `A[rows, cols]`.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let pos = self.positions(cols);
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if let Some(b) = pos[j] {
                    m[(a, b)] += v;
                }
            }
        }
        m
    }

    /// Sparse rectangular block `A[rows, cols]` as per-row entry lists.
    pub fn sparse_block(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<(usize, f64)>> {
        let pos = self.positions(cols);
        rows.iter()
            .map(|&i| self.row(i).filter_map(|(j, v)| pos[j].map(|b| (b, v))).collect())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.dim).collect();
        self.dense_block(&all, &all)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .into_iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn positions(&self, idx: &[usize]) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.dim];
        for (a, &i) in idx.iter().enumerate() {
            pos[i] = Some(a);
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![6.0, 2.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn blocks_follow_index_order() {
        let a = SparseSymMatrix::from_triplets(
            3,
            vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 5.0), (2, 0, 5.0)],
        );
        let p = a.principal(&[2, 0]);
        assert_eq!(p.get(0, 0), 3.0);
        assert_eq!(p.get(0, 1), 5.0);
        let d = a.dense_block(&[0], &[2, 1]);
        assert_eq!(d[(0, 0)], 5.0);
        assert_eq!(d[(0, 1)], 0.0);
    }
}
