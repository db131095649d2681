use super::{Tensor, TensorError};

/// Compressed sparse row matrix. Column indices within a row are sorted and
/// unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are
    /// summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, TensorError> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(TensorError::Dimension { op: "csr_from_triplets", got: (r, c), expected: (rows, cols) });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("non-empty") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self { rows, cols, indptr, indices, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices of row `r`.
    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.row_indices(r).binary_search(&c) {
            Ok(pos) => self.values[self.indptr[r] + pos],
            Err(_) => 0.0,
        }
    }

    /// Same sparsity pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nnz());
        Self { values, ..self.clone() }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                t.set(r, c, v);
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|r| self.row_indices(r).iter().zip(self.row_values(r)).all(|(&c, &v)| self.get(c, r) == v))
    }

    /// `self * x`.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        if x.rows() != self.cols {
            return Err(TensorError::Dimension { op: "spmm", got: x.shape(), expected: (self.cols, x.cols()) });
        }
        let k = x.cols();
        let mut out = Tensor::zeros(self.rows, k);
        for r in 0..self.rows {
            let orow = out.row_mut(r);
            for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                for (o, &xv) in orow.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `out += self^T * g`, used by the reverse sweep of `spmm`.
    pub(crate) fn spmm_transpose_acc(&self, g: &Tensor, out: &mut Tensor) {
        for r in 0..self.rows {
            let grow = g.row(r);
            for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                for (o, &gv) in out.row_mut(c).iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_sorted_and_merged() {
        let m = CsrMatrix::from_triplets(2, 3, [(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row_indices(1), &[0, 2]);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn out_of_range_triplet() {
        assert!(CsrMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn transpose_accumulate_matches_dense() {
        let m = CsrMatrix::from_triplets(3, 2, [(0, 1, 2.0), (2, 0, -1.0), (1, 1, 0.5)]).unwrap();
        let g = Tensor::from_fn(3, 2, |r, c| (r as f64) - (c as f64) * 0.25);
        let mut out = Tensor::zeros(2, 2);
        m.spmm_transpose_acc(&g, &mut out);
        let expected = m.to_dense().transpose().matmul(&g).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }
}
