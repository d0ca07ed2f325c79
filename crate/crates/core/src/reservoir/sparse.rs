use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triples. Duplicates are summed and
    /// explicit zeros are kept.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(u32, u32, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(Error::shape(format!("entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix")));
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut m = Self::zeros(n_rows, n_cols);
        for (r, c, v) in sorted {
            let r = r as usize;
            if m.row_ptr[r + 1] > m.row_ptr[r] && m.col_idx.last() == Some(&c) {
                *m.values.last_mut().unwrap() += v;
                continue;
            }
            m.col_idx.push(c);
            m.values.push(v);
            for p in &mut m.row_ptr[r + 1..] {
                *p += 1;
            }
        }
        Ok(m)
    }

    pub(crate) fn from_raw_rows(n_rows: usize, n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                m.col_idx.push(c);
                m.values.push(v);
            }
            m.row_ptr[r + 1] = m.values.len();
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r as u32, self.col_idx[k], self.values[k]))
        })
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `out += self * x`.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *o += acc;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            d[(r as usize, c as usize)] += v;
        }
        d
    }

    pub fn from_dense(d: &nalgebra::DMatrix<f64>) -> Self {
        let rows = (0..d.nrows())
            .map(|r| (0..d.ncols()).filter(|&c| d[(r, c)] != 0.0).map(|c| (c as u32, d[(r, c)])).collect())
            .collect();
        Self::from_raw_rows(d.nrows(), d.ncols(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        let mut out = vec![0.0; 2];
        m.mul_add(&[1.0, 1.0, 2.0], &mut out);
        assert_eq!(out, vec![2.0, 3.0]);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn dense_roundtrip() {
        let d = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.5, -2.0, 0.0]);
        let m = CsrMatrix::from_dense(&d);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense(), d);
    }
}
