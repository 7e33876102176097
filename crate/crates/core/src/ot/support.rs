//! Dropping zero-weight support points before solving and re-expanding after.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) struct Support {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    n_rows: usize,
    n_cols: usize,
}

impl Support {
    pub fn of(mu: ArrayView1<f64>, nu: ArrayView1<f64>) -> Self {
        let nz = |w: ArrayView1<f64>| -> Vec<usize> {
            w.iter()
                .enumerate()
                .filter(|(_, &x)| x > 0.0)
                .map(|(i, _)| i)
                .collect()
        };
        Self {
            rows: nz(mu),
            cols: nz(nu),
            n_rows: mu.len(),
            n_cols: nu.len(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.n_rows && self.cols.len() == self.n_cols
    }

    pub fn compact_matrix(&self, m: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn((self.rows.len(), self.cols.len()), |(i, j)| {
            m[[self.rows[i], self.cols[j]]]
        })
    }

    pub fn compact_rows(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.rows.iter().map(|&i| v[i]).collect()
    }

    pub fn compact_cols(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.cols.iter().map(|&j| v[j]).collect()
    }

    pub fn expand(&self, reduced: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (ri, &i) in self.rows.iter().enumerate() {
            for (cj, &j) in self.cols.iter().enumerate() {
                out[[i, j]] = reduced[[ri, cj]];
            }
        }
        out
    }
}
