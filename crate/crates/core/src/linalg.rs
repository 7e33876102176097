//! Small dense kernels with a fixed summation order.
//!
//! Everything that feeds the training loop goes through these loops rather
//! than a BLAS-style backend so that results do not depend on runtime CPU
//! feature detection. Golden metric files rely on this.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// `a · b` for `a: n×k`, `b: k×m`.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimension");
    let (n, k) = a.dim();
    let m = b.ncols();
    let mut out = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let mut row = out.row_mut(i);
        for p in 0..k {
            let aip = a[[i, p]];
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(b.row(p).iter()) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// `aᵀ · b` for `a: k×n`, `b: k×m`.
pub fn matmul_tn(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows(), "matmul_tn inner dimension");
    let (k, n) = a.dim();
    let m = b.ncols();
    let mut out = Array2::<f64>::zeros((n, m));
    for p in 0..k {
        let brow = b.row(p);
        for i in 0..n {
            let api = a[[p, i]];
            if api == 0.0 {
                continue;
            }
            for (o, &bv) in out.row_mut(i).iter_mut().zip(brow.iter()) {
                *o += api * bv;
            }
        }
    }
    out
}

/// `a · bᵀ` for `a: n×k`, `b: m×k`.
pub fn matmul_nt(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.ncols(), "matmul_nt inner dimension");
    let n = a.nrows();
    let m = b.nrows();
    let mut out = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let ar = a.row(i);
        for j in 0..m {
            out[[i, j]] = dot(ar, b.row(j));
        }
    }
    out
}

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`,
/// computed from differences (not the expanded `|a|² + |b|² − 2ab` form) so
/// that identical rows give exactly zero.
pub fn pairwise_sq_dist(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.ncols(), "pairwise_sq_dist dimension");
    let mut out = Array2::<f64>::zeros((a.nrows(), b.nrows()));
    for (i, ar) in a.outer_iter().enumerate() {
        for (j, br) in b.outer_iter().enumerate() {
            out[[i, j]] = ar
                .iter()
                .zip(br.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
        }
    }
    out
}

/// Numerically stable `log Σ exp(x)`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values
        .clone()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let lse = log_sum_exp(row.iter().copied());
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Row-wise softmax with max-shift.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s: f64 = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

pub fn row_sums(m: ArrayView2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(1))
}

pub fn col_sums(m: ArrayView2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(0))
}

/// Frobenius norm of `a − b`.
pub fn frobenius_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn one_hot(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        out[[i, l]] = 1.0;
    }
    out
}
