//! Small dense helpers on `ndarray` matrices.

use ndarray::{Array1, Array2, ArrayView2};

/// Largest singular value by power iteration on `WᵀW`.
///
/// Two deterministic start vectors are used and the larger estimate kept, so
/// a start orthogonal to the top singular vector cannot stall the result.
pub fn spectral_norm(w: ArrayView2<f64>) -> f64 {
    let (rows, cols) = w.dim();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows == 1 && cols == 1 {
        return w[[0, 0]].abs();
    }
    let gram = w.t().dot(&w);
    let starts = [
        Array1::from_elem(cols, 1.0),
        Array1::from_iter((0..cols).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 } + i as f64 * 0.1)),
    ];
    starts
        .into_iter()
        .map(|v0| power_iterate(&gram, v0))
        .fold(0.0, f64::max)
        .sqrt()
}

fn power_iterate(gram: &Array2<f64>, mut v: Array1<f64>) -> f64 {
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let next = gram.dot(&v);
        let nrm = next.dot(&next).sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        let est = v.dot(&next);
        v = next / nrm;
        if (est - lambda).abs() <= 1e-15 * est.abs() {
            return est.max(lambda);
        }
        lambda = est;
    }
    lambda
}

/// Max absolute difference of row sums from one.
pub fn row_stochastic_defect(a: ArrayView2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_row_norm(a: ArrayView2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max)
}
