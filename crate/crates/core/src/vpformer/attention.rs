use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Additive causal mask: `0` on and below the diagonal, `-inf` above.
pub fn causal_mask(len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(len, len, |i, j| if j <= i { 0.0 } else { f64::NEG_INFINITY })
}

/// Row-wise softmax of `(Q Kᵀ + M) / sqrt(d_k)` applied to `V`.
pub fn masked_attention(q: &DMatrix<f64>, k: &DMatrix<f64>, v: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(attention_weights(q, k, m)? * v_checked(k, v)?)
}

fn v_checked<'a>(k: &DMatrix<f64>, v: &'a DMatrix<f64>) -> Result<&'a DMatrix<f64>> {
    if v.nrows() != k.nrows() {
        return Err(Error::ShapeMismatch(format!("V has {} rows, K has {}", v.nrows(), k.nrows())));
    }
    Ok(v)
}

/// The softmax matrix of [`masked_attention`].
pub fn attention_weights(q: &DMatrix<f64>, k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.ncols() != k.ncols() || q.ncols() == 0 {
        return Err(Error::ShapeMismatch(format!("Q has width {}, K has width {}", q.ncols(), k.ncols())));
    }
    if m.nrows() != q.nrows() || m.ncols() != k.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, scores are {}x{}",
            m.nrows(),
            m.ncols(),
            q.nrows(),
            k.nrows()
        )));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut s = (q * k.transpose() + m) * scale;
    for mut row in s.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ShapeMismatch("mask hides every key of a row".into()));
        }
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        row /= sum;
    }
    Ok(s)
}
