//! Small dense Cholesky helpers for covariance matrices (row-major, `d × d`).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lower-triangular `L` with `L Lᵀ = a`.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: a.len(),
        });
    }
    for i in 0..d {
        for j in 0..i {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 * (a[i * d + i].abs() + a[j * d + j].abs()) {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * d + i] = libm::sqrt(v);
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L z = b` in place.
pub(crate) fn forward_substitute(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * b[k]).sum();
        b[i] = (b[i] - s) / l[i * d + i];
    }
}

/// `ln det(L Lᵀ)`.
pub(crate) fn log_det(l: &[f64], d: usize) -> f64 {
    2.0 * (0..d).map(|i| libm::log(l[i * d + i])).sum::<f64>()
}

/// `out = L z`.
pub(crate) fn lower_mul(l: &[f64], d: usize, z: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = (0..=i).map(|k| l[i * d + k] * z[k]).sum();
    }
}
