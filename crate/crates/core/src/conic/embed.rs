//! Complex Hermitian ↔ real symmetric embedding and the scaled-triangular
//! storage used for PSD blocks.
//!
//! `svec` stores the upper triangle column by column; entry `(i, j)` with
//! `i ≤ j` lives at `j(j+1)/2 + i` and off-diagonal entries carry a factor
//! `√2`, so that `svec(X)·svec(Y) = ⟨X, Y⟩_F`.

use nalgebra::DMatrix;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_defect, CMat};

pub type RMat = DMatrix<f64>;

/// `[[Re H, -Im H], [Im H, Re H]]`
pub fn embed_hermitian(h: &CMat) -> Result<RMat> {
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !h.is_square() || hermitian_defect(h) > 1e-10 * scale {
        return Err(Error::InvalidInput("matrix is not Hermitian".into()));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &CMat) -> RMat {
    let n = h.nrows();
    RMat::from_fn(2 * n, 2 * n, |r, col| {
        let (i, bi) = (r % n, r / n);
        let (j, bj) = (col % n, col / n);
        let z = h[(i, j)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Inverse of [`embed_hermitian`], symmetrized:
/// `H = (X₁₁ + X₂₂)/2 + j(X₂₁ − X₁₂)/2`.
pub fn extract_hermitian(x: &RMat) -> CMat {
    let n = x.nrows() / 2;
    let h = CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
        let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
        c(re, im)
    });
    (&h + h.adjoint()) * c(0.5, 0.0)
}

pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Storage index of entry `(i, j)` (either order).
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub fn svec(x: &RMat) -> Vec<f64> {
    let m = x.nrows();
    let mut out = vec![0.0; svec_len(m)];
    for j in 0..m {
        for i in 0..=j {
            let v = if i == j { x[(i, i)] } else { SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)]) };
            out[svec_index(i, j)] = v;
        }
    }
    out
}

pub fn smat(v: &[f64], m: usize) -> RMat {
    let mut x = RMat::zeros(m, m);
    for j in 0..m {
        for i in 0..=j {
            let s = v[svec_index(i, j)];
            if i == j {
                x[(i, i)] = s;
            } else {
                x[(i, j)] = s / SQRT_2;
                x[(j, i)] = s / SQRT_2;
            }
        }
    }
    x
}

/// Coefficients `w` on the storage vector of the embedded block such that
/// `w·svec(embed(V)) = Re Tr(M V)` for every Hermitian `V`. Only the
/// Hermitian part of `M` matters.
pub fn trace_coefficients(m: &CMat) -> Vec<f64> {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let e = embed_unchecked(&herm);
    let dim = e.nrows();
    let mut w = vec![0.0; svec_len(dim)];
    for j in 0..dim {
        for i in 0..=j {
            w[svec_index(i, j)] = if i == j { 0.5 * e[(i, i)] } else { e[(i, j)] / SQRT_2 };
        }
    }
    w
}
