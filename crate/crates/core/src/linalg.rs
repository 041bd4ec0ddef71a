//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Condition number above which a Hermitian positive-definite system is
/// rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `a bᴴ`
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// `Re(vᴴ M v)`
pub fn quad_form(v: &CVec, m: &CMat) -> f64 {
    v.dotc(&(m * v)).re
}

/// `Re(aᴴ b)`
pub fn inner_re(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).re
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Largest absolute entry of `M - Mᴴ`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Eigenvalues of a Hermitian matrix, sorted in descending order.
pub fn eigenvalues_desc(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigenvalues_desc(m).last().copied().unwrap_or(0.0)
}

/// `λ₂/λ₁` of a PSD matrix (0 for a zero or 1×1 matrix).
pub fn rank_one_ratio(m: &CMat) -> f64 {
    let ev = eigenvalues_desc(m);
    if ev.len() < 2 || ev[0] <= 0.0 {
        return 0.0;
    }
    ev[1].max(0.0) / ev[0]
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Cholesky factor of a Hermitian positive-definite matrix, guarded by the
/// condition number.
#[derive(Clone, Debug)]
pub struct HpdFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HpdFactor {
    pub fn new(m: &CMat) -> Result<Self> {
        let m = hermitian_part(m);
        let ev = m.clone().symmetric_eigenvalues();
        let max = ev.iter().copied().fold(f64::MIN, f64::max);
        let min = ev.iter().copied().fold(f64::MAX, f64::min);
        if !(min > 0.0) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let cond = max / min;
        if cond > CONDITION_LIMIT {
            return Err(Error::IllConditioned(cond));
        }
        let chol = Cholesky::new(m).ok_or(Error::IllConditioned(f64::INFINITY))?;
        Ok(Self { chol })
    }

    /// `M⁻¹ b`
    pub fn solve(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }

    /// `bᴴ M⁻¹ b`
    pub fn inv_quad(&self, b: &CVec) -> f64 {
        b.dotc(&self.solve(b)).re
    }

    pub fn inverse(&self) -> CMat {
        self.chol.inverse()
    }
}

/// `Σ w_i v_i v_iᴴ`
pub fn weighted_gram<'a>(n: usize, terms: impl IntoIterator<Item = (f64, &'a CVec)>) -> CMat {
    let mut acc = CMat::zeros(n, n);
    for (w, v) in terms {
        if w != 0.0 {
            acc += outer(v, v) * cr(w);
        }
    }
    acc
}
