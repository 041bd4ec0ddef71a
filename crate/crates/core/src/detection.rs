//! Detection probability of a nonfluctuating point target under a
//! square-law detector, via the first-order Marcum Q-function.

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, linear_to_db};

/// First-order Marcum Q-function `Q₁(a, b)` for `a, b ≥ 0`.
///
/// Uses `Q₁(a, b) = Σ_k Pois(k; a²/2) · P(Pois(b²/2) ≤ k)`, summed over the
/// window around the Poisson mode where the weights are not negligible.
pub fn marcum_q(a: f64, b: f64) -> f64 {
    let x = 0.5 * a * a;
    let y = 0.5 * b * b;
    if y == 0.0 {
        return 1.0;
    }
    if x == 0.0 {
        return (-y).exp();
    }
    let spread = 12.0 * x.sqrt() + 30.0;
    let lo = (x - spread).floor().max(0.0) as u64;
    let hi = (x + spread).ceil() as u64;
    let ln_x = x.ln();
    let mut sum = 0.0;
    for k in lo..=hi {
        let kf = k as f64;
        let w = (-x + kf * ln_x - ln_gamma(kf + 1.0)).exp();
        if w == 0.0 {
            continue;
        }
        sum += w * gamma_ur(kf + 1.0, y);
    }
    sum.clamp(0.0, 1.0)
}

/// `P_d = Q₁(√(2·sinr), √(−2 ln p_fa))`.
pub fn detection_probability(sinr: f64, p_fa: f64) -> Result<f64> {
    if !(sinr >= 0.0) || !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::InvalidInput(format!("detection probability needs sinr ≥ 0 and p_fa in (0,1), got {sinr}, {p_fa}")));
    }
    if sinr.is_infinite() {
        return Ok(1.0);
    }
    Ok(marcum_q((2.0 * sinr).sqrt(), (-2.0 * p_fa.ln()).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub p_fa: f64,
    pub sinr_db: f64,
    pub p_d: f64,
}

/// Log-spaced false-alarm probabilities from `10^lo` to `10^hi`.
pub fn log_pfa_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

/// One row per `(sinr, p_fa)` pair, SINR-major.
pub fn roc_table(sinrs_db: &[f64], p_fas: &[f64]) -> Result<Vec<RocPoint>> {
    let mut out = Vec::with_capacity(sinrs_db.len() * p_fas.len());
    for &s in sinrs_db {
        for &p in p_fas {
            out.push(RocPoint { p_fa: p, sinr_db: s, p_d: detection_probability(db_to_linear(s), p)? });
        }
    }
    Ok(out)
}

/// SINR in dB needed for `p_d` at `p_fa`, by bisection.
pub fn required_sinr_db(p_d: f64, p_fa: f64) -> Result<f64> {
    if !(p_d > p_fa && p_d < 1.0) {
        return Err(Error::InvalidInput("required SINR needs p_fa < p_d < 1".into()));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while detection_probability(hi, p_fa)? < p_d {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if detection_probability(mid, p_fa)? < p_d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(linear_to_db(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// `e^{−z} I₀(z)` from `I₀(z) = (1/π)∫₀^π e^{z cos t} dt`.
    fn i0e(z: f64) -> f64 {
        simpson(|t| (z * (t.cos() - 1.0)).exp(), 0.0, PI, 4000) / PI
    }

    /// `Q₁(a, b) = ∫_b^∞ x e^{−(x²+a²)/2} I₀(ax) dx`
    fn marcum_quadrature(a: f64, b: f64) -> f64 {
        simpson(|x| x * (-0.5 * (x - a) * (x - a)).exp() * i0e(a * x), b, b + a + 40.0, 8000)
    }

    #[test]
    fn matches_quadrature() {
        let sinr = db_to_linear(10.0);
        let (a, b) = ((2.0 * sinr).sqrt(), (-2.0 * 1e-4f64.ln()).sqrt());
        let oracle = marcum_quadrature(a, b);
        assert!((detection_probability(sinr, 1e-4).unwrap() - oracle).abs() < 1e-6, "oracle {oracle}");
        for &(a, b) in &[(0.5, 1.0), (2.0, 3.0), (5.0, 2.0), (1.0, 6.0), (8.0, 9.0)] {
            let o = marcum_quadrature(a, b);
            assert!((marcum_q(a, b) - o).abs() < 1e-6, "Q({a},{b}) {} vs {o}", marcum_q(a, b));
        }
    }

    #[test]
    fn boundary_values() {
        for p in [1e-8, 1e-4, 0.1, 0.5, 0.9] {
            assert!((detection_probability(0.0, p).unwrap() - p).abs() < 1e-12 * p.max(1e-300) + 1e-15);
            assert_eq!(detection_probability(f64::INFINITY, p).unwrap(), 1.0);
            assert!(detection_probability(db_to_linear(40.0), p).unwrap() > 1.0 - 1e-12);
        }
        assert!(detection_probability(-1.0, 0.1).is_err());
        assert!(detection_probability(1.0, 0.0).is_err());
        assert!(detection_probability(1.0, 1.0).is_err());
        assert!(detection_probability(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn large_arguments_do_not_underflow() {
        let q = marcum_q(60.0, 30.0);
        assert!(q > 1.0 - 1e-12 && q <= 1.0);
        assert!(marcum_q(1.0, 40.0) < 1e-300);
    }

    #[test]
    fn required_sinr_inverts() {
        let s = required_sinr_db(0.9, 1e-6).unwrap();
        assert!((detection_probability(db_to_linear(s), 1e-6).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn grid_and_table() {
        let g = log_pfa_grid(-8.0, -1.0, 8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 1e-8).abs() < 1e-20 && (g[7] - 0.1).abs() < 1e-15);
        let t = roc_table(&[0.0, 6.0], &g).unwrap();
        assert_eq!(t.len(), 16);
        assert_eq!(t[8].sinr_db, 6.0);
    }
}
