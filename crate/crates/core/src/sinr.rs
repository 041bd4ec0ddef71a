//! SINR algebra of the full-duplex link: transmit covariance, radar / uplink /
//! downlink SINRs, the closed-form MMSE-type receivers and beampattern gain.
//!
//! All expectations over data symbols are taken in closed form through the
//! transmit covariance `Q = Σ v_l v_lᴴ + V₀`.

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_defect, min_eigenvalue, outer, quad_form, CMat, CVec, HpdFactor};
use crate::scenario::{effective_matrix, interference_channels, steering_rx, steering_tx, PointScatterer, Scenario};

/// Transmit side of a design: downlink beams, dedicated radar covariance and
/// uplink user powers.
#[derive(Debug, Clone, PartialEq)]
pub struct TxDesign {
    pub dl_beams: Vec<CVec>,
    pub radar_cov: CMat,
    pub ul_powers: Vec<f64>,
}

/// Receive combiners at the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct RxDesign {
    pub radar_rx: CVec,
    pub ul_rx: Vec<CVec>,
}

/// Achieved SINRs, linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub radar: f64,
    pub uplink: Vec<f64>,
    pub downlink: Vec<f64>,
}

impl TxDesign {
    pub fn validate(&self) -> Result<()> {
        let scale = self.radar_cov.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        if hermitian_defect(&self.radar_cov) > 1e-10 * scale.max(1.0) {
            return Err(Error::InvalidInput("radar covariance is not Hermitian".into()));
        }
        if min_eigenvalue(&self.radar_cov) < -1e-9 * scale.max(1.0) {
            return Err(Error::InvalidInput("radar covariance is not PSD".into()));
        }
        if self.ul_powers.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidInput("uplink powers must be nonnegative".into()));
        }
        Ok(())
    }

    /// `Σ‖v_l‖² + Tr(V₀)`
    pub fn bs_power(&self) -> f64 {
        self.dl_beams.iter().map(|v| v.norm_squared()).sum::<f64>() + self.radar_cov.trace().re
    }

    pub fn total_power(&self) -> f64 {
        self.bs_power() + self.ul_powers.iter().sum::<f64>()
    }
}

impl SinrReport {
    pub fn sum_rate(&self) -> f64 {
        self.uplink.iter().chain(&self.downlink).map(|g| (1.0 + g).log2()).sum()
    }

    /// Smallest achieved/required ratio over every constraint family.
    pub fn min_margin(&self, tau_rad: Option<f64>, tau_ul: &[f64], tau_dl: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        if let Some(t) = tau_rad {
            m = m.min(self.radar / t);
        }
        for (g, t) in self.uplink.iter().zip(tau_ul).chain(self.downlink.iter().zip(tau_dl)) {
            m = m.min(g / t);
        }
        m
    }
}

/// `Q = Σ v_l v_lᴴ + V₀`
pub fn tx_covariance(tx: &TxDesign) -> CMat {
    let mut q = tx.radar_cov.clone();
    for v in &tx.dl_beams {
        q += outer(v, v);
    }
    q
}

/// `Σ p_k h_k h_kᴴ` with user `skip` left out.
pub(crate) fn uplink_gram(scenario: &Scenario, powers: &[f64], skip: Option<usize>) -> CMat {
    let n = scenario.n_rx();
    let mut m = CMat::zeros(n, n);
    for (k, (h, &p)) in scenario.uplink_channels.iter().zip(powers).enumerate() {
        if Some(k) != skip && p != 0.0 {
            m += outer(h, h) * cr(p);
        }
    }
    m
}

fn add_noise(mut m: CMat, noise: f64) -> CMat {
    for i in 0..m.nrows() {
        m[(i, i)] += cr(noise);
    }
    m
}

/// Radar interference-plus-noise covariance `Σ p_k h_k h_kᴴ + B Q Bᴴ + σ_r² I`.
pub fn radar_interference(scenario: &Scenario, q: &CMat, powers: &[f64]) -> CMat {
    let (b, _) = interference_channels(scenario);
    add_noise(uplink_gram(scenario, powers, None) + &b * q * b.adjoint(), scenario.noise_rx)
}

/// Uplink interference-plus-noise covariance for user `k`:
/// `Σ_{k'≠k} p_k' h_k' h_k'ᴴ + C Q Cᴴ + σ_r² I`.
pub fn uplink_interference(scenario: &Scenario, k: usize, q: &CMat, powers: &[f64]) -> CMat {
    let (_, cm) = interference_channels(scenario);
    add_noise(uplink_gram(scenario, powers, Some(k)) + &cm * q * cm.adjoint(), scenario.noise_rx)
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Degenerate(format!("{what} denominator is not positive")));
    }
    Ok((num / den).max(0.0))
}

/// `γ^rad = |β₀|² uᴴ A(θ₀) Q A(θ₀)ᴴ u / uᴴ R u`.
pub fn radar_sinr(tx: &TxDesign, rx: &RxDesign, scenario: &Scenario) -> Result<f64> {
    let q = tx_covariance(tx);
    let u = &rx.radar_rx;
    let a0 = effective_matrix(&scenario.target, &scenario.geometry);
    let num = scenario.target.power_gain * quad_form(&(a0.adjoint() * u), &q);
    let den = quad_form(u, &radar_interference(scenario, &q, &tx.ul_powers));
    ratio(num, den, "radar SINR")
}

pub fn uplink_sinr(k: usize, tx: &TxDesign, rx: &RxDesign, scenario: &Scenario) -> Result<f64> {
    let q = tx_covariance(tx);
    let w = &rx.ul_rx[k];
    let h = &scenario.uplink_channels[k];
    let num = tx.ul_powers[k] * w.dotc(h).norm_sqr();
    let den = quad_form(w, &uplink_interference(scenario, k, &q, &tx.ul_powers));
    ratio(num, den, "uplink SINR")
}

/// Downlink SINR of user `l`; the dedicated radar signal is interference.
pub fn downlink_sinr(l: usize, tx: &TxDesign, scenario: &Scenario) -> Result<f64> {
    let g = &scenario.downlink_channels[l];
    let mut num = 0.0;
    let mut den = quad_form(g, &tx.radar_cov) + scenario.noise_dl[l];
    for (i, v) in tx.dl_beams.iter().enumerate() {
        let p = g.dotc(v).norm_sqr();
        if i == l {
            num = p;
        } else {
            den += p;
        }
    }
    ratio(num, den, "downlink SINR")
}

/// `u* = R⁻¹ a_r(θ₀)`
pub fn optimal_radar_rx(tx: &TxDesign, scenario: &Scenario) -> Result<CVec> {
    let q = tx_covariance(tx);
    let f = HpdFactor::new(&radar_interference(scenario, &q, &tx.ul_powers))?;
    Ok(f.solve(&scenario.target_rx_steering()))
}

/// `w_k* = R_k⁻¹ h_k`
pub fn optimal_uplink_rx(k: usize, tx: &TxDesign, scenario: &Scenario) -> Result<CVec> {
    let q = tx_covariance(tx);
    let f = HpdFactor::new(&uplink_interference(scenario, k, &q, &tx.ul_powers))?;
    Ok(f.solve(&scenario.uplink_channels[k]))
}

pub fn optimal_rx(tx: &TxDesign, scenario: &Scenario) -> Result<RxDesign> {
    Ok(RxDesign {
        radar_rx: optimal_radar_rx(tx, scenario)?,
        ul_rx: (0..scenario.k()).map(|k| optimal_uplink_rx(k, tx, scenario)).collect::<Result<_>>()?,
    })
}

/// Radar SINR at the optimal receiver, as a function of `(Q, p)` only.
pub fn reduced_radar_sinr_q(scenario: &Scenario, q: &CMat, powers: &[f64]) -> Result<f64> {
    let at = scenario.target_tx_steering();
    let f = HpdFactor::new(&radar_interference(scenario, q, powers))?;
    Ok(scenario.target.power_gain * quad_form(&at, q).max(0.0) * f.inv_quad(&scenario.target_rx_steering()))
}

pub fn reduced_uplink_sinr_q(scenario: &Scenario, k: usize, q: &CMat, powers: &[f64]) -> Result<f64> {
    let f = HpdFactor::new(&uplink_interference(scenario, k, q, powers))?;
    Ok(powers[k] * f.inv_quad(&scenario.uplink_channels[k]))
}

/// `|β₀|² a_tᴴ Q a_t · a_rᴴ R⁻¹ a_r`
pub fn reduced_radar_sinr(tx: &TxDesign, scenario: &Scenario) -> Result<f64> {
    reduced_radar_sinr_q(scenario, &tx_covariance(tx), &tx.ul_powers)
}

/// `p_k h_kᴴ R_k⁻¹ h_k`
pub fn reduced_uplink_sinr(k: usize, tx: &TxDesign, scenario: &Scenario) -> Result<f64> {
    reduced_uplink_sinr_q(scenario, k, &tx_covariance(tx), &tx.ul_powers)
}

/// SINRs achieved by `tx` at the optimal receivers, together with those
/// receivers.
pub fn evaluate_design(tx: &TxDesign, scenario: &Scenario) -> Result<(RxDesign, SinrReport)> {
    let rx = optimal_rx(tx, scenario)?;
    let report = sinr_report(tx, &rx, scenario)?;
    Ok((rx, report))
}

pub fn sinr_report(tx: &TxDesign, rx: &RxDesign, scenario: &Scenario) -> Result<SinrReport> {
    Ok(SinrReport {
        radar: radar_sinr(tx, rx, scenario)?,
        uplink: (0..scenario.k()).map(|k| uplink_sinr(k, tx, rx, scenario)).collect::<Result<_>>()?,
        downlink: (0..scenario.l()).map(|l| downlink_sinr(l, tx, scenario)).collect::<Result<_>>()?,
    })
}

/// Default beampattern grid: 721 points over [-90°, 90°].
pub fn default_angle_grid() -> Vec<f64> {
    (0..=720).map(|i| -90.0 + 0.25 * i as f64).collect()
}

/// `uᴴ A(θ) Q A(θ)ᴴ u / (σ_r² uᴴu)` for every angle of the grid.
pub fn beampattern_gain(tx: &TxDesign, rx: &RxDesign, scenario: &Scenario, angle_grid: &[f64]) -> Vec<f64> {
    let q = tx_covariance(tx);
    let u = &rx.radar_rx;
    let norm = scenario.noise_rx * u.norm_squared();
    angle_grid
        .iter()
        .map(|&th| {
            let at = steering_tx(&scenario.geometry, th);
            let ar = steering_rx(&scenario.geometry, th);
            let proj = ar.dotc(u).norm_sqr();
            (proj * quad_form(&at, &q)).max(0.0) / norm
        })
        .collect()
}

/// Gain of a single scatterer direction, used by the beampattern tests.
pub fn scatterer_gain(tx: &TxDesign, rx: &RxDesign, scenario: &Scenario, s: &PointScatterer) -> f64 {
    beampattern_gain(tx, rx, scenario, &[s.angle_deg])[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};
    use crate::scenario::{generate_scenario, ArrayGeometry, ScenarioConfig, SiModel};
    use crate::testutil::{random_rx, random_tx};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clean_scenario(k: usize, l: usize) -> Scenario {
        let mut cfg = ScenarioConfig { interferers: vec![], ..Default::default() };
        cfg.si.model = SiModel::None;
        cfg.users.k = k;
        cfg.users.l = l;
        generate_scenario(&cfg).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let g = ArrayGeometry::half_wavelength(4, 4);
        let at = steering_tx(&g, 0.0);
        let tx = TxDesign { dl_beams: vec![], radar_cov: outer(&at, &at) * cr(3.0), ul_powers: vec![] };
        let q = tx_covariance(&tx);
        assert!((q.trace().re - 3.0).abs() < 1e-14);

        let mut e1 = CVec::zeros(4);
        e1[0] = cr(1.0);
        let tx = TxDesign { dl_beams: vec![e1.clone()], radar_cov: CMat::zeros(4, 4), ul_powers: vec![] };
        assert_eq!(tx_covariance(&tx), outer(&e1, &e1));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let tx = random_tx(&mut rng, 6, 3, 2, 1.0);
            assert!((tx_covariance(&tx).trace().re - tx.bs_power()).abs() < 1e-10 * tx.bs_power());
        }
    }

    #[test]
    fn radar_sinr_clean_case() {
        let sc = clean_scenario(0, 0);
        let p = 0.01;
        let at = sc.target_tx_steering();
        let tx = TxDesign { dl_beams: vec![], radar_cov: outer(&at, &at) * cr(p), ul_powers: vec![] };
        let rx = RxDesign { radar_rx: sc.target_rx_steering(), ul_rx: vec![] };
        let expect = sc.target.power_gain * p / sc.noise_rx;
        let got = radar_sinr(&tx, &rx, &sc).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
        assert!((reduced_radar_sinr(&tx, &sc).unwrap() - expect).abs() < 1e-9 * expect);
        let gain = beampattern_gain(&tx, &rx, &sc, &[0.0])[0];
        assert!((gain - p / sc.noise_rx).abs() < 1e-9 * gain);
        // u* is collinear with a_r(θ₀) and scaled by 1/σ².
        let u = optimal_radar_rx(&tx, &sc).unwrap();
        let expect_u = sc.target_rx_steering() * cr(1.0 / sc.noise_rx);
        assert!((u - &expect_u).norm() < 1e-9 * expect_u.norm());
    }

    #[test]
    fn uplink_and_downlink_simple_cases() {
        let sc = clean_scenario(1, 1);
        let nt = sc.n_tx();
        let h = sc.uplink_channels[0].clone();
        let tx = TxDesign { dl_beams: vec![CVec::zeros(nt)], radar_cov: CMat::zeros(nt, nt), ul_powers: vec![2e-3] };
        let rx = RxDesign { radar_rx: sc.target_rx_steering(), ul_rx: vec![h.clone()] };
        let expect = 2e-3 * h.norm_squared() / sc.noise_rx;
        let got = uplink_sinr(0, &tx, &rx, &sc).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect);
        let w = optimal_uplink_rx(0, &tx, &sc).unwrap();
        let cosine = w.dotc(&h).norm() / (w.norm() * h.norm());
        assert!((cosine - 1.0).abs() < 1e-12);
        assert!((reduced_uplink_sinr(0, &tx, &sc).unwrap() - expect).abs() < 1e-9 * expect);

        let zero = TxDesign { ul_powers: vec![0.0], ..tx.clone() };
        assert_eq!(uplink_sinr(0, &zero, &rx, &sc).unwrap(), 0.0);

        let g = sc.downlink_channels[0].clone();
        let v = &g * cr(1e-2 / g.norm());
        let tx = TxDesign { dl_beams: vec![v.clone()], ..tx };
        let expect = g.dotc(&v).norm_sqr() / sc.noise_dl[0];
        assert!((downlink_sinr(0, &tx, &sc).unwrap() - expect).abs() < 1e-10 * expect);

        // orthogonal beam
        let mut o = CVec::zeros(nt);
        o[0] = -g[1].conj();
        o[1] = g[0].conj();
        let tx = TxDesign { dl_beams: vec![o], ..tx };
        assert!(downlink_sinr(0, &tx, &sc).unwrap() < 1e-20);
    }

    #[test]
    fn receiver_scale_invariance_and_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let sc = generate_scenario(&ScenarioConfig { seed, ..Default::default() }).unwrap();
            let tx = random_tx(&mut rng, sc.n_tx(), sc.l(), sc.k(), sc.p_max_bs);
            let (rx, best) = evaluate_design(&tx, &sc).unwrap();
            let scaled = RxDesign {
                radar_rx: &rx.radar_rx * cr(5.0),
                ul_rx: rx.ul_rx.iter().map(|w| w * c(0.0, 3.0)).collect(),
            };
            let again = sinr_report(&tx, &scaled, &sc).unwrap();
            assert!((again.radar - best.radar).abs() <= 1e-12 * best.radar);
            for (a, b) in again.uplink.iter().zip(&best.uplink) {
                assert!((a - b).abs() <= 1e-12 * b);
            }
            for _ in 0..50 {
                let r = random_rx(&mut rng, sc.n_rx(), sc.k());
                let rep = sinr_report(&tx, &r, &sc).unwrap();
                assert!(rep.radar <= best.radar * (1.0 + 1e-12));
                for (a, b) in rep.uplink.iter().zip(&best.uplink) {
                    assert!(*a <= b * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn beampattern_zero_where_covariance_is_blind() {
        let sc = clean_scenario(0, 0);
        let g = sc.geometry;
        // Q spanned by a direction orthogonal to a_t(20°).
        let at = steering_tx(&g, 20.0);
        let mut v = steering_tx(&g, -20.0);
        let proj = at.dotc(&v);
        v -= &at * proj;
        let tx = TxDesign { dl_beams: vec![], radar_cov: outer(&v, &v), ul_powers: vec![] };
        let rx = RxDesign { radar_rx: sc.target_rx_steering(), ul_rx: vec![] };
        let grid = default_angle_grid();
        let peak = beampattern_gain(&tx, &rx, &sc, &grid).into_iter().fold(0.0, f64::max);
        assert!(beampattern_gain(&tx, &rx, &sc, &[20.0])[0] < 1e-12 * peak);
        assert_eq!(grid.len(), 721);
        assert_eq!(grid[360], 0.0);
    }
}
