//! Instances and property checks shared by the integration suites.
#![allow(dead_code)]

use fdisac::conic::embed::{embed_hermitian, extract_hermitian, smat, svec, trace_coefficients};
use fdisac::detection::detection_probability;
use fdisac::linalg::{c, cr, frobenius, outer, quad_form, CMat, CVec, HpdFactor};
use fdisac::power_min::{
    phi_matrix, psi_matrix, radar_taylor_bound, sca_power_min, uplink_taylor_bound, PowerMinSpec, ScaOptions, ScaState,
};
use fdisac::rate_max::dl_rate_lower_bound;
use fdisac::scenario::{GeometryConfig, SiModel, UsersConfig};
use fdisac::sinr::{optimal_rx, radar_sinr, uplink_sinr, RxDesign, TxDesign};
use fdisac::special_case::ao_special_case;
use fdisac::{generate_scenario, Error, Scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for _ in 0..rank {
        let v = random_cvec(rng, n);
        m += outer(&v, &v);
    }
    m
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    });
    (&a + a.adjoint()) * cr(0.5)
}

pub fn random_state(rng: &mut ChaCha8Rng, s: &Scenario, scale: f64) -> ScaState {
    ScaState {
        v_blocks: (0..=s.l())
            .map(|_| {
                let rank = rng.gen_range(1..=3);
                random_psd(rng, s.n_tx(), rank) * cr(scale)
            })
            .collect(),
        ul_powers: (0..s.k()).map(|_| rng.gen_range(0.0..scale)).collect(),
        iteration: 0,
        objective_trace: vec![],
    }
}

pub fn random_tx(rng: &mut ChaCha8Rng, s: &Scenario, scale: f64) -> TxDesign {
    TxDesign {
        dl_beams: (0..s.l()).map(|_| random_cvec(rng, s.n_tx()) * cr(scale.sqrt())).collect(),
        radar_cov: random_psd(rng, s.n_tx(), 2) * cr(scale),
        ul_powers: (0..s.k()).map(|_| rng.gen_range(0.0..scale)).collect(),
    }
}

pub fn default_scenario(seed: u64) -> Scenario {
    generate_scenario(&ScenarioConfig { seed, ..Default::default() }).unwrap()
}

pub fn uplink_only(seed: u64) -> Scenario {
    let mut cfg = ScenarioConfig { seed, ..Default::default() };
    cfg.users.l = 0;
    generate_scenario(&cfg).unwrap()
}

/// Four-antenna arrays, two users each way.
pub fn small_scenario(seed: u64) -> Scenario {
    let cfg = ScenarioConfig {
        seed,
        geometry: GeometryConfig { n_tx: 4, n_rx: 4, spacing: 0.5 },
        users: UsersConfig { k: 2, l: 2, ..ScenarioConfig::default().users },
        ..Default::default()
    };
    generate_scenario(&cfg).unwrap()
}

/// Two-antenna arrays, one uplink user, no downlink, no interferers and no
/// self-interference.
pub fn tiny_scenario(seed: u64) -> Scenario {
    let mut cfg = ScenarioConfig {
        seed,
        geometry: GeometryConfig { n_tx: 2, n_rx: 2, spacing: 0.5 },
        interferers: vec![],
        users: UsersConfig { k: 1, l: 0, ..ScenarioConfig::default().users },
        ..Default::default()
    };
    cfg.si.model = SiModel::None;
    generate_scenario(&cfg).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Minimum total power of the tiny instance by exhaustive search over
/// `(P₀, p₁)` with `V₀ = P₀ a_t a_tᴴ/‖a_t‖²`. Without clutter and
/// self-interference both SINRs depend on `V₀` only through
/// `c = |β₀|² a_tᴴV₀a_t`: the radar sees `p h hᴴ + σ²I` and the uplink user
/// sees the target echo `c a_r a_rᴴ + σ²I`. Both inverse quadratic forms use
/// the Sherman-Morrison formula.
pub fn tiny_grid_oracle(s: &Scenario, tau_rad: f64, tau_ul: f64) -> f64 {
    let h = &s.uplink_channels[0];
    let (at, ar) = (s.target_tx_steering(), s.target_rx_steering());
    let sigma2 = s.noise_rx;
    let (hh, ha, aa) = (h.norm_squared(), h.dotc(&ar).norm_sqr(), ar.norm_squared());
    let beta2 = s.target.power_gain;
    let at2 = at.norm_squared();
    let feasible = |p0: f64, p: f64| {
        let c = beta2 * p0 * at2;
        let radar = c * (aa - p * ha / (sigma2 + p * hh)) / sigma2;
        let ul = p * (hh - c * ha / (sigma2 + c * aa)) / sigma2;
        radar >= tau_rad && ul >= tau_ul
    };
    let search = |p0s: &[f64], ps: &[f64]| {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &p in ps {
            for &p0 in p0s {
                if p0 + p < best.0 && feasible(p0, p) {
                    best = (p0 + p, p0, p);
                }
            }
        }
        best
    };
    let coarse: Vec<f64> = (0..=900).map(|i| 10f64.powf(-18.0 + 18.0 * i as f64 / 900.0)).collect();
    let (_, p0, p) = search(&coarse, &coarse);
    let fine = |x: f64| (0..=800).map(|i| x * (0.9 + 0.2 * i as f64 / 800.0)).collect::<Vec<_>>();
    search(&fine(p0), &fine(p)).0
}

/// The first-order bounds of the radar and uplink terms never exceed the
/// exact values, and the downlink rate bound never exceeds the relaxed rate.
pub fn check_taylor_dominance(seed: u64) -> Check {
    let mut r = rng(seed);
    let s = default_scenario(seed % 16).normalized().scenario;
    let scale = r.gen_range(1e-3..1.0);
    let anchor = random_state(&mut r, &s, scale);
    let radar = radar_taylor_bound(&s, &anchor).map_err(|e| e.to_string())?;
    let uplink: Vec<_> = (0..s.k()).map(|k| uplink_taylor_bound(k, &s, &anchor).unwrap()).collect();
    for _ in 0..20 {
        let scale = r.gen_range(1e-3..1.0);
        let st = random_state(&mut r, &s, scale);
        let truth = HpdFactor::new(&psi_matrix(&st, &s)).unwrap().inv_quad(&s.target_rx_steering());
        let bound = radar.eval(&st.v_blocks, &st.ul_powers);
        if bound > truth + 1e-10 * truth {
            return Err(format!("radar bound {bound} above {truth}"));
        }
        for (k, form) in uplink.iter().enumerate() {
            let truth = HpdFactor::new(&phi_matrix(k, &st, &s)).unwrap().inv_quad(&s.uplink_channels[k]);
            let bound = form.eval(&st.v_blocks, &st.ul_powers);
            if bound > truth + 1e-10 * truth {
                return Err(format!("uplink {k} bound {bound} above {truth}"));
            }
        }
        for l in 0..s.l() {
            let g = &s.downlink_channels[l];
            let sig = quad_form(g, &st.v_blocks[l + 1]);
            let total: f64 = st.v_blocks.iter().map(|v| quad_form(g, v)).sum::<f64>() + s.noise_dl[l];
            let truth = (1.0 + sig / (total - sig)).log2();
            let bound = dl_rate_lower_bound(&s, l, &st.v_blocks, &anchor.v_blocks);
            if bound > truth + 1e-10 * truth.abs().max(1.0) {
                return Err(format!("downlink {l} bound {bound} above {truth}"));
            }
        }
    }
    Ok(())
}

fn nonincreasing(trace: &[f64], what: &str) -> Check {
    for (i, w) in trace.windows(2).enumerate() {
        if w[1] > w[0] + 1e-9 * w[0].abs() {
            return Err(format!("{what}: objective rose from {} to {} at iteration {}", w[0], w[1], i + 2));
        }
    }
    Ok(())
}

/// Objective traces of both power algorithms never increase.
pub fn check_sca_monotone(seed: u64) -> Check {
    let opts = ScaOptions::default();
    let s = default_scenario(seed);
    let spec = PowerMinSpec::from_db(s.clone(), 6.0, 5.0, 8.0);
    let trace = match sca_power_min(&spec, &opts) {
        Ok(o) => o.relaxed.objective_trace,
        Err(Error::IterationLimit { best, .. }) => match *best {
            fdisac::error::BestIterate::PowerMin(o) => o.relaxed.objective_trace,
            _ => unreachable!(),
        },
        Err(e) => return Err(format!("power min: {e}")),
    };
    nonincreasing(&trace, "power min")?;
    let s = s.without_downlink();
    let tau = 10f64.powf(0.6);
    let tau_ul = vec![10f64.powf(0.5); s.k()];
    match ao_special_case(&s, tau, &tau_ul, &opts) {
        Ok(o) => nonincreasing(&o.state.objective_trace, "alternating"),
        Err(e) => Err(format!("alternating: {e}")),
    }
}

/// The closed-form receivers beat 1000 random receivers.
pub fn check_receiver_optimality(seed: u64) -> Check {
    let mut r = rng(seed);
    let s = default_scenario(seed % 16).normalized().scenario;
    let scale = r.gen_range(1e-3..1.0);
    let tx = random_tx(&mut r, &s, scale);
    let best = optimal_rx(&tx, &s).map_err(|e| e.to_string())?;
    let radar_best = radar_sinr(&tx, &best, &s).unwrap();
    let ul_best: Vec<f64> = (0..s.k()).map(|k| uplink_sinr(k, &tx, &best, &s).unwrap()).collect();
    for _ in 0..1000 {
        let rx = RxDesign { radar_rx: random_cvec(&mut r, s.n_rx()), ul_rx: (0..s.k()).map(|_| random_cvec(&mut r, s.n_rx())).collect() };
        let g = radar_sinr(&tx, &rx, &s).unwrap();
        if g > radar_best * (1.0 + 1e-9) {
            return Err(format!("random radar receiver {g} beats {radar_best}"));
        }
        for (k, &b) in ul_best.iter().enumerate() {
            let g = uplink_sinr(k, &tx, &rx, &s).unwrap();
            if g > b * (1.0 + 1e-9) {
                return Err(format!("random uplink receiver {k} {g} beats {b}"));
            }
        }
    }
    Ok(())
}

/// SINRs do not change when a receiver is multiplied by a nonzero scalar.
pub fn check_receiver_scale_invariance(seed: u64, re: f64, im: f64) -> Check {
    let mut r = rng(seed);
    let s = default_scenario(seed % 16).normalized().scenario;
    let tx = random_tx(&mut r, &s, 0.1);
    let rx = RxDesign { radar_rx: random_cvec(&mut r, s.n_rx()), ul_rx: (0..s.k()).map(|_| random_cvec(&mut r, s.n_rx())).collect() };
    let k = c(re, im);
    let scaled = RxDesign { radar_rx: &rx.radar_rx * k, ul_rx: rx.ul_rx.iter().map(|w| w * k).collect() };
    let (a, b) = (radar_sinr(&tx, &rx, &s).unwrap(), radar_sinr(&tx, &scaled, &s).unwrap());
    if rel(b, a) > 1e-10 {
        return Err(format!("radar SINR {a} became {b} under scaling by {k}"));
    }
    for kk in 0..s.k() {
        let (a, b) = (uplink_sinr(kk, &tx, &rx, &s).unwrap(), uplink_sinr(kk, &tx, &scaled, &s).unwrap());
        if rel(b, a) > 1e-10 {
            return Err(format!("uplink {kk} SINR {a} became {b} under scaling by {k}"));
        }
    }
    Ok(())
}

/// Hermitian ↔ real embedding, triangular storage and trace weights.
pub fn check_embedding_round_trip(seed: u64, n: usize) -> Check {
    let mut r = rng(seed);
    let h = random_hermitian(&mut r, n);
    let x = embed_hermitian(&h).map_err(|e| e.to_string())?;
    let back = extract_hermitian(&x);
    if frobenius(&(&back - &h)) > 1e-12 * frobenius(&h) {
        return Err("extract(embed(H)) differs from H".into());
    }
    let v = svec(&x);
    if (smat(&v, 2 * n) - &x).norm() > 1e-12 * x.norm() {
        return Err("smat(svec(X)) differs from X".into());
    }
    let y = embed_hermitian(&random_hermitian(&mut r, n)).unwrap();
    let inner: f64 = svec(&y).iter().zip(&v).map(|(a, b)| a * b).sum();
    if (inner - y.dot(&x)).abs() > 1e-10 * (y.norm() * x.norm()) {
        return Err("svec inner product is not the Frobenius inner product".into());
    }
    let m = random_hermitian(&mut r, n);
    let w: f64 = trace_coefficients(&m).iter().zip(&v).map(|(a, b)| a * b).sum();
    let direct = (&m * &h).trace().re;
    if (w - direct).abs() > 1e-10 * (frobenius(&m) * frobenius(&h)) {
        return Err(format!("trace weights give {w}, direct trace {direct}"));
    }
    Ok(())
}

/// `P_d` is nondecreasing in SINR and in `p_fa`, and `P_d(0, p_fa) = p_fa`.
pub fn check_roc(sinrs_db: &[f64], p_fas: &[f64]) -> Check {
    let mut sinrs = sinrs_db.to_vec();
    let mut pfas = p_fas.to_vec();
    sinrs.sort_by(f64::total_cmp);
    pfas.sort_by(f64::total_cmp);
    for &p in &pfas {
        let at_zero = detection_probability(0.0, p).map_err(|e| e.to_string())?;
        if (at_zero - p).abs() > 1e-12 * p + 1e-15 {
            return Err(format!("P_d(0, {p}) = {at_zero}"));
        }
    }
    let pd = |s: f64, p: f64| detection_probability(10f64.powf(s / 10.0), p).unwrap();
    for &p in &pfas {
        for w in sinrs.windows(2) {
            if pd(w[1], p) < pd(w[0], p) - 1e-12 {
                return Err(format!("P_d fell from {} dB to {} dB at p_fa {p}", w[0], w[1]));
            }
        }
    }
    for &s in &sinrs {
        for w in pfas.windows(2) {
            if pd(s, w[1]) < pd(s, w[0]) - 1e-12 {
                return Err(format!("P_d fell from p_fa {} to {} at {s} dB", w[0], w[1]));
            }
        }
    }
    Ok(())
}
