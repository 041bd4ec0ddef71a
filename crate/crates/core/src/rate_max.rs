//! Sum-rate maximization by successive convex approximation.
//!
//! Every concave log term of the objective is replaced at each anchor by the
//! harmonic minorant `ln z ≥ ln z₀ + 1 − z₀/z`, written as `w·z ≥ 1` with a
//! rotated cone, so the surrogate stays within nonnegative, second-order and
//! PSD cones. The minorant is tight with matching slope at `z₀`, which keeps
//! the outer loop monotone and leaves its stationary points unchanged.

use std::f64::consts::LOG2_E;
use std::io::Write;
use std::time::Instant;

use crate::conic::{HermVar, LinExpr, Model, ProgramBuilder, SolveStats, VarId};
use crate::error::{BestIterate, ConstraintFamily, Error, Result};
use crate::experiments::fmt_sig;
use crate::linalg::{cr, hermitian_part, outer, quad_form, CMat, HpdFactor};
use crate::power_min::{
    add_radar_subset, converged, phi_matrix, rank_one_extract, relaxed_dl_sinrs, scale_tx, uplink_taylor_bound,
    ScaOptions, ScaState, RADAR_ILLUMINATION_FLOOR_W,
};
use crate::scenario::Scenario;
use crate::sinr::{evaluate_design, reduced_radar_sinr_q, sinr_report, RxDesign, SinrReport, TxDesign};
use crate::units::db_to_linear;

/// Lower bound on the `x_k` anchors.
pub const X_ANCHOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RateMaxSpec {
    pub scenario: Scenario,
    pub tau_rad: f64,
}

impl RateMaxSpec {
    pub fn from_db(scenario: Scenario, tau_rad_db: f64) -> Self {
        Self { scenario, tau_rad: db_to_linear(tau_rad_db) }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.tau_rad > 0.0 && self.tau_rad.is_finite()) {
            return Err(Error::InvalidInput("radar SINR threshold must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Relaxed iterate with the auxiliary uplink variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RateScaState {
    pub v_blocks: Vec<CMat>,
    pub ul_powers: Vec<f64>,
    pub u_aux: Vec<f64>,
    pub x_aux: Vec<f64>,
    pub iteration: usize,
    /// `Σ log₂(1+u_k) + Σ log₂(1+γ̄_l)` after each iteration.
    pub rate_trace: Vec<f64>,
}

impl RateScaState {
    pub fn relaxed(&self) -> ScaState {
        ScaState {
            v_blocks: self.v_blocks.clone(),
            ul_powers: self.ul_powers.clone(),
            iteration: self.iteration,
            objective_trace: Vec::new(),
        }
    }

    pub fn bs_power(&self) -> f64 {
        self.v_blocks.iter().map(|v| v.trace().re).sum()
    }

    fn scaled_powers(&self, k: f64) -> RateScaState {
        RateScaState {
            v_blocks: self.v_blocks.iter().map(|v| v * cr(k)).collect(),
            ul_powers: self.ul_powers.iter().map(|p| p * k).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTraceRow {
    pub iter: usize,
    pub sum_rate: f64,
    pub radar_slack: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RateMaxOutcome {
    /// Last relaxed iterate, powers in watts.
    pub state: RateScaState,
    pub tx: TxDesign,
    pub rx: RxDesign,
    pub report: SinrReport,
    /// Recomputed from the physical SINRs of `tx` and `rx`.
    pub sum_rate: f64,
    pub trace: Vec<RateTraceRow>,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl RateMaxOutcome {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }

    pub fn mean_iteration_ms(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        self.trace.iter().map(|r| r.solve_ms).sum::<f64>() / self.trace.len() as f64
    }
}

/// Concave lower bound of the downlink rate of user `l`, evaluated at
/// `v_blocks` around `anchor_blocks`:
/// `log₂(Σ_{l'} g_lᴴV_{l'}g_l + σ_l²) − r̲_l` with `r̲_l` the tangent of the
/// interference term.
pub fn dl_rate_lower_bound(scenario: &Scenario, l: usize, v_blocks: &[CMat], anchor_blocks: &[CMat]) -> f64 {
    let g = &scenario.downlink_channels[l];
    let noise = scenario.noise_dl[l];
    let interference = |blocks: &[CMat]| -> f64 {
        blocks.iter().enumerate().filter(|(i, _)| *i != l + 1).map(|(_, v)| quad_form(g, v)).sum()
    };
    let total: f64 = v_blocks.iter().map(|v| quad_form(g, v)).sum::<f64>() + noise;
    let i0 = interference(anchor_blocks) + noise;
    let a = i0.log2();
    let r_lin = a + LOG2_E / i0 * (interference(v_blocks) + noise - i0);
    total.log2() - r_lin
}

/// Harmonic minorant of `log₂ z` around `z0`, as a function of `w ≥ 1/z`.
fn log_minorant(z0: f64, w: VarId) -> LinExpr {
    LinExpr::constant(z0.log2() + LOG2_E) + LinExpr::term(w, -LOG2_E * z0)
}

/// Built surrogate and the handles needed to read back an iterate.
#[derive(Debug, Clone)]
pub struct RateSurrogate {
    pub model: Model,
    pub v: Vec<HermVar>,
    pub p: Vec<VarId>,
    pub u: Vec<VarId>,
    pub x: Vec<VarId>,
    pub radar_epigraph: Option<VarId>,
    /// Negated surrogate objective equals this expression's value.
    pub rate: LinExpr,
}

/// Convex surrogate around `anchor` on a normalized scenario. The surrogate
/// minimizes the negated lower bound of the sum rate.
pub fn build_rate_surrogate(
    spec: &RateMaxSpec,
    anchor: &RateScaState,
    include_radar: bool,
    illumination_floor: f64,
) -> Result<RateSurrogate> {
    let s = &spec.scenario;
    let (nt, k_users, l_users) = (s.n_tx(), s.k(), s.l());
    let relaxed = anchor.relaxed();
    let mut b = ProgramBuilder::new();
    let v: Vec<HermVar> = (0..=l_users).map(|_| b.hermitian_psd(nt)).collect();
    let p: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();
    let u: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();
    let x: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();

    let power = Some(ConstraintFamily::Power);
    let mut tr = LinExpr::constant(s.p_max_bs);
    for h in &v {
        tr = tr - h.trace();
    }
    b.geq_zero(tr, power);
    for (k, &pk) in p.iter().enumerate() {
        b.geq_zero(LinExpr::constant(s.p_max_ul[k]) - pk, power);
    }

    let radar_epigraph = if include_radar {
        Some(add_radar_subset(&mut b, s, &relaxed, &v, &p, spec.tau_rad, illumination_floor)?)
    } else {
        None
    };

    let mut rate = LinExpr::zero();
    for k in 0..k_users {
        let tag = Some(ConstraintFamily::Uplink(k));
        let form = uplink_taylor_bound(k, s, &relaxed)?;
        let f0 = form.eval(&relaxed.v_blocks, &relaxed.ul_powers);
        let t = b.free_var();
        b.geq_zero(form.expr(&v, &p) - t, tag);
        let p0 = anchor.ul_powers[k].max(1e-6 * s.p_max_ul[k]);
        b.balanced_product_geq(t.into(), p[k].into(), vec![x[k].into()], f0 / p0, tag);
        let x0 = anchor.x_aux[k].max(X_ANCHOR_FLOOR);
        b.geq_zero(LinExpr::constant(-x0 * x0) + LinExpr::term(x[k], 2.0 * x0) - u[k], tag);

        let w = b.free_var();
        let ratio = (1.0 + anchor.u_aux[k]).powi(-2);
        b.balanced_product_geq(w.into(), LinExpr::constant(1.0) + u[k], vec![LinExpr::constant(1.0)], ratio, tag);
        rate += &log_minorant(1.0 + anchor.u_aux[k], w);
    }

    for (l, g) in s.downlink_channels.iter().enumerate() {
        let tag = Some(ConstraintFamily::Downlink(l));
        let gg = outer(g, g);
        let noise = s.noise_dl[l];
        let mut total = LinExpr::constant(noise);
        let mut interference = LinExpr::constant(noise);
        for (i, h) in v.iter().enumerate() {
            let e = h.trace_with(&gg);
            total += &e;
            if i != l + 1 {
                interference += &e;
            }
        }
        let z0: f64 = anchor.v_blocks.iter().map(|m| quad_form(g, m)).sum::<f64>() + noise;
        let i0: f64 = anchor
            .v_blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != l + 1)
            .map(|(_, m)| quad_form(g, m))
            .sum::<f64>()
            + noise;

        let w = b.free_var();
        b.balanced_product_geq(w.into(), total, vec![LinExpr::constant(1.0)], z0.powi(-2), tag);
        rate += &log_minorant(z0, w);
        let r_lin = LinExpr::constant(i0.log2() - LOG2_E) + interference * (LOG2_E / i0);
        rate = rate - r_lin;
    }

    b.minimize(-rate.clone());
    Ok(RateSurrogate { model: b.build(), v, p, u, x, radar_epigraph, rate })
}

/// Exact uplink ratio `h_kᴴ Φ_k⁻¹ h_k` at a relaxed iterate.
fn uplink_gain(scenario: &Scenario, k: usize, state: &ScaState) -> Result<f64> {
    Ok(HpdFactor::new(&phi_matrix(k, state, scenario))?.inv_quad(&scenario.uplink_channels[k]))
}

/// Equal-split warm start on a normalized scenario.
fn initial_state(s: &Scenario) -> Result<RateScaState> {
    let nt = s.n_tx();
    let mut v_blocks = vec![CMat::identity(nt, nt) * cr(s.p_max_bs / (2.0 * nt as f64))];
    let share = s.p_max_bs / (2.0 * s.l().max(1) as f64);
    for g in &s.downlink_channels {
        let v = g * cr((share / g.norm_squared()).sqrt());
        v_blocks.push(outer(&v, &v));
    }
    let ul_powers: Vec<f64> = s.p_max_ul.iter().map(|p| p / 2.0).collect();
    with_aux(s, v_blocks, ul_powers)
}

/// All BS power on the target, no downlink and uplink power: the fallback
/// anchor when the equal split gives an infeasible first surrogate.
fn radar_focused_state(s: &Scenario) -> Result<RateScaState> {
    let nt = s.n_tx();
    let at = s.target_tx_steering();
    let mut v_blocks = vec![outer(&at, &at) * cr(s.p_max_bs / at.norm_squared())];
    v_blocks.extend((0..s.l()).map(|_| CMat::zeros(nt, nt)));
    with_aux(s, v_blocks, vec![0.0; s.k()])
}

/// `x_k = √(p_k f_k / 2)` and `u_k = x_k²`, strictly inside the uplink rows.
fn with_aux(s: &Scenario, v_blocks: Vec<CMat>, ul_powers: Vec<f64>) -> Result<RateScaState> {
    let mut st = RateScaState {
        v_blocks,
        ul_powers,
        u_aux: Vec::new(),
        x_aux: Vec::new(),
        iteration: 0,
        rate_trace: Vec::new(),
    };
    let relaxed = st.relaxed();
    for k in 0..s.k() {
        let x = (st.ul_powers[k] * uplink_gain(s, k, &relaxed)? / 2.0).sqrt().max(X_ANCHOR_FLOOR);
        st.x_aux.push(x);
        st.u_aux.push(x * x);
    }
    Ok(st)
}

/// True objective of problem with auxiliaries: `Σ log₂(1+u_k) + Σ log₂(1+γ̄_l)`.
pub fn relaxed_rate(s: &Scenario, state: &RateScaState) -> f64 {
    let ul: f64 = state.u_aux.iter().map(|u| (1.0 + u).log2()).sum();
    ul + relaxed_dl_sinrs(s, &state.v_blocks).iter().map(|g| (1.0 + g).log2()).sum::<f64>()
}

pub fn sca_rate_max(spec: &RateMaxSpec, options: &ScaOptions) -> Result<RateMaxOutcome> {
    run_rate_max(spec, options, true)
}

pub(crate) fn run_rate_max(spec: &RateMaxSpec, options: &ScaOptions, include_radar: bool) -> Result<RateMaxOutcome> {
    spec.validate()?;
    let norm = spec.scenario.normalized();
    let unit = norm.power_unit;
    let nspec = RateMaxSpec { scenario: norm.scenario, tau_rad: spec.tau_rad };
    let s = &nspec.scenario;
    let floor = RADAR_ILLUMINATION_FLOOR_W / unit;

    let mut anchor = initial_state(s)?;
    let mut fallback = Some(radar_focused_state(s)?);
    let mut trace = Vec::new();
    let mut stats = SolveStats::default();
    let mut done = false;

    while anchor.iteration < options.max_iters {
        let started = Instant::now();
        let sur = build_rate_surrogate(&nspec, &anchor, include_radar, floor)?;
        let sol = match sur.model.solve_optimal(&options.solver) {
            Ok(sol) => sol,
            Err(Error::Infeasible { .. } | Error::NumericalLimit(_)) if anchor.iteration == 0 && fallback.is_some() => {
                log::debug!("first rate surrogate failed; retrying from a radar-focused anchor");
                anchor = fallback.take().unwrap_or(anchor);
                continue;
            }
            Err(e) => return Err(e),
        };
        stats = sol.stats;
        let m = &sur.model;
        let mut next = RateScaState {
            v_blocks: sur.v.iter().map(|h| hermitian_part(&m.hermitian_value(&sol, h))).collect(),
            ul_powers: sur.p.iter().map(|&v| m.value(&sol, v).max(0.0)).collect(),
            u_aux: sur.u.iter().map(|&v| m.value(&sol, v).max(0.0)).collect(),
            x_aux: sur.x.iter().map(|&v| m.value(&sol, v).max(X_ANCHOR_FLOOR)).collect(),
            iteration: anchor.iteration + 1,
            rate_trace: std::mem::take(&mut anchor.rate_trace),
        };
        next.rate_trace.push(relaxed_rate(s, &next));
        anchor = next;

        let radar_slack = if include_radar {
            reduced_radar_sinr_q(s, &anchor.relaxed().q_bar(), &anchor.ul_powers)
                .map_or(f64::NAN, |g| g / nspec.tau_rad - 1.0)
        } else {
            f64::NAN
        };
        trace.push(RateTraceRow {
            iter: anchor.iteration,
            sum_rate: *anchor.rate_trace.last().unwrap_or(&f64::NAN),
            radar_slack,
            solve_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if converged(&anchor.rate_trace, options.epsilon) {
            done = true;
            break;
        }
    }

    let tx_n = rank_one_extract(&anchor.v_blocks, &anchor.ul_powers, s)?;
    let (rx, _) = evaluate_design(&tx_n, s)?;
    let tx = scale_tx(&tx_n, unit);
    let report = sinr_report(&tx, &rx, &spec.scenario)?;
    let outcome = RateMaxOutcome {
        state: anchor.scaled_powers(unit),
        tx,
        rx,
        sum_rate: report.sum_rate(),
        report,
        trace,
        converged: done,
        kkt_residual: stats.dual_residual,
    };
    if done {
        Ok(outcome)
    } else {
        Err(Error::IterationLimit { iterations: outcome.iterations(), best: Box::new(BestIterate::RateMax(outcome)) })
    }
}

pub fn write_rate_trace_csv<W: Write>(out: W, rows: &[RateTraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "sum_rate_bps_hz", "radar_slack", "solve_ms"])?;
    for r in rows {
        w.write_record([r.iter.to_string(), fmt_sig(r.sum_rate), fmt_sig(r.radar_slack), fmt_sig(r.solve_ms)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConeKind;
    use crate::linalg::{rank_one_ratio, CVec};
    use crate::scenario::{generate_scenario, GeometryConfig, ScenarioConfig, SiModel, UsersConfig};
    use crate::sinr::{beampattern_gain, default_angle_grid};
    use crate::testutil::{random_cvec, random_psd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_dl_rate(s: &Scenario, l: usize, blocks: &[CMat]) -> f64 {
        (1.0 + relaxed_dl_sinrs(s, blocks)[l]).log2()
    }

    #[test]
    fn dl_bound_is_tight_and_global() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap().normalized().scenario;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let blocks = |rng: &mut ChaCha8Rng| -> Vec<CMat> {
            (0..=s.l()).map(|_| random_psd(rng, 8, 2) * cr(rng.gen_range(0.0..0.05))).collect()
        };
        let anchor = blocks(&mut rng);
        for l in 0..s.l() {
            let exact = exact_dl_rate(&s, l, &anchor);
            assert!((dl_rate_lower_bound(&s, l, &anchor, &anchor) - exact).abs() < 1e-12 * exact.max(1.0));
        }
        for _ in 0..1000 {
            let v = blocks(&mut rng);
            for l in 0..s.l() {
                assert!(dl_rate_lower_bound(&s, l, &v, &anchor) <= exact_dl_rate(&s, l, &v) + 1e-12);
            }
        }
    }

    #[test]
    fn dl_bound_exact_without_interference() {
        let mut cfg = ScenarioConfig::default();
        cfg.users = UsersConfig { k: 0, l: 1, ..cfg.users };
        let s = generate_scenario(&cfg).unwrap().normalized().scenario;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let anchor = vec![CMat::zeros(8, 8), random_psd(&mut rng, 8, 1)];
        for _ in 0..20 {
            let v = vec![CMat::zeros(8, 8), random_psd(&mut rng, 8, 3) * cr(rng.gen_range(0.0..10.0))];
            let exact = exact_dl_rate(&s, 0, &v);
            assert!((dl_rate_lower_bound(&s, 0, &v, &anchor) - exact).abs() < 1e-10 * exact.max(1.0));
        }
    }

    #[test]
    fn log_minorant_bounds_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let z0: f64 = rng.gen_range(1e-3..1e3);
            let z: f64 = rng.gen_range(1e-3..1e3);
            let bound = z0.log2() + LOG2_E * (1.0 - z0 / z);
            assert!(bound <= z.log2() + 1e-12 * z.log2().abs().max(1.0));
        }
    }

    #[test]
    fn surrogate_structure_and_anchor_feasibility() {
        let cfg = ScenarioConfig {
            geometry: GeometryConfig { n_tx: 4, n_rx: 4, spacing: 0.5 },
            users: UsersConfig { k: 2, l: 2, ..ScenarioConfig::default().users },
            ..Default::default()
        };
        let s = generate_scenario(&cfg).unwrap().normalized().scenario;
        let spec = RateMaxSpec::from_db(s.clone(), 6.0);
        let anchor = initial_state(&s).unwrap();
        let sur = build_rate_surrogate(&spec, &anchor, true, 1e-12).unwrap();
        let blocks = &sur.model.program.cone_blocks;
        let psd: Vec<_> = blocks.iter().filter(|b| b.kind == ConeKind::PsdReal).collect();
        assert_eq!(psd.len(), 3);
        assert!(psd.iter().all(|b| b.dim == 8));
        // radar product, K uplink products, K + L log minorants
        assert_eq!(blocks.iter().filter(|b| b.kind == ConeKind::SecondOrder).count(), 1 + 2 + 2 + 2);
        let uplink_rows = sur
            .model
            .program
            .eq_tags
            .iter()
            .filter(|t| matches!(t, Some(ConstraintFamily::Uplink(_))))
            .count();
        // per user: f row, 3 product links, u row, 3 log links
        assert_eq!(uplink_rows, 2 * 8);
        sur.model.program.validate().unwrap();
        assert_eq!((sur.u.len(), sur.x.len()), (2, 2));
        assert!(sur.radar_epigraph.is_some());
    }

    #[test]
    fn single_user_capacity() {
        let mut cfg = ScenarioConfig { interferers: vec![], ..Default::default() };
        cfg.si.model = SiModel::None;
        cfg.users = UsersConfig { k: 0, l: 1, ..cfg.users };
        let s = generate_scenario(&cfg).unwrap();
        let g = &s.downlink_channels[0];
        let expect = (1.0 + s.p_max_bs * g.norm_squared() / s.noise_dl[0]).log2();
        let out = run_rate_max(&RateMaxSpec::from_db(s.clone(), 6.0), &ScaOptions::default(), false).unwrap();
        assert!((out.sum_rate - expect).abs() < 5e-3 * expect, "{} vs {expect}", out.sum_rate);
        // a vanishing radar requirement changes nothing
        let out = sca_rate_max(&RateMaxSpec { scenario: s, tau_rad: 1e-9 }, &ScaOptions::default()).unwrap();
        assert!((out.sum_rate - expect).abs() < 5e-3 * expect);
    }

    #[test]
    fn default_scenario_run() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let spec = RateMaxSpec::from_db(s.clone(), 6.0);
        let out = sca_rate_max(&spec, &ScaOptions::default()).unwrap();
        assert!(out.converged);
        for w in out.state.rate_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{w:?}");
        }
        assert!(out.report.radar >= spec.tau_rad * (1.0 - 1e-5));
        assert!(out.tx.bs_power() <= s.p_max_bs * (1.0 + 1e-7));
        for (p, cap) in out.tx.ul_powers.iter().zip(&s.p_max_ul) {
            assert!(*p <= cap * (1.0 + 1e-7));
        }
        for v in &out.tx.dl_beams {
            assert!(rank_one_ratio(&outer(v, v)) <= 1e-8);
        }
        // reported rate is recomputed, and matches the relaxed one after extraction
        let last = *out.state.rate_trace.last().unwrap();
        assert!((out.sum_rate - last).abs() < 1e-3 * last);
        let gains = beampattern_gain(&out.tx, &out.rx, &s, &default_angle_grid());
        let (imax, _) = gains.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((default_angle_grid()[imax] - s.target.angle_deg).abs() < 1.0);
    }

    /// The stopping rule is on the total rate, so activity is checked on a
    /// run iterated to a much smaller relative change.
    #[test]
    fn auxiliaries_active_at_convergence() {
        let s = generate_scenario(&ScenarioConfig { seed: 3, ..Default::default() }).unwrap();
        let opts = ScaOptions { epsilon: 1e-7, max_iters: 300, ..Default::default() };
        let out = sca_rate_max(&RateMaxSpec::from_db(s.clone(), 6.0), &opts).unwrap();
        let relaxed = out.state.relaxed();
        let q = relaxed.q_bar();
        for k in 0..s.k() {
            let g = crate::sinr::reduced_uplink_sinr_q(&s, k, &q, &relaxed.ul_powers).unwrap();
            let u = out.state.u_aux[k];
            assert!((u - g).abs() <= 1e-4 * g, "u {u} vs {g}");
            let x2 = out.state.x_aux[k].powi(2);
            assert!((u - x2).abs() <= 1e-4 * x2);
        }
    }

    #[test]
    fn zero_block_extracts_to_zero_beam() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap().normalized().scenario;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let v: CVec = random_cvec(&mut rng, 8);
        let mut blocks = vec![random_psd(&mut rng, 8, 2), outer(&v, &v), CMat::zeros(8, 8), outer(&v, &v)];
        blocks[3] *= cr(0.5);
        let tx = rank_one_extract(&blocks, &[0.0; 3], &s).unwrap();
        assert_eq!(tx.dl_beams[1].norm(), 0.0);
    }
}
