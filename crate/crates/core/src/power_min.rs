//! Total transmit power minimization by successive convex approximation over
//! the rank-relaxed covariance blocks, followed by a lossless rank-one
//! reconstruction of the downlink beams.

use std::io::Write;
use std::time::Instant;

use crate::conic::{HermVar, LinExpr, Model, ProgramBuilder, SolveStats, SolverSettings, VarId};
use crate::error::{BestIterate, ConstraintFamily, Error, Result};
use crate::experiments::fmt_sig;
use crate::linalg::{cr, hermitian_part, min_eigenvalue, outer, quad_form, CMat, CVec, HpdFactor};
use crate::scenario::{interference_channels, Scenario};
use crate::sinr::{
    evaluate_design, radar_interference, reduced_radar_sinr_q, reduced_uplink_sinr_q, sinr_report, uplink_interference,
    RxDesign, SinrReport, TxDesign,
};
use crate::units::db_to_linear;

/// Lower bound on `a_tᴴ Q̄ a_t` inside every surrogate, in watts.
pub const RADAR_ILLUMINATION_FLOOR_W: f64 = 1e-12;

/// Problem data: scenario plus linear SINR thresholds.
#[derive(Debug, Clone)]
pub struct PowerMinSpec {
    pub scenario: Scenario,
    pub tau_rad: f64,
    pub tau_ul: Vec<f64>,
    pub tau_dl: Vec<f64>,
}

impl PowerMinSpec {
    /// Uniform thresholds given in dB.
    pub fn from_db(scenario: Scenario, tau_rad_db: f64, tau_ul_db: f64, tau_dl_db: f64) -> Self {
        let (k, l) = (scenario.k(), scenario.l());
        Self {
            scenario,
            tau_rad: db_to_linear(tau_rad_db),
            tau_ul: vec![db_to_linear(tau_ul_db); k],
            tau_dl: vec![db_to_linear(tau_dl_db); l],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.tau_ul.len() != self.scenario.k() || self.tau_dl.len() != self.scenario.l() {
            return Err(Error::InvalidInput("threshold lists do not match the user counts".into()));
        }
        let ok = |t: f64| t > 0.0 && t.is_finite();
        if !ok(self.tau_rad) || !self.tau_ul.iter().chain(&self.tau_dl).all(|&t| ok(t)) {
            return Err(Error::InvalidInput("SINR thresholds must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    /// Relative objective change that stops the iteration.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Anchor inflations tried when the first surrogate is infeasible.
    pub max_restarts: usize,
    pub solver: SolverSettings,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_iters: 100, max_restarts: 5, solver: SolverSettings::default() }
    }
}

/// Relaxed iterate: `V₀` followed by `V₁..V_L`, and the uplink powers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub v_blocks: Vec<CMat>,
    pub ul_powers: Vec<f64>,
    pub iteration: usize,
    pub objective_trace: Vec<f64>,
}

impl ScaState {
    /// `Q̄ = Σ_{l≥0} V_l`
    pub fn q_bar(&self) -> CMat {
        let mut q = self.v_blocks[0].clone();
        for v in &self.v_blocks[1..] {
            q += v;
        }
        q
    }

    pub fn total_power(&self) -> f64 {
        self.v_blocks.iter().map(|v| v.trace().re).sum::<f64>() + self.ul_powers.iter().sum::<f64>()
    }

    pub(crate) fn scaled(&self, k: f64) -> ScaState {
        ScaState {
            v_blocks: self.v_blocks.iter().map(|v| v * cr(k)).collect(),
            ul_powers: self.ul_powers.iter().map(|p| p * k).collect(),
            iteration: self.iteration,
            objective_trace: self.objective_trace.iter().map(|o| o * k).collect(),
        }
    }
}

/// One row of a per-run convergence trace. Slacks are achieved/required − 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub radar_slack: f64,
    pub min_ul_slack: f64,
    pub min_dl_slack: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PowerMinOutcome {
    /// Last relaxed iterate, in watts.
    pub relaxed: ScaState,
    pub tx: TxDesign,
    pub rx: RxDesign,
    pub report: SinrReport,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// Dual residual of the last surrogate solve.
    pub kkt_residual: f64,
}

impl PowerMinOutcome {
    pub fn objective(&self) -> f64 {
        self.tx.total_power()
    }

    pub fn iterations(&self) -> usize {
        self.relaxed.iteration
    }

    pub fn mean_iteration_ms(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        self.trace.iter().map(|r| r.solve_ms).sum::<f64>() / self.trace.len() as f64
    }
}

/// `Ψ = Σ p_k h_k h_kᴴ + B Q̄ Bᴴ + σ_r² I`
pub fn psi_matrix(state: &ScaState, scenario: &Scenario) -> CMat {
    radar_interference(scenario, &state.q_bar(), &state.ul_powers)
}

/// `Φ_k = Σ_{k'≠k} p_k' h_k' h_k'ᴴ + C Q̄ Cᴴ + σ_r² I`
pub fn phi_matrix(k: usize, state: &ScaState, scenario: &Scenario) -> CMat {
    uplink_interference(scenario, k, &state.q_bar(), &state.ul_powers)
}

/// First-order lower bound of `aᴴ Ψ⁻¹ a` around `Ψ₀`:
/// `2 Re(aᴴz) − zᴴ Ψ z` with `z = Ψ₀⁻¹ a`.
pub fn taylor_inverse_quad(psi: &CMat, psi_anchor: &CMat, a: &CVec) -> Result<f64> {
    let z = HpdFactor::new(psi_anchor)?.solve(a);
    Ok(2.0 * a.dotc(&z).re - quad_form(&z, psi))
}

/// An affine functional `c + Re Tr(W Q̄) + Σ w_k p_k` of the relaxed iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub constant: f64,
    pub q_weight: CMat,
    pub p_weights: Vec<f64>,
}

impl AffineForm {
    pub fn eval(&self, v_blocks: &[CMat], powers: &[f64]) -> f64 {
        let v: f64 = v_blocks.iter().map(|b| (&self.q_weight * b).trace().re).sum();
        self.constant + v + self.p_weights.iter().zip(powers).map(|(w, p)| w * p).sum::<f64>()
    }

    pub(crate) fn expr(&self, v: &[HermVar], p: &[VarId]) -> LinExpr {
        let mut e = LinExpr::constant(self.constant);
        for h in v {
            e += &h.trace_with(&self.q_weight);
        }
        for (&var, &w) in p.iter().zip(&self.p_weights) {
            e.add_term(var, w);
        }
        e
    }
}

/// Taylor form of `aᴴ M⁻¹ a` for `M = Σ_{k≠skip} p_k h_k h_kᴴ + G Q̄ Gᴴ + σ² I`.
fn taylor_form(scenario: &Scenario, g: &CMat, anchor: &CMat, a: &CVec, skip: Option<usize>) -> Result<AffineForm> {
    let z = HpdFactor::new(anchor)?.solve(a);
    let gz = g.adjoint() * &z;
    Ok(AffineForm {
        constant: 2.0 * a.dotc(&z).re - scenario.noise_rx * z.norm_squared(),
        q_weight: -outer(&gz, &gz),
        p_weights: scenario
            .uplink_channels
            .iter()
            .enumerate()
            .map(|(k, h)| if Some(k) == skip { 0.0 } else { -h.dotc(&z).norm_sqr() })
            .collect(),
    })
}

/// Lower bound of `a_rᴴ Ψ⁻¹ a_r`, tight at `anchor`.
pub fn radar_taylor_bound(scenario: &Scenario, anchor: &ScaState) -> Result<AffineForm> {
    let (b, _) = interference_channels(scenario);
    taylor_form(scenario, &b, &psi_matrix(anchor, scenario), &scenario.target_rx_steering(), None)
}

/// Lower bound of `h_kᴴ Φ_k⁻¹ h_k`, tight at `anchor`.
pub fn uplink_taylor_bound(k: usize, scenario: &Scenario, anchor: &ScaState) -> Result<AffineForm> {
    let (_, c) = interference_channels(scenario);
    taylor_form(scenario, &c, &phi_matrix(k, anchor, scenario), &scenario.uplink_channels[k], Some(k))
}

/// Variables of a built power surrogate.
#[derive(Debug, Clone)]
pub struct PowerSurrogate {
    pub model: Model,
    pub v: Vec<HermVar>,
    pub p: Vec<VarId>,
    pub radar_epigraph: Option<VarId>,
    pub ul_epigraph: Vec<VarId>,
}

impl PowerSurrogate {
    fn decode(&self, sol: &crate::conic::ConicSolution) -> (Vec<CMat>, Vec<f64>) {
        let v = self.v.iter().map(|h| hermitian_part(&self.model.hermitian_value(sol, h))).collect();
        let p = self.p.iter().map(|&x| self.model.value(sol, x).max(0.0)).collect();
        (v, p)
    }
}

/// Convex surrogate of the power problem around `anchor`. The radar subset is
/// left out when `include_radar` is false. `illumination_floor` is the lower
/// bound on `a_tᴴ Q̄ a_t` in the power units of `spec`.
pub fn build_power_surrogate(
    spec: &PowerMinSpec,
    anchor: &ScaState,
    include_radar: bool,
    illumination_floor: f64,
) -> Result<PowerSurrogate> {
    let s = &spec.scenario;
    let (nt, k_users, l_users) = (s.n_tx(), s.k(), s.l());
    let mut b = ProgramBuilder::new();
    let v: Vec<HermVar> = (0..=l_users).map(|_| b.hermitian_psd(nt)).collect();
    let p: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();

    let mut objective = LinExpr::zero();
    for h in &v {
        objective += &h.trace();
    }
    for &x in &p {
        objective.add_term(x, 1.0);
    }
    b.minimize(objective);

    let radar_epigraph = if include_radar {
        Some(add_radar_subset(&mut b, s, anchor, &v, &p, spec.tau_rad, illumination_floor)?)
    } else {
        None
    };

    let mut ul_epigraph = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let tag = Some(ConstraintFamily::Uplink(k));
        let form = uplink_taylor_bound(k, s, anchor)?;
        let f0 = form.eval(&anchor.v_blocks, &anchor.ul_powers);
        let t = b.free_var();
        b.geq_zero(form.expr(&v, &p) - t, tag);
        // t ≈ f0 and p ≈ τ/f0 near the anchor
        let ratio = f0 * f0 / spec.tau_ul[k];
        b.balanced_product_geq(t.into(), p[k].into(), vec![LinExpr::constant(spec.tau_ul[k].sqrt())], ratio, tag);
        ul_epigraph.push(t);
    }

    for l in 0..l_users {
        let g = &s.downlink_channels[l];
        let gg = outer(g, g);
        let mut e = v[l + 1].trace_with(&gg) * (1.0 + 1.0 / spec.tau_dl[l]);
        for h in &v {
            e = e - h.trace_with(&gg);
        }
        b.geq_zero(e - s.noise_dl[l], Some(ConstraintFamily::Downlink(l)));
    }

    Ok(PowerSurrogate { model: b.build(), v, p, radar_epigraph, ul_epigraph })
}

/// Inner approximation of the radar SINR constraint: `s ≤ f(Ψ, Ψ₀)`,
/// `s·y ≥ τ/|β₀|²` and `y ≥ floor` with `y = a_tᴴ Q̄ a_t`. Returns `s`.
pub(crate) fn add_radar_subset(
    b: &mut ProgramBuilder,
    s: &Scenario,
    anchor: &ScaState,
    v: &[HermVar],
    p: &[VarId],
    tau_rad: f64,
    illumination_floor: f64,
) -> Result<VarId> {
    if !(s.target.power_gain > 0.0) {
        return Err(Error::Infeasible { family: Some(ConstraintFamily::Radar) });
    }
    let tag = Some(ConstraintFamily::Radar);
    let form = radar_taylor_bound(s, anchor)?;
    let f0 = form.eval(&anchor.v_blocks, &anchor.ul_powers);
    let f = form.expr(v, p);
    let at = s.target_tx_steering();
    let illum = outer(&at, &at);
    let mut y = LinExpr::zero();
    for h in v {
        y += &h.trace_with(&illum);
    }
    let sv = b.free_var();
    b.geq_zero(f - sv, tag);
    let need = tau_rad / s.target.power_gain;
    // balance around the anchor's own factors; the product may be slack
    let y0 = quad_form(&at, &anchor.q_bar()).max(illumination_floor);
    b.balanced_product_geq(sv.into(), y.clone(), vec![LinExpr::constant(need.sqrt())], f0 / y0, tag);
    b.geq_zero(y - illumination_floor, tag);
    Ok(sv)
}

/// Warm start on a normalized scenario: isotropic radar covariance with half
/// the BS budget, MRT beams meeting the downlink thresholds without cross
/// terms, half the uplink budgets.
fn initial_state(spec: &PowerMinSpec) -> ScaState {
    let s = &spec.scenario;
    let nt = s.n_tx();
    let mut v_blocks = vec![CMat::identity(nt, nt) * cr(s.p_max_bs / (2.0 * nt as f64))];
    for (l, g) in s.downlink_channels.iter().enumerate() {
        let gn = g.norm_squared();
        let v = g * cr((spec.tau_dl[l] * s.noise_dl[l]).sqrt() / gn);
        v_blocks.push(outer(&v, &v));
    }
    ScaState {
        v_blocks,
        ul_powers: s.p_max_ul.iter().map(|p| p / 2.0).collect(),
        iteration: 0,
        objective_trace: Vec::new(),
    }
}

fn slack(x: f64, tau: f64) -> f64 {
    x / tau - 1.0
}

/// Downlink SINRs of a relaxed iterate.
pub(crate) fn relaxed_dl_sinrs(s: &Scenario, v_blocks: &[CMat]) -> Vec<f64> {
    let q: CMat = v_blocks.iter().fold(CMat::zeros(s.n_tx(), s.n_tx()), |acc, v| acc + v);
    s.downlink_channels
        .iter()
        .enumerate()
        .map(|(l, g)| {
            let sig = quad_form(g, &v_blocks[l + 1]);
            sig / (quad_form(g, &q) - sig + s.noise_dl[l])
        })
        .collect()
}

pub(crate) fn trace_row(spec: &PowerMinSpec, state: &ScaState, include_radar: bool, ms: f64) -> TraceRow {
    let s = &spec.scenario;
    let q = state.q_bar();
    let radar = if include_radar {
        reduced_radar_sinr_q(s, &q, &state.ul_powers).map_or(f64::NAN, |g| slack(g, spec.tau_rad))
    } else {
        f64::NAN
    };
    let ul = (0..s.k())
        .map(|k| reduced_uplink_sinr_q(s, k, &q, &state.ul_powers).map_or(f64::NAN, |g| slack(g, spec.tau_ul[k])))
        .fold(f64::NAN, f64::min);
    let dl = relaxed_dl_sinrs(s, &state.v_blocks)
        .iter()
        .zip(&spec.tau_dl)
        .map(|(g, t)| slack(*g, *t))
        .fold(f64::NAN, f64::min);
    TraceRow {
        iter: state.iteration,
        objective: state.objective_trace.last().copied().unwrap_or(f64::NAN),
        radar_slack: radar,
        min_ul_slack: ul,
        min_dl_slack: dl,
        solve_ms: ms,
    }
}

/// Rank-one reconstruction: `v_l* = (g_lᴴ V̂_l g_l)^{-1/2} V̂_l g_l` and
/// `V₀* = Σ_{l≥0} V̂_l − Σ_{l≥1} v_l* v_l*ᴴ`. `v_hat[0]` is `V̂₀`. A block
/// that is numerically zero yields a zero beam.
pub fn rank_one_extract(v_hat: &[CMat], p_hat: &[f64], scenario: &Scenario) -> Result<TxDesign> {
    if v_hat.len() != scenario.l() + 1 {
        return Err(Error::InvalidInput("expected L+1 covariance blocks".into()));
    }
    let nt = scenario.n_tx();
    let mut q: CMat = v_hat.iter().fold(CMat::zeros(nt, nt), |acc, v| acc + v);
    let scale = v_hat.iter().map(|v| v.trace().re).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut beams = Vec::with_capacity(scenario.l());
    for (l, g) in scenario.downlink_channels.iter().enumerate() {
        let vg = &v_hat[l + 1] * g;
        let gvg = g.dotc(&vg).re;
        let tr = v_hat[l + 1].trace().re;
        if tr <= 1e-12 * scale {
            beams.push(CVec::zeros(nt));
            continue;
        }
        if !(gvg > f64::EPSILON * g.norm_squared() * tr) {
            return Err(Error::Degenerate(format!("g_{l}ᴴ V_{l} g_{l} is not positive")));
        }
        let v = vg * cr(gvg.sqrt().recip());
        q -= outer(&v, &v);
        beams.push(v);
    }
    let radar_cov = hermitian_part(&q);
    let lam = min_eigenvalue(&radar_cov);
    if lam < -1e-8 * scale {
        log::warn!("extracted radar covariance has eigenvalue {lam:.3e} (scale {scale:.3e})");
    }
    Ok(TxDesign { dl_beams: beams, radar_cov, ul_powers: p_hat.to_vec() })
}

/// Relative change test shared by the iterative solvers.
pub(crate) fn converged(trace: &[f64], epsilon: f64) -> bool {
    match trace {
        [.., prev, last] => (last - prev).abs() <= epsilon * prev.abs().max(f64::MIN_POSITIVE),
        _ => false,
    }
}

/// Power minimization. Returns the rank-one design, the optimal receivers
/// and the achieved SINRs, all in watts / linear units.
pub fn sca_power_min(spec: &PowerMinSpec, options: &ScaOptions) -> Result<PowerMinOutcome> {
    run_power_min(spec, options, true)
}

pub(crate) fn run_power_min(spec: &PowerMinSpec, options: &ScaOptions, include_radar: bool) -> Result<PowerMinOutcome> {
    spec.validate()?;
    let norm = spec.scenario.normalized();
    let unit = norm.power_unit;
    let nspec = PowerMinSpec { scenario: norm.scenario, ..spec.clone() };

    let floor = RADAR_ILLUMINATION_FLOOR_W / unit;
    let mut anchor = initial_state(&nspec);
    let mut trace = Vec::new();
    let mut stats = SolveStats::default();
    let mut done = false;

    while anchor.iteration < options.max_iters {
        let started = Instant::now();
        let mut restarts = 0;
        let (sur, sol) = loop {
            let sur = build_power_surrogate(&nspec, &anchor, include_radar, floor)?;
            match sur.model.solve_optimal(&options.solver) {
                Ok(sol) => break (sur, sol),
                Err(Error::Infeasible { family }) if anchor.iteration == 0 => {
                    if restarts >= options.max_restarts {
                        return Err(Error::Infeasible { family });
                    }
                    restarts += 1;
                    log::debug!("first surrogate infeasible ({family:?}); inflating anchor");
                    anchor = ScaState { iteration: 0, ..anchor.scaled(2.0) };
                    anchor.objective_trace.clear();
                }
                Err(e) => return Err(e),
            }
        };
        let (v_blocks, ul_powers) = sur.decode(&sol);
        stats = sol.stats;
        let mut objective_trace = std::mem::take(&mut anchor.objective_trace);
        objective_trace.push(sol.objective_value);
        anchor = ScaState { v_blocks, ul_powers, iteration: anchor.iteration + 1, objective_trace };
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let mut row = trace_row(&nspec, &anchor, include_radar, ms);
        row.objective *= unit;
        trace.push(row);
        if converged(&anchor.objective_trace, options.epsilon) {
            done = true;
            break;
        }
    }

    let tx_n = rank_one_extract(&anchor.v_blocks, &anchor.ul_powers, &nspec.scenario)?;
    let (rx, _) = evaluate_design(&tx_n, &nspec.scenario)?;
    let tx = scale_tx(&tx_n, unit);
    let report = sinr_report(&tx, &rx, &spec.scenario)?;
    let outcome = PowerMinOutcome {
        relaxed: anchor.scaled(unit),
        tx,
        rx,
        report,
        trace,
        converged: done,
        kkt_residual: stats.dual_residual,
    };
    if done {
        Ok(outcome)
    } else {
        Err(Error::IterationLimit { iterations: outcome.iterations(), best: Box::new(BestIterate::PowerMin(outcome)) })
    }
}

pub(crate) fn scale_tx(tx: &TxDesign, k: f64) -> TxDesign {
    TxDesign {
        dl_beams: tx.dl_beams.iter().map(|v| v * cr(k.sqrt())).collect(),
        radar_cov: &tx.radar_cov * cr(k),
        ul_powers: tx.ul_powers.iter().map(|p| p * k).collect(),
    }
}

/// Per-iteration trace as CSV with a leading `method` column.
pub fn write_trace_csv<W: Write>(out: W, method: &str, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "iter", "objective_w", "radar_slack", "min_ul_slack", "min_dl_slack", "solve_ms"])?;
    for r in rows {
        w.write_record([
            method.to_string(),
            r.iter.to_string(),
            fmt_sig(r.objective),
            fmt_sig(r.radar_slack),
            fmt_sig(r.min_ul_slack),
            fmt_sig(r.min_dl_slack),
            fmt_sig(r.solve_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}
