//! Uplink-only special case (no downlink users): alternating optimization
//! between the closed-form receivers and a second-order cone program over the
//! radar beam `v₀` and the square-rooted uplink powers.

use std::time::Instant;

use crate::conic::{HermVar, LinExpr, Model, ProgramBuilder, VarId};
use crate::error::{BestIterate, ConstraintFamily, Error, Result};
use crate::linalg::{cr, outer, CMat, CVec};
use crate::power_min::{converged, scale_tx, ScaOptions, TraceRow};
use crate::scenario::{effective_matrix, interference_channels, Scenario};
use crate::sinr::{evaluate_design, optimal_rx, reduced_radar_sinr_q, reduced_uplink_sinr_q, sinr_report};
use crate::sinr::{RxDesign, SinrReport, TxDesign};

/// Receiver-dependent constants of the special-case problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeConstants {
    /// `|w_kᴴ h_k|²`
    pub a: Vec<f64>,
    /// `Cᴴ w_k`
    pub b: Vec<CVec>,
    /// `|w_kᴴ h_k'|²`, row `k`, with the diagonal left at zero.
    pub c: Vec<Vec<f64>>,
    /// `σ_r² ‖w_k‖²`
    pub d: Vec<f64>,
    /// `|β₀| A(θ₀)ᴴ u`
    pub e: CVec,
    /// `Bᴴ u`
    pub f: CVec,
    /// `|uᴴ h_k|²`
    pub g: Vec<f64>,
    /// `σ_r² ‖u‖²`
    pub h: f64,
}

/// Constants at the given receivers, used as passed (no normalization).
pub fn compute_tilde_constants(rx: &RxDesign, scenario: &Scenario) -> TildeConstants {
    let (bm, cm) = interference_channels(scenario);
    let a0 = effective_matrix(&scenario.target, &scenario.geometry);
    let u = &rx.radar_rx;
    let hs = &scenario.uplink_channels;
    let k_users = hs.len();
    TildeConstants {
        a: rx.ul_rx.iter().zip(hs).map(|(w, h)| w.dotc(h).norm_sqr()).collect(),
        b: rx.ul_rx.iter().map(|w| cm.adjoint() * w).collect(),
        c: rx
            .ul_rx
            .iter()
            .enumerate()
            .map(|(k, w)| (0..k_users).map(|j| if j == k { 0.0 } else { w.dotc(&hs[j]).norm_sqr() }).collect())
            .collect(),
        d: rx.ul_rx.iter().map(|w| scenario.noise_rx * w.norm_squared()).collect(),
        e: a0.adjoint() * u * cr(scenario.target.power_gain.sqrt()),
        f: bm.adjoint() * u,
        g: hs.iter().map(|h| u.dotc(h).norm_sqr()).collect(),
        h: scenario.noise_rx * u.norm_squared(),
    }
}

/// Real and imaginary parts of `cᴴ v` for `v = x + j y`.
fn complex_form(c: &CVec, x: &[VarId], y: &[VarId]) -> (LinExpr, LinExpr) {
    let mut re = LinExpr::zero();
    let mut im = LinExpr::zero();
    for (i, ci) in c.iter().enumerate() {
        re.add_term(x[i], ci.re);
        re.add_term(y[i], ci.im);
        im.add_term(y[i], ci.re);
        im.add_term(x[i], -ci.im);
    }
    (re, im)
}

#[derive(Debug, Clone)]
pub struct SpecialSocp {
    pub model: Model,
    /// Real and imaginary parts of `v₀`.
    pub v_re: Vec<VarId>,
    pub v_im: Vec<VarId>,
    /// `q_k = √p_k`
    pub q: Vec<VarId>,
    pub t0: VarId,
}

impl SpecialSocp {
    fn decode(&self, sol: &crate::conic::ConicSolution) -> (CVec, Vec<f64>) {
        let v = CVec::from_iterator(
            self.v_re.len(),
            self.v_re.iter().zip(&self.v_im).map(|(&x, &y)| crate::linalg::c(self.model.value(sol, x), self.model.value(sol, y))),
        );
        let p = self.q.iter().map(|&q| self.model.value(sol, q).max(0.0).powi(2)).collect();
        (v, p)
    }
}

/// The special-case SOCP at fixed receivers: minimize `t₀` subject to the
/// radar and uplink cones, with `Im(ẽᴴv₀) = 0`.
pub fn build_special_socp(k: &TildeConstants, tau_rad: f64, tau_ul: &[f64]) -> SpecialSocp {
    let nt = k.e.len();
    let k_users = k.a.len();
    let mut b = ProgramBuilder::new();
    let v_re = b.free_vars(nt);
    let v_im = b.free_vars(nt);
    let q: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();
    let t0 = b.free_var();

    let radar = Some(ConstraintFamily::Radar);
    let (e_re, e_im) = complex_form(&k.e, &v_re, &v_im);
    b.equal(e_im, radar);
    let (f_re, f_im) = complex_form(&k.f, &v_re, &v_im);
    let st = tau_rad.sqrt();
    let mut tail = vec![f_re * st, f_im * st];
    for (kk, &g) in k.g.iter().enumerate() {
        tail.push(LinExpr::term(q[kk], st * g.sqrt()));
    }
    tail.push(LinExpr::constant(st * k.h.sqrt()));
    b.soc(e_re, tail, radar);

    for kk in 0..k_users {
        let tag = Some(ConstraintFamily::Uplink(kk));
        let s = tau_ul[kk].sqrt();
        let (b_re, b_im) = complex_form(&k.b[kk], &v_re, &v_im);
        let mut tail = vec![b_re * s, b_im * s];
        for (j, &c) in k.c[kk].iter().enumerate() {
            if j != kk {
                tail.push(LinExpr::term(q[j], s * c.sqrt()));
            }
        }
        tail.push(LinExpr::constant(s * k.d[kk].sqrt()));
        b.soc(LinExpr::term(q[kk], k.a[kk].sqrt()), tail, tag);
    }

    let tail: Vec<LinExpr> = v_re.iter().chain(&v_im).chain(&q).map(|&v| v.into()).collect();
    b.soc(t0.into(), tail, None);
    b.minimize(t0.into());
    SpecialSocp { model: b.build(), v_re, v_im, q, t0 }
}

#[derive(Debug, Clone)]
pub struct SpecialSdp {
    pub model: Model,
    pub v0: HermVar,
    pub p: Vec<VarId>,
}

/// The same fixed-receiver problem with `V₀ = v₀v₀ᴴ` relaxed to a PSD matrix.
/// Used as an independent oracle for the SOCP.
pub fn build_special_sdp(k: &TildeConstants, tau_rad: f64, tau_ul: &[f64]) -> SpecialSdp {
    let nt = k.e.len();
    let k_users = k.a.len();
    let mut b = ProgramBuilder::new();
    let v0 = b.hermitian_psd(nt);
    let p: Vec<VarId> = (0..k_users).map(|_| b.nonneg_var()).collect();

    let mut radar = v0.trace_with(&outer(&k.e, &k.e)) - v0.trace_with(&outer(&k.f, &k.f)) * tau_rad - k.h * tau_rad;
    for (kk, &g) in k.g.iter().enumerate() {
        radar.add_term(p[kk], -tau_rad * g);
    }
    b.geq_zero(radar, Some(ConstraintFamily::Radar));
    for kk in 0..k_users {
        let t = tau_ul[kk];
        let mut e = LinExpr::term(p[kk], k.a[kk]) - v0.trace_with(&outer(&k.b[kk], &k.b[kk])) * t - k.d[kk] * t;
        for (j, &c) in k.c[kk].iter().enumerate() {
            if j != kk {
                e.add_term(p[j], -t * c);
            }
        }
        b.geq_zero(e, Some(ConstraintFamily::Uplink(kk)));
    }
    let mut obj = v0.trace();
    for &x in &p {
        obj.add_term(x, 1.0);
    }
    b.minimize(obj);
    SpecialSdp { model: b.build(), v0, p }
}

#[derive(Debug, Clone)]
pub struct AoState {
    pub v0: CMat,
    pub ul_powers: Vec<f64>,
    pub rx: RxDesign,
    pub iteration: usize,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    /// Final iterate in watts; `v0` is the rank-one radar covariance.
    pub state: AoState,
    pub radar_beam: CVec,
    pub tx: TxDesign,
    pub rx: RxDesign,
    pub report: SinrReport,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

impl AoOutcome {
    pub fn objective(&self) -> f64 {
        self.tx.total_power()
    }

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

fn unit(v: &CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v * cr(1.0 / n)
    } else {
        v.clone()
    }
}

fn design(v0: &CMat, p: &[f64]) -> TxDesign {
    TxDesign { dl_beams: vec![], radar_cov: v0.clone(), ul_powers: p.to_vec() }
}

/// Alternating optimization for the special case. `scenario` must have no
/// downlink users.
pub fn ao_special_case(scenario: &Scenario, tau_rad: f64, tau_ul: &[f64], options: &ScaOptions) -> Result<AoOutcome> {
    scenario.validate()?;
    if scenario.l() != 0 {
        return Err(Error::InvalidInput("special case requires L = 0".into()));
    }
    if tau_ul.len() != scenario.k() {
        return Err(Error::InvalidInput("threshold list does not match the user count".into()));
    }
    if !(tau_rad > 0.0) || tau_ul.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("SINR thresholds must be positive".into()));
    }
    if !(scenario.target.power_gain > 0.0) {
        return Err(Error::Infeasible { family: Some(ConstraintFamily::Radar) });
    }
    let norm = scenario.normalized();
    let unit_w = norm.power_unit;
    let s = &norm.scenario;
    let nt = s.n_tx();

    let mut v0 = CMat::identity(nt, nt) * cr(s.p_max_bs / (2.0 * nt as f64));
    let mut p: Vec<f64> = s.p_max_ul.iter().map(|x| x / 2.0).collect();
    let mut beam = CVec::zeros(nt);
    let mut rx = optimal_rx(&design(&v0, &p), s)?;
    let mut objective_trace = Vec::new();
    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut done = false;

    while iteration < options.max_iters {
        let started = Instant::now();
        let mut restarts = 0;
        let (socp, sol) = loop {
            rx = optimal_rx(&design(&v0, &p), s)?;
            let normed = RxDesign { radar_rx: unit(&rx.radar_rx), ul_rx: rx.ul_rx.iter().map(unit).collect() };
            let consts = compute_tilde_constants(&normed, s);
            let socp = build_special_socp(&consts, tau_rad, tau_ul);
            match socp.model.solve_optimal(&options.solver) {
                Ok(sol) => break (socp, sol),
                Err(Error::Infeasible { family }) if iteration == 0 => {
                    if restarts >= options.max_restarts {
                        return Err(Error::Infeasible { family });
                    }
                    restarts += 1;
                    v0 *= cr(2.0);
                    p.iter_mut().for_each(|x| *x *= 2.0);
                }
                Err(e) => return Err(e),
            }
        };
        let (v, q) = socp.decode(&sol);
        beam = v;
        v0 = outer(&beam, &beam);
        p = q;
        iteration += 1;
        objective_trace.push(beam.norm_squared() + p.iter().sum::<f64>());
        let ms = started.elapsed().as_secs_f64() * 1e3;
        trace.push(ao_trace_row(s, &v0, &p, tau_rad, tau_ul, iteration, objective_trace[iteration - 1] * unit_w, ms));
        if converged(&objective_trace, options.epsilon) {
            done = true;
            break;
        }
    }

    let tx_n = design(&v0, &p);
    let (rx_final, _) = evaluate_design(&tx_n, s)?;
    let tx = scale_tx(&tx_n, unit_w);
    let report = sinr_report(&tx, &rx_final, scenario)?;
    let state = AoState {
        v0: tx.radar_cov.clone(),
        ul_powers: tx.ul_powers.clone(),
        rx,
        iteration,
        objective_trace: objective_trace.iter().map(|o| o * unit_w).collect(),
    };
    let outcome = AoOutcome {
        state,
        radar_beam: beam * cr(unit_w.sqrt()),
        tx,
        rx: rx_final,
        report,
        trace,
        converged: done,
    };
    if done {
        Ok(outcome)
    } else {
        Err(Error::IterationLimit { iterations: iteration, best: Box::new(BestIterate::SpecialCase(outcome)) })
    }
}

#[allow(clippy::too_many_arguments)]
fn ao_trace_row(
    s: &Scenario,
    v0: &CMat,
    p: &[f64],
    tau_rad: f64,
    tau_ul: &[f64],
    iter: usize,
    objective: f64,
    ms: f64,
) -> TraceRow {
    let radar = reduced_radar_sinr_q(s, v0, p).map_or(f64::NAN, |g| g / tau_rad - 1.0);
    let ul = (0..s.k())
        .map(|k| reduced_uplink_sinr_q(s, k, v0, p).map_or(f64::NAN, |g| g / tau_ul[k] - 1.0))
        .fold(f64::NAN, f64::min);
    TraceRow { iter, objective, radar_slack: radar, min_ul_slack: ul, min_dl_slack: f64::NAN, solve_ms: ms }
}
