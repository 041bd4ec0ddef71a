//! Comparison schemes: communication-only designs (no sensing constraint)
//! and half-duplex time division with rate-matched thresholds.

use std::fmt;

use crate::error::{BestIterate, Error, Result};
use crate::power_min::{run_power_min, PowerMinOutcome, PowerMinSpec, ScaOptions};
use crate::rate_max::{run_rate_max, RateMaxOutcome, RateMaxSpec};
use crate::scenario::Scenario;
use crate::special_case::ao_special_case;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HdSlot {
    Downlink,
    Uplink,
}

impl fmt::Display for HdSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HdSlot::Downlink => "downlink",
            HdSlot::Uplink => "uplink",
        })
    }
}

/// Power minimization with the radar constraint removed.
pub fn comm_only_power_min(spec: &PowerMinSpec, options: &ScaOptions) -> Result<PowerMinOutcome> {
    run_power_min(spec, options, false)
}

/// Sum-rate maximization with the radar constraint removed. `tau_rad` of the
/// spec is ignored.
pub fn comm_only_rate_max(spec: &RateMaxSpec, options: &ScaOptions) -> Result<RateMaxOutcome> {
    run_rate_max(spec, options, false)
}

/// Per-slot thresholds that give a half-duplex user the same rate as the
/// full-duplex threshold over half the time.
#[derive(Debug, Clone, PartialEq)]
pub struct HdThresholds {
    pub tau_dl_bar: Vec<f64>,
    pub tau_ul_bar: Vec<f64>,
}

/// `τ̄ = (1+τ)² − 1` per entry.
pub fn hd_rate_matched_thresholds(tau_dl: &[f64], tau_ul: &[f64]) -> HdThresholds {
    let bar = |t: &f64| (1.0 + t).powi(2) - 1.0;
    HdThresholds { tau_dl_bar: tau_dl.iter().map(bar).collect(), tau_ul_bar: tau_ul.iter().map(bar).collect() }
}

/// Per-slot transmit powers (watts) and sum rates (bit/s/Hz), with the
/// equal-duration averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdResult {
    pub p_dl: f64,
    pub p_ul: f64,
    pub r_dl: f64,
    pub r_ul: f64,
    pub p_avg: f64,
    pub r_avg: f64,
    /// Iterations summed over both slots.
    pub iterations: usize,
    pub mean_iteration_ms: f64,
    /// Smallest achieved/required SINR ratio over both slots.
    pub min_margin: f64,
}

impl HdResult {
    pub fn from_slots(p_dl: f64, p_ul: f64, r_dl: f64, r_ul: f64) -> Self {
        Self {
            p_dl,
            p_ul,
            r_dl,
            r_ul,
            p_avg: 0.5 * (p_dl + p_ul),
            r_avg: 0.5 * (r_dl + r_ul),
            iterations: 0,
            mean_iteration_ms: 0.0,
            min_margin: f64::NAN,
        }
    }
}

fn slot<T>(slot: HdSlot, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Slot { slot, source: Box::new(e) })
}

/// Like [`slot`], but a slot that ran out of iterations yields its best
/// iterate together with `false`.
fn settle<T>(hd: HdSlot, r: Result<T>, take: fn(BestIterate) -> std::result::Result<T, BestIterate>) -> Result<(T, bool)> {
    match r {
        Ok(o) => Ok((o, true)),
        Err(Error::IterationLimit { iterations, best }) => match take(*best) {
            Ok(o) => Ok((o, false)),
            Err(best) => slot(hd, Err(Error::IterationLimit { iterations, best: Box::new(best) })),
        },
        Err(e) => slot(hd, Err(e)),
    }
}

fn finish(r: HdResult, converged: bool, best: fn(HdResult) -> BestIterate) -> Result<HdResult> {
    if converged {
        Ok(r)
    } else {
        Err(Error::IterationLimit { iterations: r.iterations, best: Box::new(best(r)) })
    }
}

fn mean_ms(a: (usize, f64), b: (usize, f64)) -> f64 {
    let n = a.0 + b.0;
    if n == 0 {
        0.0
    } else {
        (a.0 as f64 * a.1 + b.0 as f64 * b.1) / n as f64
    }
}

/// Half-duplex power minimization. The downlink slot serves the radar and
/// the downlink users; the uplink slot serves the radar and the uplink users.
/// Slots run concurrently; a failure in either fails the whole result. A slot
/// that hits the iteration cap makes the result an
/// [`Error::IterationLimit`] carrying the combined best iterates.
pub fn hd_power_min(
    scenario: &Scenario,
    tau_rad: f64,
    tau_dl: &[f64],
    tau_ul: &[f64],
    options: &ScaOptions,
) -> Result<HdResult> {
    let th = hd_rate_matched_thresholds(tau_dl, tau_ul);
    let dl_spec = PowerMinSpec {
        scenario: scenario.without_uplink(),
        tau_rad,
        tau_ul: Vec::new(),
        tau_dl: th.tau_dl_bar,
    };
    let dl_tau_dl = dl_spec.tau_dl.clone();
    let ul_scenario = scenario.without_downlink();
    let (dl, ul) = rayon::join(
        || run_power_min(&dl_spec, options, true),
        || ao_special_case(&ul_scenario, tau_rad, &th.tau_ul_bar, options),
    );
    let (dl, dl_done) = settle(HdSlot::Downlink, dl, |b| match b {
        BestIterate::PowerMin(o) => Ok(o),
        b => Err(b),
    })?;
    let (ul, ul_done) = settle(HdSlot::Uplink, ul, |b| match b {
        BestIterate::SpecialCase(o) => Ok(o),
        b => Err(b),
    })?;
    let mut r = HdResult::from_slots(dl.objective(), ul.objective(), dl.report.sum_rate(), ul.report.sum_rate());
    r.min_margin = dl
        .report
        .min_margin(Some(tau_rad), &[], &dl_tau_dl)
        .min(ul.report.min_margin(Some(tau_rad), &th.tau_ul_bar, &[]));
    r.iterations = dl.iterations() + ul.iterations();
    r.mean_iteration_ms = mean_ms((dl.iterations(), dl.mean_iteration_ms()), (ul.iterations(), ul.mean_iteration_ms()));
    finish(r, dl_done && ul_done, BestIterate::HalfDuplexPower)
}

/// Half-duplex sum-rate maximization: downlink users in one slot, uplink
/// users in the other, the radar constraint in both.
pub fn hd_rate_max(scenario: &Scenario, tau_rad: f64, options: &ScaOptions) -> Result<HdResult> {
    let dl_spec = RateMaxSpec { scenario: scenario.without_uplink(), tau_rad };
    let ul_spec = RateMaxSpec { scenario: scenario.without_downlink(), tau_rad };
    let (dl, ul) = rayon::join(|| run_rate_max(&dl_spec, options, true), || run_rate_max(&ul_spec, options, true));
    let rate = |b| match b {
        BestIterate::RateMax(o) => Ok(o),
        b => Err(b),
    };
    let (dl, dl_done) = settle(HdSlot::Downlink, dl, rate)?;
    let (ul, ul_done) = settle(HdSlot::Uplink, ul, rate)?;
    let mut r = HdResult::from_slots(dl.tx.total_power(), ul.tx.total_power(), dl.sum_rate, ul.sum_rate);
    r.min_margin = dl.report.min_margin(Some(tau_rad), &[], &[]).min(ul.report.min_margin(Some(tau_rad), &[], &[]));
    r.iterations = dl.iterations() + ul.iterations();
    r.mean_iteration_ms = mean_ms((dl.iterations(), dl.mean_iteration_ms()), (ul.iterations(), ul.mean_iteration_ms()));
    finish(r, dl_done && ul_done, BestIterate::HalfDuplexRate)
}
