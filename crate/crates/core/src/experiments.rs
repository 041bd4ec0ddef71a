//! Seeded Monte Carlo harness: trial runs, parameter sweeps, beampatterns,
//! ROC tables and convergence traces, all written as CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{comm_only_power_min, comm_only_rate_max, hd_power_min, hd_rate_max};
use crate::conic::SolverSettings;
use crate::detection::{log_pfa_grid, roc_table, RocPoint};
use crate::error::{BestIterate, Error, Result};
use crate::power_min::{sca_power_min, PowerMinSpec, ScaOptions};
use crate::rate_max::{sca_rate_max, RateMaxSpec};
use crate::scenario::{generate_scenario, ScenarioConfig};
use crate::sinr::{beampattern_gain, default_angle_grid, SinrReport};
use crate::special_case::ao_special_case;
use crate::units::{db_to_linear, linear_to_db};

/// `%.9g`-style formatting: nine significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

macro_rules! labelled_enum {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                let want = s.replace('-', "_");
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.label() == want)
                    .ok_or_else(|| Error::Config(format!(
                        "unknown {} '{s}' (expected one of: {})",
                        stringify!($name),
                        $name::ALL.iter().map(|v| v.label()).collect::<Vec<_>>().join(", ")
                    )))
            }
        }
    };
}

labelled_enum!(ExperimentKind {
    PowerMin => "power_min",
    RateMax => "rate_max",
    SpecialCase => "special_case",
    SweepTauRad => "sweep_tau_rad",
    SweepAlphaSi => "sweep_alpha_si",
    Beampattern => "beampattern",
    Roc => "roc",
    Convergence => "convergence",
});

labelled_enum!(Scheme {
    Fd => "fd",
    Hd => "hd",
    CommOnly => "comm_only",
    Alg1 => "alg1",
    Alg2 => "alg2",
    Alg3 => "alg3",
});

labelled_enum!(SchemeSelection {
    Fd => "fd",
    Hd => "hd",
    CommOnly => "comm_only",
    All => "all",
});

labelled_enum!(BeampatternDesign {
    PowerMin => "power_min",
    RateMax => "rate_max",
});

impl SchemeSelection {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeSelection::Fd => vec![Scheme::Fd],
            SchemeSelection::Hd => vec![Scheme::Hd],
            SchemeSelection::CommOnly => vec![Scheme::CommOnly],
            SchemeSelection::All => vec![Scheme::Fd, Scheme::Hd, Scheme::CommOnly],
        }
    }
}

/// SINR thresholds in dB, applied uniformly to every user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub tau_rad_db: f64,
    pub tau_ul_db: f64,
    pub tau_dl_db: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { tau_rad_db: 6.0, tau_ul_db: 5.0, tau_dl_db: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaConfig {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        let o = ScaOptions::default();
        Self { epsilon: o.epsilon, max_iters: o.max_iters }
    }
}

impl ScaConfig {
    pub fn options(&self) -> ScaOptions {
        ScaOptions { epsilon: self.epsilon, max_iters: self.max_iters, ..ScaOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RocConfig {
    pub sinr_db: Vec<f64>,
    pub log10_pfa_min: f64,
    pub log10_pfa_max: f64,
    pub points: usize,
}

impl Default for RocConfig {
    fn default() -> Self {
        Self { sinr_db: vec![-3.0, 0.0, 3.0, 6.0, 9.0, 12.0], log10_pfa_min: -8.0, log10_pfa_max: -0.5, points: 76 }
    }
}

/// Everything one experiment run needs. Loadable from TOML; every field has
/// a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub trials: usize,
    /// Sweep values in dB; the experiment's default grid when absent.
    pub grid: Option<Vec<f64>>,
    pub schemes: SchemeSelection,
    pub design: BeampatternDesign,
    pub thresholds: Thresholds,
    pub sca: ScaConfig,
    pub roc: RocConfig,
    /// When false, wall-clock columns are written as NaN so that outputs are
    /// byte-identical across runs.
    pub record_timing: bool,
    pub out_dir: PathBuf,
    pub scenario: ScenarioConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::PowerMin,
            trials: 50,
            grid: None,
            schemes: SchemeSelection::All,
            design: BeampatternDesign::PowerMin,
            thresholds: Thresholds::default(),
            sca: ScaConfig::default(),
            roc: RocConfig::default(),
            record_timing: true,
            out_dir: PathBuf::from("results"),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(g) = &self.grid {
            check_grid(g)?;
        }
        if !(self.sca.epsilon > 0.0) || self.sca.max_iters == 0 {
            return Err(Error::Config("SCA epsilon must be positive and max_iters at least 1".into()));
        }
        let r = &self.roc;
        if r.points == 0 || !(r.log10_pfa_min <= r.log10_pfa_max) || r.log10_pfa_max >= 0.0 {
            return Err(Error::Config("ROC false-alarm grid must lie below 1".into()));
        }
        Ok(())
    }

    /// Effective sweep grid.
    pub fn sweep_grid(&self) -> Vec<f64> {
        match (&self.grid, self.experiment) {
            (Some(g), _) => g.clone(),
            (None, ExperimentKind::SweepTauRad) => (0..=6).map(|i| 2.0 * i as f64).collect(),
            (None, ExperimentKind::SweepAlphaSi) => (0..=4).map(|i| -130.0 + 10.0 * i as f64).collect(),
            (None, _) => Vec::new(),
        }
    }
}

fn check_grid(g: &[f64]) -> Result<()> {
    if g.is_empty() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("sweep grid must be a nonempty list of finite values".into()));
    }
    let up = g.windows(2).all(|w| w[1] > w[0]);
    let down = g.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Config("sweep grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Parse `start:step:stop` (inclusive, optional `dB` suffix) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    let t = t.strip_suffix("dB").or_else(|| t.strip_suffix("db")).unwrap_or(t).trim();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad grid value '{s}'")));
    let grid = if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid '{text}' must be start:step:stop")));
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(Error::Config(format!("grid '{text}' never reaches its stop value")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    } else {
        t.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

/// One row per (sweep point, trial, scheme).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trial: usize,
    pub seed: u64,
    pub sweep_value: f64,
    pub scheme: Scheme,
    /// Watts for power experiments, bit/s/Hz for rate experiments.
    pub objective: f64,
    pub radar_slack: f64,
    pub min_ul_slack: f64,
    pub min_dl_slack: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub mean_iter_ms: f64,
    pub status: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub mean_objective: f64,
    pub feasibility_rate: f64,
    pub mean_iters: f64,
    pub mean_solve_ms: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub trial: usize,
    pub method: Scheme,
    pub iter: usize,
    pub objective: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    /// `(angle_deg, gain_db)`, averaged over converged trials.
    pub beampattern: Vec<(f64, f64)>,
    pub roc: Vec<RocPoint>,
    pub traces: Vec<TraceRecord>,
    pub files: Vec<PathBuf>,
}

/// Measurements of one scheme on one instance.
#[derive(Debug, Clone, Default)]
struct Measured {
    objective: f64,
    radar_slack: f64,
    min_ul_slack: f64,
    min_dl_slack: f64,
    iterations: usize,
    mean_iter_ms: f64,
}

fn nan_measured() -> Measured {
    Measured {
        objective: f64::NAN,
        radar_slack: f64::NAN,
        min_ul_slack: f64::NAN,
        min_dl_slack: f64::NAN,
        iterations: 0,
        mean_iter_ms: f64::NAN,
    }
}

fn slacks(report: &SinrReport, tau_rad: f64, tau_ul: f64, tau_dl: f64) -> (f64, f64, f64) {
    let fold = |v: &[f64], t: f64| v.iter().map(|g| g / t - 1.0).fold(f64::NAN, f64::min);
    (report.radar / tau_rad - 1.0, fold(&report.uplink, tau_ul), fold(&report.downlink, tau_dl))
}

/// Numbers kept from the best iterate of a run that hit the iteration cap.
fn from_best(best: &BestIterate, th: &Linear) -> Measured {
    match best {
        BestIterate::PowerMin(o) => {
            let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
            Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }
        }
        BestIterate::SpecialCase(o) => {
            let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
            Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }
        }
        BestIterate::RateMax(o) => Measured {
            objective: o.sum_rate,
            radar_slack: o.report.radar / th.rad - 1.0,
            iterations: o.iterations(),
            mean_iter_ms: o.mean_iteration_ms(),
            ..nan_measured()
        },
        BestIterate::HalfDuplexPower(r) | BestIterate::HalfDuplexRate(r) => Measured {
            objective: if matches!(best, BestIterate::HalfDuplexPower(_)) { r.p_avg } else { r.r_avg },
            radar_slack: r.min_margin - 1.0,
            iterations: r.iterations,
            mean_iter_ms: r.mean_iteration_ms,
            ..nan_measured()
        },
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    rad: f64,
    ul: f64,
    dl: f64,
}

impl From<&Thresholds> for Linear {
    fn from(t: &Thresholds) -> Self {
        Self { rad: db_to_linear(t.tau_rad_db), ul: db_to_linear(t.tau_ul_db), dl: db_to_linear(t.tau_dl_db) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    Power,
    Rate,
}

fn run_scheme(
    scheme: Scheme,
    objective: Objective,
    scenario: &crate::scenario::Scenario,
    th: &Linear,
    opts: &ScaOptions,
) -> Result<Measured> {
    let (k, l) = (scenario.k(), scenario.l());
    let pspec = || PowerMinSpec { scenario: scenario.clone(), tau_rad: th.rad, tau_ul: vec![th.ul; k], tau_dl: vec![th.dl; l] };
    let rspec = || RateMaxSpec { scenario: scenario.clone(), tau_rad: th.rad };
    let power = |o: crate::power_min::PowerMinOutcome| {
        let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
        Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }
    };
    let rate = |o: crate::rate_max::RateMaxOutcome| Measured {
        objective: o.sum_rate,
        radar_slack: o.report.radar / th.rad - 1.0,
        iterations: o.iterations(),
        mean_iter_ms: o.mean_iteration_ms(),
        ..nan_measured()
    };
    let hd = |r: crate::benchmarks::HdResult, obj: f64| Measured {
        objective: obj,
        radar_slack: r.min_margin - 1.0,
        iterations: r.iterations,
        mean_iter_ms: r.mean_iteration_ms,
        ..nan_measured()
    };
    Ok(match (scheme, objective) {
        (Scheme::Fd | Scheme::Alg1, Objective::Power) => power(sca_power_min(&pspec(), opts)?),
        (Scheme::CommOnly, Objective::Power) => power(comm_only_power_min(&pspec(), opts)?),
        (Scheme::Hd, Objective::Power) => {
            let r = hd_power_min(scenario, th.rad, &vec![th.dl; l], &vec![th.ul; k], opts)?;
            hd(r, r.p_avg)
        }
        (Scheme::Alg2, Objective::Power) => {
            let o = ao_special_case(scenario, th.rad, &vec![th.ul; k], opts)?;
            let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
            Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }
        }
        (Scheme::Fd | Scheme::Alg3, Objective::Rate) => rate(sca_rate_max(&rspec(), opts)?),
        (Scheme::CommOnly, Objective::Rate) => rate(comm_only_rate_max(&rspec(), opts)?),
        (Scheme::Hd, Objective::Rate) => {
            let r = hd_rate_max(scenario, th.rad, opts)?;
            hd(r, r.r_avg)
        }
        (s, _) => return Err(Error::Config(format!("scheme {s} does not apply to this experiment"))),
    })
}

struct Job {
    point: usize,
    sweep_value: f64,
    trial: usize,
    scenario_cfg: ScenarioConfig,
    thresholds: Thresholds,
}

fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

fn record(job: &Job, seed: u64, scheme: Scheme, result: Result<Measured>, wall_ms: f64, th: &Linear) -> RunRecord {
    let (m, status) = match result {
        Ok(m) => (m, "ok".to_string()),
        Err(e) => {
            log::info!("trial {} ({scheme}, sweep {}) failed: {e}", job.trial, job.sweep_value);
            let m = match &e {
                Error::IterationLimit { best, .. } => from_best(best, th),
                _ => nan_measured(),
            };
            (m, e.status_label().to_string())
        }
    };
    RunRecord {
        trial: job.trial,
        seed,
        sweep_value: job.sweep_value,
        scheme,
        objective: m.objective,
        radar_slack: m.radar_slack,
        min_ul_slack: m.min_ul_slack,
        min_dl_slack: m.min_dl_slack,
        iterations: m.iterations,
        wall_ms,
        mean_iter_ms: m.mean_iter_ms,
        status,
    }
}

fn run_jobs(jobs: &[Job], schemes: &[Scheme], objective: Objective, opts: &ScaOptions) -> Vec<(usize, RunRecord)> {
    let pairs: Vec<(usize, Scheme)> =
        (0..jobs.len()).flat_map(|j| schemes.iter().map(move |&s| (j, s))).collect();
    let mut out: Vec<(usize, usize, RunRecord)> = pairs
        .par_iter()
        .enumerate()
        .map(|(order, &(j, scheme))| {
            let job = &jobs[j];
            let th = Linear::from(&job.thresholds);
            let seed = job.scenario_cfg.seed;
            let started = Instant::now();
            let result = generate_scenario(&job.scenario_cfg).and_then(|s| run_scheme(scheme, objective, &s, &th, opts));
            let wall = started.elapsed().as_secs_f64() * 1e3;
            (job.point, order, record(job, seed, scheme, result, wall, &th))
        })
        .collect();
    out.sort_by_key(|(p, order, _)| (*p, *order));
    out.into_iter().map(|(p, _, r)| (p, r)).collect()
}

/// Group by (sweep value, scheme) in first-seen order; means over `ok` rows.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(u64, Scheme)> = Vec::new();
    let mut groups: BTreeMap<(u64, Scheme), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.sweep_value.to_bits(), r.scheme);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<&&RunRecord> = rows.iter().filter(|r| r.ok()).collect();
            SummaryRow {
                sweep_value: f64::from_bits(key.0),
                scheme: key.1,
                mean_objective: mean(&ok.iter().map(|r| r.objective).collect::<Vec<_>>()),
                feasibility_rate: ok.len() as f64 / rows.len() as f64,
                mean_iters: mean(&ok.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
                mean_solve_ms: mean(&ok.iter().map(|r| r.mean_iter_ms).collect::<Vec<_>>()),
                trials: rows.len(),
            }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

pub fn write_raw_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "trial", "seed", "sweep_value", "scheme", "objective", "radar_slack", "min_ul_slack", "min_dl_slack",
        "iterations", "wall_ms", "mean_iter_ms", "status",
    ])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_sig(r.sweep_value),
            r.scheme.to_string(),
            fmt_sig(r.objective),
            fmt_sig(r.radar_slack),
            fmt_sig(r.min_ul_slack),
            fmt_sig(r.min_dl_slack),
            r.iterations.to_string(),
            fmt_sig(r.wall_ms),
            fmt_sig(r.mean_iter_ms),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sweep_value", "scheme", "mean_objective", "feasibility_rate", "mean_iters", "mean_solve_ms", "note"])?;
    for r in rows {
        let note = if r.feasibility_rate < 1.0 {
            format!("{} of {} trials infeasible or unconverged", ((1.0 - r.feasibility_rate) * r.trials as f64).round(), r.trials)
        } else {
            String::new()
        };
        w.write_record([
            fmt_sig(r.sweep_value),
            r.scheme.to_string(),
            fmt_sig(r.mean_objective),
            fmt_sig(r.feasibility_rate),
            fmt_sig(r.mean_iters),
            fmt_sig(r.mean_solve_ms),
            note,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_beampattern_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["angle_deg", "gain_db"])?;
    for (a, g) in rows {
        w.write_record([fmt_sig(*a), fmt_sig(*g)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_roc_csv(path: &Path, rows: &[RocPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["p_fa", "sinr_db", "p_d"])?;
    for r in rows {
        w.write_record([fmt_sig(r.p_fa), fmt_sig(r.sinr_db), fmt_sig(r.p_d)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace_csv(path: &Path, rows: &[TraceRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["trial", "method", "iter", "objective", "solve_ms"])?;
    for r in rows {
        w.write_record([r.trial.to_string(), r.method.to_string(), r.iter.to_string(), fmt_sig(r.objective), fmt_sig(r.solve_ms)])?;
    }
    w.flush()?;
    Ok(())
}

fn trial_jobs(cfg: &ExperimentConfig, point: usize, sweep_value: f64, scenario: &ScenarioConfig, th: Thresholds) -> Vec<Job> {
    (0..cfg.trials)
        .map(|trial| Job {
            point,
            sweep_value,
            trial,
            scenario_cfg: ScenarioConfig { seed: trial_seed(scenario.seed, trial), ..scenario.clone() },
            thresholds: th,
        })
        .collect()
}

fn strip_timing(report: &mut ExperimentReport) {
    for r in &mut report.records {
        r.wall_ms = f64::NAN;
        r.mean_iter_ms = f64::NAN;
    }
    for t in &mut report.traces {
        t.solve_ms = f64::NAN;
    }
}

/// Run one experiment and write its CSV files into `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let opts = ScaOptions { solver: SolverSettings::default(), ..config.sca.options() };
    let kind = config.experiment;
    let mut report = ExperimentReport::default();

    match kind {
        ExperimentKind::PowerMin | ExperimentKind::RateMax | ExperimentKind::SpecialCase => {
            let (objective, schemes, sweep_value, scenario) = match kind {
                ExperimentKind::PowerMin => {
                    (Objective::Power, config.schemes.schemes(), config.thresholds.tau_rad_db, config.scenario.clone())
                }
                ExperimentKind::RateMax => {
                    (Objective::Rate, config.schemes.schemes(), config.scenario.si.alpha_db, config.scenario.clone())
                }
                _ => {
                    let mut s = config.scenario.clone();
                    s.users.l = 0;
                    (Objective::Power, vec![Scheme::Alg1, Scheme::Alg2], config.thresholds.tau_rad_db, s)
                }
            };
            let jobs = trial_jobs(config, 0, sweep_value, &scenario, config.thresholds);
            report.records = run_jobs(&jobs, &schemes, objective, &opts).into_iter().map(|(_, r)| r).collect();
        }
        ExperimentKind::SweepTauRad | ExperimentKind::SweepAlphaSi => {
            let mut jobs = Vec::new();
            for (point, &v) in config.sweep_grid().iter().enumerate() {
                let mut scenario = config.scenario.clone();
                let mut th = config.thresholds;
                if kind == ExperimentKind::SweepTauRad {
                    th.tau_rad_db = v;
                } else {
                    scenario.si.alpha_db = v;
                }
                jobs.extend(trial_jobs(config, point, v, &scenario, th));
            }
            let objective = if kind == ExperimentKind::SweepTauRad { Objective::Power } else { Objective::Rate };
            report.records =
                run_jobs(&jobs, &config.schemes.schemes(), objective, &opts).into_iter().map(|(_, r)| r).collect();
        }
        ExperimentKind::Beampattern => {
            let th = Linear::from(&config.thresholds);
            let grid = default_angle_grid();
            let runs: Vec<(RunRecord, Option<Vec<f64>>)> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = trial_seed(config.scenario.seed, trial);
                    let job = Job {
                        point: 0,
                        sweep_value: config.thresholds.tau_rad_db,
                        trial,
                        scenario_cfg: ScenarioConfig { seed, ..config.scenario.clone() },
                        thresholds: config.thresholds,
                    };
                    let started = Instant::now();
                    let run = generate_scenario(&job.scenario_cfg).and_then(|s| {
                        let (tx, rx, m) = match config.design {
                            BeampatternDesign::PowerMin => {
                                let spec = PowerMinSpec::from_db(
                                    s.clone(),
                                    config.thresholds.tau_rad_db,
                                    config.thresholds.tau_ul_db,
                                    config.thresholds.tau_dl_db,
                                );
                                let o = sca_power_min(&spec, &opts)?;
                                let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
                                let m = Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() };
                                (o.tx, o.rx, m)
                            }
                            BeampatternDesign::RateMax => {
                                let o = sca_rate_max(&RateMaxSpec { scenario: s.clone(), tau_rad: th.rad }, &opts)?;
                                let m = Measured {
                                    objective: o.sum_rate,
                                    radar_slack: o.report.radar / th.rad - 1.0,
                                    iterations: o.iterations(),
                                    mean_iter_ms: o.mean_iteration_ms(),
                                    ..nan_measured()
                                };
                                (o.tx, o.rx, m)
                            }
                        };
                        Ok((beampattern_gain(&tx, &rx, &s, &grid), m))
                    });
                    let wall = started.elapsed().as_secs_f64() * 1e3;
                    match run {
                        Ok((gains, m)) => (record(&job, seed, Scheme::Fd, Ok(m), wall, &th), Some(gains)),
                        Err(e) => (record(&job, seed, Scheme::Fd, Err(e), wall, &th), None),
                    }
                })
                .collect();
            let ok: Vec<&Vec<f64>> = runs.iter().filter_map(|(_, g)| g.as_ref()).collect();
            if !ok.is_empty() {
                report.beampattern = grid
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| (a, linear_to_db(ok.iter().map(|g| g[i]).sum::<f64>() / ok.len() as f64)))
                    .collect();
            }
            report.records = runs.into_iter().map(|(r, _)| r).collect();
        }
        ExperimentKind::Roc => {
            let r = &config.roc;
            report.roc = roc_table(&r.sinr_db, &log_pfa_grid(r.log10_pfa_min, r.log10_pfa_max, r.points))?;
        }
        ExperimentKind::Convergence => {
            let th = Linear::from(&config.thresholds);
            let runs: Vec<(Vec<RunRecord>, Vec<TraceRecord>)> = (0..config.trials)
                .into_par_iter()
                .map(|trial| convergence_trial(config, trial, &th, &opts))
                .collect();
            for (recs, traces) in runs {
                report.records.extend(recs);
                report.traces.extend(traces);
            }
        }
    }

    if !config.record_timing {
        strip_timing(&mut report);
    }
    report.summary = summarize(&report.records);
    write_outputs(config, &mut report)?;
    Ok(report)
}

/// Power-min and rate-max SCA on the full instance; power-min SCA and the
/// alternating optimization on its downlink-free copy.
fn convergence_trial(config: &ExperimentConfig, trial: usize, th: &Linear, opts: &ScaOptions) -> (Vec<RunRecord>, Vec<TraceRecord>) {
    let seed = trial_seed(config.scenario.seed, trial);
    let cfg = ScenarioConfig { seed, ..config.scenario.clone() };
    let mut recs = Vec::new();
    let mut traces = Vec::new();
    let job = |sweep_value: f64| Job { point: 0, sweep_value, trial, scenario_cfg: cfg.clone(), thresholds: config.thresholds };
    let s = match generate_scenario(&cfg) {
        Ok(s) => s,
        Err(e) => {
            let j = job(f64::NAN);
            recs.push(record(&j, seed, Scheme::Alg1, Err(e), f64::NAN, th));
            return (recs, traces);
        }
    };
    let special = s.without_downlink();
    let k = s.k();
    let power_spec = |sc: &crate::scenario::Scenario| PowerMinSpec {
        scenario: sc.clone(),
        tau_rad: th.rad,
        tau_ul: vec![th.ul; k],
        tau_dl: vec![th.dl; sc.l()],
    };
    // sweep_value carries the number of downlink users of the instance
    for (method, sc) in [(Scheme::Alg1, &s), (Scheme::Alg1, &special), (Scheme::Alg2, &special), (Scheme::Alg3, &s)] {
        let started = Instant::now();
        let result: Result<(Measured, Vec<(usize, f64, f64)>)> = match method {
            Scheme::Alg1 => sca_power_min(&power_spec(sc), opts).map(|o| {
                let t = o.trace.iter().map(|r| (r.iter, r.objective, r.solve_ms)).collect();
                let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
                (Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }, t)
            }),
            Scheme::Alg2 => ao_special_case(sc, th.rad, &vec![th.ul; k], opts).map(|o| {
                let t = o.trace.iter().map(|r| (r.iter, r.objective, r.solve_ms)).collect();
                let (r, u, d) = slacks(&o.report, th.rad, th.ul, th.dl);
                (Measured { objective: o.objective(), radar_slack: r, min_ul_slack: u, min_dl_slack: d, iterations: o.iterations(), mean_iter_ms: o.mean_iteration_ms() }, t)
            }),
            _ => sca_rate_max(&RateMaxSpec { scenario: sc.clone(), tau_rad: th.rad }, opts).map(|o| {
                let t = o.trace.iter().map(|r| (r.iter, r.sum_rate, r.solve_ms)).collect();
                (
                    Measured {
                        objective: o.sum_rate,
                        radar_slack: o.report.radar / th.rad - 1.0,
                        iterations: o.iterations(),
                        mean_iter_ms: o.mean_iteration_ms(),
                        ..nan_measured()
                    },
                    t,
                )
            }),
        };
        let wall = started.elapsed().as_secs_f64() * 1e3;
        let j = job(sc.l() as f64);
        match result {
            Ok((m, t)) => {
                traces.extend(t.into_iter().map(|(iter, objective, solve_ms)| TraceRecord { trial, method, iter, objective, solve_ms }));
                recs.push(record(&j, seed, method, Ok(m), wall, th));
            }
            Err(e) => recs.push(record(&j, seed, method, Err(e), wall, th)),
        }
    }
    (recs, traces)
}

fn write_outputs(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    fs::create_dir_all(&config.out_dir)?;
    let name = config.experiment.label();
    let path = |suffix: &str| config.out_dir.join(format!("{name}_{suffix}.csv"));
    if config.experiment == ExperimentKind::Roc {
        let p = config.out_dir.join("roc.csv");
        write_roc_csv(&p, &report.roc)?;
        report.files.push(p);
        return Ok(());
    }
    let raw = path("raw");
    write_raw_csv(&raw, &report.records)?;
    let summary = path("summary");
    write_summary_csv(&summary, &report.summary)?;
    report.files.extend([summary, raw]);
    if config.experiment == ExperimentKind::Beampattern {
        let p = config.out_dir.join("beampattern.csv");
        write_beampattern_csv(&p, &report.beampattern)?;
        report.files.push(p);
    }
    if config.experiment == ExperimentKind::Convergence {
        let p = path("trace");
        write_trace_csv(&p, &report.traces)?;
        report.files.push(p);
    }
    Ok(())
}
