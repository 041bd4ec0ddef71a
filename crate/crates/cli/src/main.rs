use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fdisac::experiments::{
    fmt_sig, parse_grid, run_experiment, BeampatternDesign, ExperimentConfig, ExperimentKind, ExperimentReport,
    SchemeSelection,
};

#[derive(Parser, Debug)]
#[command(name = "fdisac", version, about = "Monte Carlo experiments for full-duplex ISAC beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmit power minimization.
    PowerMin(Common),
    /// Sum-rate maximization.
    RateMax(Common),
    /// The downlink-free case, solved by both power algorithms.
    SpecialCase(Common),
    /// Power-vs-radar-threshold or rate-vs-self-interference sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// sweep_tau_rad or sweep_alpha_si
        #[arg(long)]
        experiment: ExperimentKind,
        /// start:step:stop (inclusive, optional dB suffix) or a comma list
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Receive-side beampattern of converged designs, averaged over trials.
    Beampattern {
        #[command(flatten)]
        common: Common,
        /// power_min or rate_max
        #[arg(long)]
        design: Option<BeampatternDesign>,
    },
    /// Detection probability table for a nonfluctuating target.
    Roc {
        #[command(flatten)]
        common: Common,
        /// Radar SINRs in dB, comma separated
        #[arg(long, allow_hyphen_values = true)]
        sinr_db: Option<String>,
    },
    /// Per-iteration objective traces of the three algorithms.
    Convergence(Common),
    /// Print the effective configuration as TOML and exit.
    Config(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; trial i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Relative objective change that stops the SCA loops
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// fd, hd, comm_only or all
    #[arg(long)]
    scheme: Option<SchemeSelection>,
    #[arg(long, allow_hyphen_values = true)]
    tau_rad_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_ul_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_dl_db: Option<f64>,
    /// Self-interference level in dB
    #[arg(long, allow_hyphen_values = true)]
    alpha_si_db: Option<f64>,
    /// Write wall-clock columns as NaN so repeated runs are byte-identical
    #[arg(long)]
    no_timing: bool,
    /// Worker threads for the trial pool (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn build(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        c.experiment = kind;
        if let Some(v) = self.seed {
            c.scenario.seed = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.epsilon {
            c.sca.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            c.sca.max_iters = v;
        }
        if let Some(v) = self.scheme {
            c.schemes = v;
        }
        if let Some(v) = self.tau_rad_db {
            c.thresholds.tau_rad_db = v;
        }
        if let Some(v) = self.tau_ul_db {
            c.thresholds.tau_ul_db = v;
        }
        if let Some(v) = self.tau_dl_db {
            c.thresholds.tau_dl_db = v;
        }
        if let Some(v) = self.alpha_si_db {
            c.scenario.si.alpha_db = v;
        }
        if self.no_timing {
            c.record_timing = false;
        }
        Ok(c)
    }
}

fn print_report(cfg: &ExperimentConfig, report: &ExperimentReport) {
    if !report.summary.is_empty() {
        println!("{:>12}  {:<10} {:>16} {:>9} {:>8} {:>10}", "sweep", "scheme", "mean_objective", "feasible", "iters", "ms/iter");
        for r in &report.summary {
            println!(
                "{:>12}  {:<10} {:>16} {:>9} {:>8} {:>10}",
                fmt_sig(r.sweep_value),
                r.scheme.to_string(),
                fmt_sig(r.mean_objective),
                format!("{:.0}%", 100.0 * r.feasibility_rate),
                format!("{:.1}", r.mean_iters),
                format!("{:.1}", r.mean_solve_ms),
            );
        }
    }
    if cfg.experiment == ExperimentKind::Beampattern {
        if let Some((a, g)) = report.beampattern.iter().copied().max_by(|x, y| x.1.total_cmp(&y.1)) {
            println!("beampattern peak {} dB at {} deg", fmt_sig(g), fmt_sig(a));
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (common, cfg) = match &cli.command {
        Command::PowerMin(c) => (c, c.build(ExperimentKind::PowerMin)?),
        Command::RateMax(c) => (c, c.build(ExperimentKind::RateMax)?),
        Command::SpecialCase(c) => (c, c.build(ExperimentKind::SpecialCase)?),
        Command::Convergence(c) => (c, c.build(ExperimentKind::Convergence)?),
        Command::Sweep { common, experiment, grid } => {
            if !matches!(experiment, ExperimentKind::SweepTauRad | ExperimentKind::SweepAlphaSi) {
                bail!("--experiment must be sweep_tau_rad or sweep_alpha_si");
            }
            let mut cfg = common.build(*experiment)?;
            if let Some(g) = grid {
                cfg.grid = Some(parse_grid(g)?);
            }
            (common, cfg)
        }
        Command::Beampattern { common, design } => {
            let mut cfg = common.build(ExperimentKind::Beampattern)?;
            if let Some(d) = design {
                cfg.design = *d;
            }
            (common, cfg)
        }
        Command::Roc { common, sinr_db } => {
            let mut cfg = common.build(ExperimentKind::Roc)?;
            if let Some(list) = sinr_db {
                cfg.roc.sinr_db = list
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad SINR value '{s}'")))
                    .collect::<Result<_>>()?;
            }
            (common, cfg)
        }
        Command::Config(c) => {
            let cfg = c.build(ExperimentKind::PowerMin)?;
            print!("{}", cfg.to_toml());
            return Ok(());
        }
    };

    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    print_report(&cfg, &report);
    Ok(())
}
