use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lostsales::analysis::{verify_lemmas, LemmaSuite};
use lostsales::config::ExperimentConfig;
use lostsales::demand::{estimate_depletion_time, DEFAULT_DEPLETION_STEP_CAP};
use lostsales::harness::{self, OracleSummary, RegretReport};
use lostsales::inventory::{simulate_base_stock, write_trajectory_csv, PipelineState};
use lostsales::rng::{Purpose, Streams};
use lostsales::Result;

#[derive(Parser)]
#[command(
    name = "lostsales",
    version,
    about = "Lost-sales inventory learning experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config replication count.
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Overrides the confidence-width scale.
    #[arg(long, global = true)]
    h_scale: Option<f64>,
    /// Adds the demand column to trace and trajectory CSVs.
    #[arg(long, global = true)]
    expose_demand: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner and write regret.csv and trace.csv.
    Run,
    /// Run a fixed base-stock level and write regret.csv.
    Baseline {
        #[arg(long)]
        level: f64,
    },
    /// Scan the oracle grid and write loss_curve.csv.
    Oracle,
    /// Randomised checks of the coupling bounds.
    VerifyLemmas {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Estimate the expected number of periods to sell one unit.
    Depletion {
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Write one base-stock trajectory to trajectory.csv.
    Simulate {
        #[arg(long)]
        level: f64,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_deref().ok_or_else(|| {
        lostsales::Error::InvalidParameter("this command needs --config PATH".into())
    })?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(r) = common.replications {
        cfg.replications = r;
    }
    if let Some(h) = common.h_scale {
        cfg.h_scale = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &RegretReport) {
    let o = &report.oracle;
    println!("x* = {}  g* = {}  lambda* = {}", o.level, o.loss, o.lambda);
    println!("checkpoint,mean_regret_true,stderr,mean_regret_pseudo,mean_regret_pathwise");
    for r in &report.rows {
        println!(
            "{},{:.4},{:.4},{:.4},{:.4}",
            r.checkpoint,
            r.mean_regret_true,
            r.stderr,
            r.mean_regret_pseudo,
            r.mean_regret_pathwise
        );
    }
}

fn written(out: &Path, name: &str) {
    println!("wrote {}", out.join(name).display());
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    match cli.command {
        Command::Run => {
            let cfg = load(common)?;
            let report = harness::run_experiment(&cfg)?;
            harness::write_outputs(&cfg, &report, &common.out, true, common.expose_demand)?;
            print_report(&report);
            let flagged = report
                .replications
                .iter()
                .filter(|r| r.epoch_bound_exceeded)
                .count();
            if flagged > 0 {
                eprintln!("warning: {flagged} replications exceeded the epoch bound");
            }
            written(&common.out, "regret.csv");
            written(&common.out, "trace.csv");
        }
        Command::Baseline { level } => {
            let cfg = load(common)?;
            let report = harness::run_baseline(&cfg, level)?;
            harness::write_outputs(&cfg, &report, &common.out, false, false)?;
            print_report(&report);
            written(&common.out, "regret.csv");
        }
        Command::Oracle => {
            let cfg = load(common)?;
            let oracle = OracleSummary::compute(&cfg)?;
            std::fs::create_dir_all(&common.out)?;
            let file = std::fs::File::create(common.out.join("loss_curve.csv"))?;
            harness::write_loss_curve_csv(
                &oracle.curve,
                cfg.params.penalty(),
                cfg.demand.mean(),
                file,
            )?;
            println!(
                "x* = {}  g* = {}  lambda* = {}",
                oracle.level, oracle.loss, oracle.lambda
            );
            written(&common.out, "loss_curve.csv");
        }
        Command::VerifyLemmas { trials } => {
            let suite = LemmaSuite {
                coupling_trials: trials,
                lipschitz_trials: trials,
                seed: common.seed.unwrap_or(0),
                ..LemmaSuite::default()
            };
            let report = verify_lemmas(&suite);
            for c in &report.checks {
                println!(
                    "{} {}: {} violations in {} trials, worst ratio {:.4}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.violations,
                    c.trials,
                    c.worst_ratio
                );
            }
            return Ok(report.passed());
        }
        Command::Depletion { samples } => {
            let cfg = load(common)?;
            let mut rng = Streams::new(cfg.seed).stream(Purpose::Depletion, 0);
            let est = estimate_depletion_time(
                &cfg.demand,
                &mut rng,
                samples,
                DEFAULT_DEPLETION_STEP_CAP,
            )?;
            println!(
                "D = {:.6} (std err {:.6}, {} samples)",
                est.mean, est.std_err, est.replications
            );
        }
        Command::Simulate { level } => {
            let cfg = load(common)?;
            let mut rng = Streams::new(cfg.seed).stream(Purpose::Demand, 0);
            let start = PipelineState::empty(cfg.lead_time);
            let records = simulate_base_stock(
                level,
                &start,
                cfg.horizon as usize,
                &cfg.params,
                &cfg.demand,
                &mut rng,
            );
            std::fs::create_dir_all(&common.out)?;
            let file = std::fs::File::create(common.out.join("trajectory.csv"))?;
            write_trajectory_csv(&records, file, common.expose_demand)?;
            written(&common.out, "trajectory.csv");
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
