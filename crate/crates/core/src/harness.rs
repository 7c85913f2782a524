//! Experiment runner: oracle, replications, and regret accounting.
//!
//! Every replication draws its demand from its own stream and feeds the same
//! draw to three consumers in lockstep: the controller under test (learner or
//! fixed level), and a shadow base-stock policy at the oracle level `x*` for
//! the pathwise benchmark. Regret is reported three ways:
//!
//! - true: `sum C̄_t - t lambda*`
//! - pseudo: `sum C_t - t g*`, split into drain steps and play steps
//! - pathwise: `sum (C̄_t - C̄_t^{x*})` against the shadow run

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{
    argmin_level, lambda_from_loss, loss_curve, mean_and_std_err, ChainSettings, LossEstimate,
    LossOracle,
};
use crate::config::{ExperimentConfig, OracleKind};
use crate::error::{Error, Result};
use crate::inventory::{BaseStockRun, PipelineState};
use crate::learner::{Interval, Learner, Observation, Phase, RoundSummary};
use crate::rng::{Purpose, Streams};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    /// `x*`
    pub level: f64,
    /// `g*`
    pub loss: f64,
    /// `lambda* = g* + p mu`
    pub lambda: f64,
    pub curve: Vec<LossEstimate>,
}

impl OracleSummary {
    pub fn loss_oracle(config: &ExperimentConfig) -> LossOracle {
        match config.oracle {
            OracleKind::ExactChain => LossOracle::ExactChain(ChainSettings::default()),
            OracleKind::MonteCarlo(settings) => LossOracle::MonteCarlo {
                settings,
                seed: config.seed,
            },
        }
    }

    pub fn compute(config: &ExperimentConfig) -> Result<Self> {
        let grid = config.oracle_grid();
        let curve = loss_curve(
            &config.demand,
            config.lead_time,
            &config.params,
            &grid,
            &Self::loss_oracle(config),
        )?;
        let best = argmin_level(&curve);
        check_bracketed(&grid, best, config.upper)?;
        let loss = curve[best].g_hat;
        Ok(Self {
            level: curve[best].level,
            loss,
            lambda: lambda_from_loss(&curve[best], config.params.penalty(), config.demand.mean()),
            curve,
        })
    }

    /// Oracle from an externally known optimum, skipping the grid scan.
    pub fn known(level: f64, loss: f64, config: &ExperimentConfig) -> Self {
        Self {
            level,
            loss,
            lambda: loss + config.params.penalty() * config.demand.mean(),
            curve: Vec::new(),
        }
    }
}

/// A grid minimum on an edge that sits strictly inside `[0, upper]` means the
/// grid stopped short of the true minimiser.
pub fn check_bracketed(grid: &[f64], best: usize, upper: f64) -> Result<()> {
    let tol = 1e-9 * upper.max(1.0);
    let at_low_edge = best == 0 && grid[0] > tol;
    let at_high_edge = best + 1 == grid.len() && grid[best] < upper - tol;
    if grid.len() > 1 && (at_low_edge || at_high_edge) {
        return Err(Error::OracleNotBracketed {
            level: grid[best],
            upper,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Learner,
    Fixed(f64),
}

/// Cumulative sums for one replication at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckpointSums {
    pub step: u64,
    pub regret_true: f64,
    pub regret_pseudo: f64,
    pub regret_pathwise: f64,
    /// Pseudo-cost regret accrued in drain steps.
    pub regret0: f64,
    /// Pseudo-cost regret accrued in play steps.
    pub regret1: f64,
    pub drain_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: u64,
    pub checkpoints: Vec<CheckpointSums>,
    pub total_true_cost: f64,
    pub total_pseudo_cost: f64,
    pub total_demand: f64,
    pub final_interval: Option<Interval>,
    pub epochs: u32,
    pub epoch_bound_exceeded: bool,
    pub rounds: Vec<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub phase: Option<Phase>,
    pub epoch: u32,
    pub round: u32,
    pub probe_level: Option<f64>,
    pub order: f64,
    pub pseudo_cost: f64,
    pub demand: f64,
    /// Interval after the round that ended on this step.
    pub round_end: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub checkpoint: u64,
    pub mean_regret_true: f64,
    pub mean_regret_pseudo: f64,
    pub mean_regret_pathwise: f64,
    /// Standard error of the true-cost regret.
    pub stderr: f64,
    pub stderr_pseudo: f64,
    pub stderr_pathwise: f64,
    pub regret0: f64,
    pub regret1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub controller: Controller,
    pub oracle: OracleSummary,
    pub rows: Vec<ReportRow>,
    pub replications: Vec<ReplicationOutcome>,
}

impl RegretReport {
    pub fn final_row(&self) -> &ReportRow {
        self.rows.last().expect("at least one checkpoint")
    }

    /// Drain lengths of every completed round across replications.
    pub fn drain_lengths(&self) -> Vec<u64> {
        self.replications
            .iter()
            .flat_map(|r| r.rounds.iter().map(|s| s.drain_steps))
            .collect()
    }

    /// Fraction of learner replications whose final interval holds `x*`.
    pub fn interval_coverage(&self) -> f64 {
        let hits = self
            .replications
            .iter()
            .filter(|r| {
                r.final_interval
                    .is_some_and(|i| i.contains(self.oracle.level))
            })
            .count();
        hits as f64 / self.replications.len() as f64
    }

    pub fn write_regret_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "checkpoint",
            "mean_regret_true",
            "mean_regret_pseudo",
            "mean_regret_pathwise",
            "stderr",
            "regret0",
            "regret1",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.checkpoint.to_string(),
                r.mean_regret_true.to_string(),
                r.mean_regret_pseudo.to_string(),
                r.mean_regret_pathwise.to_string(),
                r.stderr.to_string(),
                r.regret0.to_string(),
                r.regret1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W, expose_demand: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "step",
        "phase",
        "epoch",
        "round",
        "probe_level",
        "order",
        "pseudo_cost",
        "interval_left",
        "interval_right",
    ];
    if expose_demand {
        header.push("demand");
    }
    w.write_record(&header)?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            r.step.to_string(),
            r.phase
                .map(|p| p.to_string())
                .unwrap_or_else(|| "fixed".into()),
            r.epoch.to_string(),
            r.round.to_string(),
            opt(r.probe_level),
            r.order.to_string(),
            r.pseudo_cost.to_string(),
            opt(r.round_end.map(|i| i.left)),
            opt(r.round_end.map(|i| i.right)),
        ];
        if expose_demand {
            row.push(r.demand.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `x, g_hat, std_err, lambda_hat` for every point of the oracle curve.
pub fn write_loss_curve_csv<W: Write>(
    curve: &[LossEstimate],
    penalty: f64,
    mean_demand: f64,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "g_hat", "std_err", "lambda_hat"])?;
    for e in curve {
        w.write_record([
            e.level.to_string(),
            e.g_hat.to_string(),
            e.std_err.to_string(),
            lambda_from_loss(e, penalty, mean_demand).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one replication. The trace is filled only when `trace` is given.
pub fn run_replication(
    config: &ExperimentConfig,
    oracle: &OracleSummary,
    controller: Controller,
    index: u64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<ReplicationOutcome> {
    let params = &config.params;
    let mut rng = Streams::new(config.seed).stream(Purpose::Demand, index);
    let mut env = PipelineState::empty(config.lead_time);
    let mut shadow = BaseStockRun::new(oracle.level, PipelineState::empty(config.lead_time));
    let mut learner = match controller {
        Controller::Learner => Some(Learner::new(config.learner_config()?)),
        Controller::Fixed(_) => None,
    };

    let mut sums = CheckpointSums::default();
    let mut total_true = 0.0;
    let mut total_pseudo = 0.0;
    let mut total_shadow = 0.0;
    let mut total_demand = 0.0;
    let mut checkpoints = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = config.checkpoints.iter().copied().peekable();

    for t in 1..=config.horizon {
        let demand = config.demand.sample(&mut rng);
        let (order, phase, probe) = match (&mut learner, controller) {
            (Some(l), _) => {
                let order = l.next_order(Observation::of(&env))?;
                (order, Some(l.phase()), l.active_probe())
            }
            (None, Controller::Fixed(x)) => ((x - env.position()).max(0.0), None, Some(x)),
            (None, Controller::Learner) => unreachable!(),
        };
        let epoch_round = learner
            .as_ref()
            .map(|l| (l.epoch(), l.round()))
            .unwrap_or((0, 0));
        let record = env.advance(order, demand, params);
        let shadow_record = shadow.step(demand, params);
        let round_end = match &mut learner {
            Some(l) => l
                .record_cost(record.sales, record.on_hand_pre_demand)?
                .map(|s| s.after),
            None => None,
        };

        total_true += record.true_cost;
        total_pseudo += record.pseudo_cost;
        total_shadow += shadow_record.true_cost;
        total_demand += demand;
        let excess = record.pseudo_cost - oracle.loss;
        if phase == Some(Phase::Drain) {
            sums.regret0 += excess;
            sums.drain_steps += 1;
        } else {
            sums.regret1 += excess;
        }

        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                step: t,
                phase,
                epoch: epoch_round.0,
                round: epoch_round.1,
                probe_level: probe,
                order,
                pseudo_cost: record.pseudo_cost,
                demand,
                round_end,
            });
        }

        if next_checkpoint.peek() == Some(&t) {
            next_checkpoint.next();
            let tf = t as f64;
            sums.step = t;
            sums.regret_true = total_true - tf * oracle.lambda;
            sums.regret_pseudo = total_pseudo - tf * oracle.loss;
            sums.regret_pathwise = total_true - total_shadow;
            checkpoints.push(sums);
        }
    }

    Ok(ReplicationOutcome {
        index,
        checkpoints,
        total_true_cost: total_true,
        total_pseudo_cost: total_pseudo,
        total_demand,
        final_interval: learner.as_ref().map(Learner::interval),
        epochs: learner.as_ref().map_or(0, Learner::epoch),
        epoch_bound_exceeded: learner.as_ref().is_some_and(Learner::epoch_bound_exceeded),
        rounds: learner.map(|l| l.history().to_vec()).unwrap_or_default(),
    })
}

/// Replications in parallel, aggregated in index order so the report is
/// bit-identical for a given config and seed.
pub fn run_with_oracle(
    config: &ExperimentConfig,
    oracle: &OracleSummary,
    controller: Controller,
) -> Result<RegretReport> {
    config.validate()?;
    let replications: Vec<ReplicationOutcome> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(config, oracle, controller, r, None))
        .collect::<Result<_>>()?;

    let rows = config
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &checkpoint)| {
            let column = |f: fn(&CheckpointSums) -> f64| -> Vec<f64> {
                replications.iter().map(|r| f(&r.checkpoints[k])).collect()
            };
            let (mean_true, se_true) = mean_and_std_err(&column(|c| c.regret_true));
            let (mean_pseudo, se_pseudo) = mean_and_std_err(&column(|c| c.regret_pseudo));
            let (mean_path, se_path) = mean_and_std_err(&column(|c| c.regret_pathwise));
            let (regret0, _) = mean_and_std_err(&column(|c| c.regret0));
            let (regret1, _) = mean_and_std_err(&column(|c| c.regret1));
            ReportRow {
                checkpoint,
                mean_regret_true: mean_true,
                mean_regret_pseudo: mean_pseudo,
                mean_regret_pathwise: mean_path,
                stderr: se_true,
                stderr_pseudo: se_pseudo,
                stderr_pathwise: se_path,
                regret0,
                regret1,
            }
        })
        .collect();

    Ok(RegretReport {
        controller,
        oracle: oracle.clone(),
        rows,
        replications,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretReport> {
    let oracle = OracleSummary::compute(config)?;
    run_with_oracle(config, &oracle, Controller::Learner)
}

pub fn run_baseline(config: &ExperimentConfig, level: f64) -> Result<RegretReport> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "baseline level must be nonnegative, got {level}"
        )));
    }
    let oracle = OracleSummary::compute(config)?;
    run_with_oracle(config, &oracle, Controller::Fixed(level))
}

/// Writes `regret.csv`, and `trace.csv` for replication 0 when requested.
pub fn write_outputs(
    config: &ExperimentConfig,
    report: &RegretReport,
    out_dir: &Path,
    with_trace: bool,
    expose_demand: bool,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    report.write_regret_csv(std::fs::File::create(out_dir.join("regret.csv"))?)?;
    if with_trace {
        let mut rows = Vec::new();
        run_replication(
            config,
            &report.oracle,
            report.controller,
            0,
            Some(&mut rows),
        )?;
        write_trace_csv(
            &rows,
            std::fs::File::create(out_dir.join("trace.csv"))?,
            expose_demand,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandModel;
    use crate::inventory::CostParams;

    fn reference(lead: usize, horizon: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            DemandModel::scaled_bernoulli(0.5, 1.0).unwrap(),
            lead,
            2.0,
            horizon,
            CostParams::new(1.0, 4.0).unwrap(),
        )
        .unwrap();
        cfg.replications = 8;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn oracle_for_zero_lead_time() {
        // g^x = -1.5 x on [0, 1] and x - 2.5 on [1, 2].
        let o = OracleSummary::compute(&reference(0, 10)).unwrap();
        assert!((o.level - 1.0).abs() < 1e-12);
        assert!((o.loss + 1.5).abs() < 1e-12);
        assert!((o.lambda - 0.5).abs() < 1e-12);
        assert_eq!(o.curve.len(), 21);
    }

    #[test]
    fn bracketing_check() {
        assert!(check_bracketed(&[0.0, 1.0, 2.0], 2, 2.0).is_ok());
        assert!(check_bracketed(&[0.0, 1.0, 2.0], 0, 2.0).is_ok());
        assert!(matches!(
            check_bracketed(&[0.0, 0.5, 1.0], 2, 2.0),
            Err(Error::OracleNotBracketed { .. })
        ));
        assert!(matches!(
            check_bracketed(&[0.5, 1.0], 0, 2.0),
            Err(Error::OracleNotBracketed { .. })
        ));
    }

    #[test]
    fn horizon_within_lead_time_loses_all_demand() {
        let mut cfg = reference(3, 3);
        cfg.checkpoints = vec![3];
        let report = run_experiment(&cfg).unwrap();
        for r in &report.replications {
            assert!((r.total_true_cost - 4.0 * r.total_demand).abs() < 1e-12);
            assert_eq!(r.total_pseudo_cost, 0.0);
            let c = r.checkpoints[0];
            assert!(
                (c.regret_true - (4.0 * r.total_demand - 3.0 * report.oracle.lambda)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn zero_demand_charges_only_holding() {
        let mut cfg = reference(1, 200);
        cfg.demand = DemandModel::deterministic(0.0).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.oracle.level, 0.0);
        assert_eq!(report.oracle.lambda, 0.0);
        for r in &report.replications {
            // Nothing sells, so both costs are pure holding charges.
            assert!(r.total_true_cost > 0.0);
            assert!((r.total_true_cost - r.total_pseudo_cost).abs() < 1e-9);
            let c = r.checkpoints.last().unwrap();
            assert!((c.regret_true - r.total_true_cost).abs() < 1e-9);
            assert!((c.regret_pathwise - r.total_true_cost).abs() < 1e-9);
        }
    }

    #[test]
    fn regret_split_adds_up() {
        let report = run_experiment(&reference(1, 3_000)).unwrap();
        for r in &report.replications {
            for c in &r.checkpoints {
                assert!(
                    (c.regret0 + c.regret1 - c.regret_pseudo).abs()
                        < 1e-6 * (1.0 + c.regret_pseudo.abs())
                );
            }
        }
        let row = report.final_row();
        let se = (row.stderr.powi(2) + row.stderr_pseudo.powi(2)).sqrt();
        assert!((row.mean_regret_true - row.mean_regret_pseudo).abs() <= 3.0 * se + 1e-9);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = reference(2, 2_000);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_at_optimum_has_no_drain_regret() {
        let cfg = reference(1, 2_000);
        let oracle = OracleSummary::compute(&cfg).unwrap();
        let report = run_with_oracle(&cfg, &oracle, Controller::Fixed(oracle.level)).unwrap();
        assert!(report.rows.iter().all(|r| r.regret0 == 0.0));
        // Same policy and same demand as the shadow run.
        assert!(report.rows.iter().all(|r| r.mean_regret_pathwise == 0.0));
    }

    #[test]
    fn csv_outputs_have_headers() {
        let mut cfg = reference(1, 500);
        cfg.replications = 2;
        let report = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        report.write_regret_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "checkpoint,mean_regret_true,mean_regret_pseudo,mean_regret_pathwise,stderr,regret0,regret1\n"
        ));
        assert_eq!(text.lines().count(), 1 + cfg.checkpoints.len());

        let mut rows = Vec::new();
        run_replication(
            &cfg,
            &report.oracle,
            Controller::Learner,
            0,
            Some(&mut rows),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "step,phase,epoch,round,probe_level,order,pseudo_cost,interval_left,interval_right\n"
        ));
        assert!(!text.lines().next().unwrap().contains("demand"));
        assert_eq!(text.lines().count(), 501);
    }
}
