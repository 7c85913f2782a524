use std::process::Command;

use lostsales::config::ExperimentConfig;
use lostsales::demand::{estimate_depletion_time, DemandModel, DEFAULT_DEPLETION_STEP_CAP};
use lostsales::harness::{
    run_baseline, run_experiment, run_with_oracle, Controller, OracleSummary,
};
use lostsales::inventory::CostParams;
use lostsales::learner::LearnerConfig;
use lostsales::rng::{Purpose, Streams};

fn reference(lead: usize, horizon: u64, replications: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        DemandModel::scaled_bernoulli(0.5, 1.0).unwrap(),
        lead,
        2.0,
        horizon,
        CostParams::new(1.0, 4.0).unwrap(),
    )
    .unwrap();
    cfg.replications = replications;
    cfg.seed = 17;
    cfg
}

#[test]
fn horizon_equal_to_lead_time_charges_every_unit_of_demand() {
    for lead in 1..4 {
        let mut cfg = reference(lead, lead as u64, 400);
        cfg.checkpoints = vec![lead as u64];
        let report = run_experiment(&cfg).unwrap();
        let row = report.final_row();
        // E[true cost] = p L mu; regret = p L mu - L lambda*.
        let expected = 4.0 * lead as f64 * 0.5 - lead as f64 * report.oracle.lambda;
        assert!(
            (row.mean_regret_true - expected).abs() <= 3.0 * row.stderr + 1e-12,
            "{row:?}"
        );
        for r in &report.replications {
            assert!((r.total_true_cost - 4.0 * r.total_demand).abs() < 1e-12);
        }
    }
}

#[test]
fn optimum_baseline_beats_every_grid_baseline() {
    for lead in 0..3 {
        let cfg = reference(lead, 20_000, 4);
        let oracle = OracleSummary::compute(&cfg).unwrap();
        let best = run_with_oracle(&cfg, &oracle, Controller::Fixed(oracle.level)).unwrap();
        let best_regret = best.final_row().mean_regret_true;
        for e in oracle.curve.iter().step_by(2) {
            let x = e.level;
            // Levels on a flat stretch tie with the optimum.
            if e.g_hat - oracle.loss < 1e-6 {
                continue;
            }
            let other = run_with_oracle(&cfg, &oracle, Controller::Fixed(x)).unwrap();
            assert!(
                other.final_row().mean_regret_true > best_regret,
                "L={lead} x={x}"
            );
            assert!(
                other.final_row().mean_regret_pathwise > 0.0,
                "L={lead} x={x}"
            );
        }
    }
}

#[test]
fn zero_level_regret_grows_linearly() {
    let cfg = reference(1, 10_000, 4);
    let report = run_baseline(&cfg, 0.0).unwrap();
    // lambda^0 = p mu = 2.
    let gap = 2.0 - report.oracle.lambda;
    for row in report.rows.iter().filter(|r| r.checkpoint >= 1_000) {
        let per_step = row.mean_regret_true / row.checkpoint as f64;
        assert!((per_step - gap).abs() < 0.1 * gap, "{row:?}");
    }
}

#[test]
fn baseline_at_upper_end_matches_optimum_baseline() {
    // Demand 2 w.p. 0.9 and p >> h puts the optimum at U.
    let mut cfg = reference(0, 5_000, 3);
    cfg.demand = DemandModel::scaled_bernoulli(0.1, 2.0).unwrap();
    cfg.params = CostParams::new(1.0, 20.0).unwrap();
    let oracle = OracleSummary::compute(&cfg).unwrap();
    assert_eq!(oracle.level, cfg.upper);
    let at_u = run_baseline(&cfg, cfg.upper).unwrap();
    let at_star = run_with_oracle(&cfg, &oracle, Controller::Fixed(oracle.level)).unwrap();
    assert_eq!(at_u, at_star);
}

#[test]
fn optimum_baseline_regret_is_sublinear() {
    for lead in 0..3 {
        let mut cfg = reference(lead, 100_000, 8);
        cfg.checkpoints = vec![1_000, 10_000, 100_000];
        let oracle = OracleSummary::compute(&cfg).unwrap();
        let report = run_with_oracle(&cfg, &oracle, Controller::Fixed(oracle.level)).unwrap();
        let h = LearnerConfig::new(cfg.upper, lead, cfg.horizon, cfg.params, 1.0)
            .unwrap()
            .confidence_width();
        for row in &report.rows {
            let t = row.checkpoint as f64;
            assert!(row.mean_regret_true.abs() <= 3.0 * row.stderr + h * (t * t.ln()).sqrt());
            assert_eq!(row.mean_regret_pathwise, 0.0);
        }
        let last = report.final_row();
        assert!(
            last.mean_regret_true.abs() / 1e5 < 0.01,
            "L={lead}: {last:?}"
        );
    }
}

#[test]
fn true_and_pseudo_regret_agree() {
    for lead in 0..3 {
        let mut cfg = reference(lead, 20_000, 20);
        cfg.h_scale = 1e-3;
        let report = run_experiment(&cfg).unwrap();
        for row in &report.rows {
            let se = (row.stderr.powi(2) + row.stderr_pseudo.powi(2)).sqrt();
            assert!(
                (row.mean_regret_true - row.mean_regret_pseudo).abs() <= 3.0 * se + 1e-9,
                "L={lead}: {row:?}"
            );
            let split = row.regret0 + row.regret1;
            assert!(
                (split - row.mean_regret_pseudo).abs()
                    <= 1e-6 * (1.0 + row.mean_regret_pseudo.abs())
            );
        }
    }
}

#[test]
fn drain_lengths_within_depletion_bound() {
    let model = DemandModel::scaled_bernoulli(0.5, 1.0).unwrap();
    let mut rng = Streams::new(9).stream(Purpose::Depletion, 0);
    let d = estimate_depletion_time(&model, &mut rng, 100_000, DEFAULT_DEPLETION_STEP_CAP).unwrap();
    for lead in 0..4 {
        let mut cfg = reference(lead, 30_000, 10);
        cfg.h_scale = 1e-3;
        let report = run_experiment(&cfg).unwrap();
        let lengths: Vec<f64> = report
            .drain_lengths()
            .into_iter()
            .map(|n| n as f64)
            .collect();
        assert!(lengths.len() > 20);
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let var =
            lengths.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (lengths.len() - 1) as f64;
        let se = (var / lengths.len() as f64).sqrt();
        assert!(
            mean <= lead as f64 + d.mean * cfg.upper + 3.0 * se,
            "L={lead}: mean drain {mean}"
        );
    }
}

#[test]
fn cli_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "demand = scaled-bernoulli\ndemand.q0 = 0.5\ndemand.b = 1\nlead_time = 1\nupper = 2\n\
         horizon = 2000\nh = 1\np = 4\nreplications = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_lostsales");
    let run = |args: &[&str]| {
        let status = Command::new(bin)
            .args(args)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        String::from_utf8(status.stdout).unwrap()
    };

    run(&["run", "--h-scale", "0.01", "--seed", "4"]);
    let regret = std::fs::read_to_string(out.join("regret.csv")).unwrap();
    assert!(regret.starts_with("checkpoint,mean_regret_true,mean_regret_pseudo,mean_regret_pathwise,stderr,regret0,regret1"));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(!trace.lines().next().unwrap().contains("demand"));
    assert_eq!(trace.lines().count(), 2001);

    run(&["run", "--expose-demand", "--replications", "1"]);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().ends_with(",demand"));

    let text = run(&["oracle"]);
    assert!(text.contains("x* ="));
    let curve = std::fs::read_to_string(out.join("loss_curve.csv")).unwrap();
    assert!(curve.starts_with("x,g_hat,std_err,lambda_hat"));
    assert_eq!(curve.lines().count(), 22);

    run(&["baseline", "--level", "1"]);
    run(&["simulate", "--level", "1"]);
    assert!(std::fs::read_to_string(out.join("trajectory.csv"))
        .unwrap()
        .starts_with("step,on_hand_pre_demand"));
    assert!(run(&["depletion", "--samples", "1000"]).starts_with("D = "));
    let lemmas = run(&["verify-lemmas", "--trials", "200"]);
    assert_eq!(
        lemmas.lines().filter(|l| l.starts_with("PASS")).count(),
        5,
        "{lemmas}"
    );
}

/// The reference instance with a confidence scale small enough for
/// eliminations to happen inside the horizon.
#[test]
fn regret_turns_sublinear_with_smaller_confidence_scale() {
    for lead in 0..3 {
        let per_step: Vec<(f64, f64)> = [1_000u64, 100_000]
            .into_iter()
            .map(|horizon| {
                let mut cfg = reference(lead, horizon, 50);
                cfg.h_scale = 1e-4;
                cfg.checkpoints = vec![horizon];
                let report = run_experiment(&cfg).unwrap();
                (report.final_row().mean_regret_pathwise / horizon as f64, report.interval_coverage())
            })
            .collect();
        println!("L={lead}: {per_step:?}");
        assert!(per_step[1].0 < 0.5 * per_step[0].0, "L={lead}: {per_step:?}");
    }
}
