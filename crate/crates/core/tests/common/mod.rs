#![allow(dead_code)]

use lostsales::analysis::{exact_loss, sampling};
use lostsales::demand::DemandModel;
use lostsales::inventory::{CostParams, PipelineState};
use lostsales::learner::{
    confidence_interval, elimination_test, Decision, Interval, Learner, LearnerConfig, Observation,
};
use rand::Rng;

/// Drives a learner against `demands`; returns every order it placed.
pub fn drive(config: LearnerConfig, demands: &[f64]) -> (Vec<f64>, Learner) {
    let mut learner = Learner::new(config);
    let mut env = PipelineState::empty(config.lead_time);
    let mut orders = Vec::with_capacity(demands.len());
    for &d in demands {
        let order = learner.next_order(Observation::of(&env)).unwrap();
        let r = env.advance(order, d, &config.params);
        learner.record_cost(r.sales, r.on_hand_pre_demand).unwrap();
        orders.push(order);
    }
    (orders, learner)
}

/// Exact loss on the uniform grid `0, U/n, ..., U`.
pub struct GridLoss {
    pub upper: f64,
    pub values: Vec<f64>,
}

impl GridLoss {
    pub fn exact(
        model: &DemandModel,
        lead: usize,
        params: &CostParams,
        upper: f64,
        n: usize,
    ) -> Self {
        let values = (0..=n)
            .map(|i| {
                exact_loss(upper * i as f64 / n as f64, model, lead, params)
                    .unwrap()
                    .g_hat
            })
            .collect();
        Self { upper, values }
    }

    pub fn spacing(&self) -> f64 {
        self.upper / (self.values.len() - 1) as f64
    }

    /// Loss at a grid level; panics off the grid.
    pub fn at(&self, x: f64) -> f64 {
        let k = x / self.spacing();
        let i = k.round();
        assert!((k - i).abs() < 1e-9, "{x} is not on the grid");
        self.values[i as usize]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn range(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            - self.min()
    }

    pub fn minimisers(&self) -> Vec<f64> {
        let m = self.min();
        let s = self.spacing();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v <= m + 1e-12)
            .map(|(i, _)| i as f64 * s)
            .collect()
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct InjectedOutcome {
    pub rounds: u32,
    pub cuts: u32,
    /// Cuts after which no grid minimiser is left in the interval.
    pub lost_optimum: u32,
    /// Continue rounds with a probe above `g* + 12 H gamma`.
    pub near_optimality_violations: u32,
    /// Cuts whose new width is not `3/4` of the old one.
    pub width_violations: u32,
}

/// Trisection with every sample mean placed uniformly at random inside
/// `g(x_a) +- H gamma / 2`, so each confidence interval covers the true loss.
/// Runs at most `max_epochs` cuts (probes stay on the grid while
/// `4^(max_epochs + 1)` divides the grid size) and `max_round` rounds per epoch.
pub fn injected_trisection<R: Rng + ?Sized>(
    loss: &GridLoss,
    h: f64,
    max_epochs: u32,
    max_round: u32,
    rng: &mut R,
) -> InjectedOutcome {
    let mut out = InjectedOutcome::default();
    let mut interval = Interval {
        left: 0.0,
        right: loss.upper,
    };
    let minimisers = loss.minimisers();
    let g_star = loss.min();
    let mut round = 1u32;
    while out.cuts < max_epochs && round <= max_round {
        out.rounds += 1;
        let gamma = LearnerConfig::gamma(round);
        let probes = interval.probes();
        let cis = probes.map(|x| {
            let mean = loss.at(x) + (rng.random::<f64>() - 0.5) * h * gamma;
            confidence_interval(&[mean], gamma, h)
        });
        for (ci, x) in cis.iter().zip(probes) {
            assert!(ci.contains(loss.at(x)));
        }
        let before = interval;
        match elimination_test(cis[0], cis[1], cis[2], h * gamma) {
            Decision::CutLeft => interval.left = probes[0],
            Decision::CutRight => interval.right = probes[2],
            Decision::Continue => {
                if probes
                    .iter()
                    .any(|&x| loss.at(x) > g_star + 12.0 * h * gamma + 1e-12)
                {
                    out.near_optimality_violations += 1;
                }
                round += 1;
                continue;
            }
        }
        out.cuts += 1;
        round = 1;
        if (interval.width() - 0.75 * before.width()).abs() > 1e-12 * loss.upper {
            out.width_violations += 1;
        }
        if !minimisers.iter().any(|&x| interval.contains(x)) {
            out.lost_optimum += 1;
        }
    }
    out
}

/// Random grid instance with `F(0) > 0`, `U = 2` and support on multiples of
/// one half, so every probe of the first three epochs lies on the `U/256` grid.
pub fn random_grid_loss<R: Rng + ?Sized>(rng: &mut R, lead: usize) -> (GridLoss, CostParams) {
    let model = sampling::grid_model(rng, 0.5, true);
    let params = sampling::cost_params(rng);
    (GridLoss::exact(&model, lead, &params, 2.0, 256), params)
}
