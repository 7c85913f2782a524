//! Bounded demand distributions on a grid.
//!
//! All families reduce to a finite support with probability weights, so the
//! same model drives both the simulator and the exact Markov-chain oracle.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};

/// Input tolerance for weights that should sum to one. Accepted weights are
/// renormalised afterwards so the stored sum is within 1e-12.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Default cap on draws in a single depletion replication.
pub const DEFAULT_DEPLETION_STEP_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum DemandKind {
    /// Weights on the grid points `0, step, 2 step, ...`.
    DiscreteGrid { step: f64, weights: Vec<f64> },
    /// Mass `q0` at zero and `1 - q0` at `b`.
    ScaledBernoulli { q0: f64, b: f64 },
    /// Weights proportional to `decay^k` on `k step`, `k = 0..=max_units`.
    TruncatedGeometric {
        step: f64,
        decay: f64,
        max_units: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    kind: DemandKind,
    support: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    mass_at_zero: f64,
}

impl DemandModel {
    pub fn discrete_grid(step: f64, weights: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidDemand(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidDemand("no weights".into()));
        }
        let support = (0..weights.len()).map(|k| k as f64 * step).collect();
        Self::build(
            DemandKind::DiscreteGrid {
                step,
                weights: weights.clone(),
            },
            support,
            weights,
        )
    }

    pub fn scaled_bernoulli(q0: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q0) {
            return Err(Error::InvalidDemand(format!(
                "q0 must lie in [0, 1], got {q0}"
            )));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidDemand(format!(
                "b must be nonnegative, got {b}"
            )));
        }
        Self::build(
            DemandKind::ScaledBernoulli { q0, b },
            vec![0.0, b],
            vec![q0, 1.0 - q0],
        )
    }

    pub fn truncated_geometric(step: f64, decay: f64, max_units: u32) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidDemand(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if !(decay.is_finite() && decay > 0.0) {
            return Err(Error::InvalidDemand(format!(
                "decay must be positive, got {decay}"
            )));
        }
        let raw: Vec<f64> = (0..=max_units).map(|k| decay.powi(k as i32)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let support = (0..=max_units).map(|k| f64::from(k) * step).collect();
        Self::build(
            DemandKind::TruncatedGeometric {
                step,
                decay,
                max_units,
            },
            support,
            weights,
        )
    }

    /// Point mass at `value`.
    pub fn deterministic(value: f64) -> Result<Self> {
        Self::scaled_bernoulli(0.0, value)
    }

    fn build(kind: DemandKind, raw_support: Vec<f64>, raw_weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = raw_weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDemand(format!(
                "weight {w} is not a probability"
            )));
        }
        let total: f64 = raw_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidDemand(format!(
                "weights sum to {total}, not 1"
            )));
        }

        // Merge coincident points and drop zero-weight ones so the support is
        // strictly increasing.
        let mut pairs: Vec<(f64, f64)> = raw_support
            .into_iter()
            .zip(raw_weights)
            .filter(|(_, w)| *w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match support.last() {
                Some(last) if *last == v => *weights.last_mut().unwrap() += w,
                _ => {
                    support.push(v);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;

        let mean = support.iter().zip(&weights).map(|(v, w)| v * w).sum();
        let mass_at_zero = if support[0] == 0.0 { weights[0] } else { 0.0 };
        Ok(Self {
            kind,
            support,
            weights,
            cdf,
            mean,
            mass_at_zero,
        })
    }

    pub fn kind(&self) -> &DemandKind {
        &self.kind
    }

    /// Support points with positive weight, strictly increasing.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `F(0)`.
    pub fn mass_at_zero(&self) -> f64 {
        self.mass_at_zero
    }

    pub fn support_max(&self) -> f64 {
        *self.support.last().unwrap()
    }

    /// `F(v) = P(d <= v)`.
    pub fn cdf(&self, v: f64) -> f64 {
        let idx = self.support.partition_point(|s| *s <= v);
        if idx == 0 {
            0.0
        } else {
            self.cdf[idx - 1]
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self
            .cdf
            .partition_point(|c| *c <= u)
            .min(self.support.len() - 1);
        self.support[idx]
    }

    /// Iterator over `(value, probability)`.
    pub fn outcomes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepletionEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub replications: u64,
}

/// Draws until the running total first reaches one unit and returns the
/// number of draws.
pub fn depletion_draws<R: Rng + ?Sized>(
    model: &DemandModel,
    rng: &mut R,
    step_cap: u64,
) -> Result<u64> {
    let mut acc = 0.0;
    let mut n: u64 = 0;
    // Slack absorbs rounding in sums of grid values such as ten draws of 0.1.
    while acc < 1.0 - 1e-12 {
        if n >= step_cap {
            return Err(Error::DepletionCapExceeded { cap: step_cap });
        }
        acc += model.sample(rng);
        n += 1;
    }
    Ok(n)
}

fn check_depletion_inputs(model: &DemandModel, replications: u64) -> Result<()> {
    if model.mean() <= 0.0 {
        return Err(Error::InvalidDemand(
            "depletion time is infinite for zero-mean demand".into(),
        ));
    }
    if replications == 0 {
        return Err(Error::InvalidParameter(
            "replications must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Integer sums keep the estimate independent of summation order.
fn summarize_depletion(sum: u128, sum_sq: u128, replications: u64) -> DepletionEstimate {
    let reps = replications as f64;
    let mean = sum as f64 / reps;
    let std_err = if replications > 1 {
        let var = (sum_sq as f64 - reps * mean * mean).max(0.0) / (reps - 1.0);
        (var / reps).sqrt()
    } else {
        0.0
    };
    DepletionEstimate {
        mean,
        std_err,
        replications,
    }
}

/// Average over replications of `min { n : d_1 + ... + d_n >= 1 }`, all
/// replications drawn in sequence from `rng`.
pub fn estimate_depletion_time<R: Rng + ?Sized>(
    model: &DemandModel,
    rng: &mut R,
    replications: u64,
    step_cap: u64,
) -> Result<DepletionEstimate> {
    check_depletion_inputs(model, replications)?;
    let (mut sum, mut sum_sq) = (0u128, 0u128);
    for _ in 0..replications {
        let n = u128::from(depletion_draws(model, rng, step_cap)?);
        sum += n;
        sum_sq += n * n;
    }
    Ok(summarize_depletion(sum, sum_sq, replications))
}

/// Same estimate with replication `r` on its own stream, in parallel. The
/// result depends only on the set of indices, not their order.
pub fn estimate_depletion_time_streams(
    model: &DemandModel,
    streams: &Streams,
    indices: &[u64],
    step_cap: u64,
) -> Result<DepletionEstimate> {
    let replications = indices.len() as u64;
    check_depletion_inputs(model, replications)?;
    let counts: Vec<u64> = indices
        .par_iter()
        .map(|&r| depletion_draws(model, &mut streams.stream(Purpose::Depletion, r), step_cap))
        .collect::<Result<_>>()?;
    let sum = counts.iter().map(|&n| u128::from(n)).sum();
    let sum_sq = counts.iter().map(|&n| u128::from(n) * u128::from(n)).sum();
    Ok(summarize_depletion(sum, sum_sq, replications))
}
