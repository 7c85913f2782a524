//! Random instance generators for the coupling and oracle suites.

use rand::Rng;

use crate::demand::DemandModel;
use crate::inventory::{CostParams, MrpState};

const UNITS: [f64; 3] = [0.25, 0.5, 1.0];

/// Random grid demand model with step `unit * m`, `m` in {1, 2}, and 2 to 6
/// support points. When `zero_mass` is set, `F(0) >= 0.05`.
pub fn grid_model<R: Rng + ?Sized>(rng: &mut R, unit: f64, zero_mass: bool) -> DemandModel {
    let step = unit * f64::from(rng.random_range(1..=2u32));
    let points = rng.random_range(2..=6usize);
    let mut weights: Vec<f64> = (0..points).map(|_| rng.random::<f64>() + 0.01).collect();
    if zero_mass {
        weights[0] += 0.05 * weights.iter().sum::<f64>();
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DemandModel::discrete_grid(step, weights).expect("normalised weights")
}

pub fn cost_params<R: Rng + ?Sized>(rng: &mut R) -> CostParams {
    CostParams::new(rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)).expect("positive")
}

/// Uniformly random composition of `units` into `parts` nonnegative integers.
pub fn composition<R: Rng + ?Sized>(rng: &mut R, units: u32, parts: usize) -> Vec<u32> {
    let mut cuts: Vec<u32> = (0..parts.saturating_sub(1))
        .map(|_| rng.random_range(0..=units))
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(units - prev);
    out
}

/// Random grid state of lead time `lead` whose entries sum to `units * unit`.
pub fn state_on_grid<R: Rng + ?Sized>(rng: &mut R, units: u32, unit: f64, lead: usize) -> MrpState {
    let parts = composition(rng, units, lead + 1);
    MrpState::new(parts.into_iter().map(|u| f64::from(u) * unit).collect()).expect("nonnegative")
}

/// A grid state `s'` with `s' ⪰ s`: mass is moved from entries after a
/// random split index onto entries at or before it. A quarter of the time the
/// top state `(x, 0, ..., 0)` is returned instead.
pub fn dominating_state<R: Rng + ?Sized>(rng: &mut R, s: &MrpState, unit: f64) -> MrpState {
    let lead = s.lead_time();
    if lead == 0 {
        return s.clone();
    }
    if rng.random_bool(0.25) {
        return MrpState::top(s.sum(), lead);
    }
    let mut units: Vec<u32> = s
        .entries()
        .iter()
        .map(|v| (v / unit).round() as u32)
        .collect();
    let split = rng.random_range(0..lead);
    let mut moved = 0u32;
    for u in units[split + 1..].iter_mut() {
        let take = rng.random_range(0..=*u);
        *u -= take;
        moved += take;
    }
    for (u, add) in units[..=split]
        .iter_mut()
        .zip(composition(rng, moved, split + 1))
    {
        *u += add;
    }
    MrpState::new(units.into_iter().map(|u| f64::from(u) * unit).collect()).expect("nonnegative")
}

#[derive(Debug, Clone)]
pub struct CouplingInstance {
    pub level: f64,
    pub s: MrpState,
    pub s_prime: MrpState,
    pub model: DemandModel,
    pub params: CostParams,
    pub horizon: usize,
}

pub fn coupling_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_lead: usize,
    max_level: f64,
    max_horizon: usize,
) -> CouplingInstance {
    let unit = UNITS[rng.random_range(0..UNITS.len())];
    let lead = rng.random_range(0..=max_lead);
    let units = rng.random_range(0..=(max_level / unit).floor() as u32);
    let s = state_on_grid(rng, units, unit, lead);
    let s_prime = dominating_state(rng, &s, unit);
    CouplingInstance {
        level: f64::from(units) * unit,
        s,
        s_prime,
        model: grid_model(rng, unit, false),
        params: cost_params(rng),
        horizon: rng.random_range(1..=max_horizon),
    }
}

#[derive(Debug, Clone)]
pub struct LipschitzInstance {
    pub level: f64,
    pub delta: f64,
    pub lead_time: usize,
    pub model: DemandModel,
    pub params: CostParams,
    pub horizon: usize,
}

pub fn lipschitz_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_lead: usize,
    max_level: f64,
    max_horizon: usize,
) -> LipschitzInstance {
    let unit = UNITS[rng.random_range(0..UNITS.len())];
    let top = (max_level / unit).floor() as u32;
    let units = rng.random_range(0..=top);
    let delta_units = rng.random_range(0..=top - units);
    LipschitzInstance {
        level: f64::from(units) * unit,
        delta: f64::from(delta_units) * unit,
        lead_time: rng.random_range(0..=max_lead),
        model: grid_model(rng, unit, false),
        params: cost_params(rng),
        horizon: rng.random_range(1..=max_horizon),
    }
}
