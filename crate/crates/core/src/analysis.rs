//! Loss oracles and coupling diagnostics for base-stock policies.
//!
//! The loss `g^x` is the long-run average pseudo-cost of base-stock level `x`.
//! Two independent routes compute it:
//!
//! - [`exact_loss`] enumerates the states reachable from `(x, 0, ..., 0)` on
//!   a common grid and takes the stationary expectation of the per-state
//!   expected cost.
//! - [`mc_loss`] averages simulated post-burn-in pseudo-costs over seeded
//!   replications.
//!
//! The coupling helpers ([`succeq`], [`coupled_diff`], [`verify_lemmas`])
//! replay one demand path against two start states and measure how far total
//! sales, total on-hand inventory and cumulative cost can drift apart.

use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::demand::DemandModel;
use crate::error::{Error, Result};
use crate::inventory::{CostParams, MrpState};
use crate::rng::{Purpose, StreamRng, Streams};

pub mod sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    ExactChain,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub level: f64,
    pub g_hat: f64,
    /// Zero for the exact chain.
    pub std_err: f64,
    pub method: EstimateMethod,
}

/// `lambda^x = g^x + p mu`: average true cost from the pseudo-cost loss.
pub fn lambda_from_loss(g: &LossEstimate, penalty: f64, mean_demand: f64) -> f64 {
    g.g_hat + penalty * mean_demand
}

// ---------------------------------------------------------------------------
// Exact chain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSettings {
    pub state_cap: usize,
    /// Stop power iteration once the total-variation change drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            state_cap: 200_000,
            tolerance: 1e-12,
            max_iterations: 2_000_000,
        }
    }
}

/// Largest `u` such that every value is an integer multiple of `u`.
///
/// Values that only share a vanishingly small common step (irrational
/// ratios, or typos like 0.3333) are rejected instead of rounded.
pub fn commensurate_unit(values: &[f64]) -> Option<f64> {
    let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    let Some(max) = positive.iter().copied().reduce(f64::max) else {
        return Some(1.0);
    };
    let tol = 1e-9 * max;
    let mut unit = positive[0];
    for &v in &positive[1..] {
        let (mut a, mut b) = if v >= unit { (v, unit) } else { (unit, v) };
        loop {
            let r = (a - b * (a / b).round()).abs();
            if r <= tol {
                break;
            }
            a = b;
            b = r;
        }
        unit = b;
    }
    if unit < max * 1e-7 {
        return None;
    }
    let on_grid = positive.iter().all(|v| {
        let q = v / unit;
        (q - q.round()).abs() <= 1e-9 * q.max(1.0)
    });
    on_grid.then_some(unit)
}

/// The base-stock chain on grid states summing to `x`, restricted to the
/// states reachable from `(x, 0, ..., 0)`.
#[derive(Debug, Clone)]
pub struct BaseStockChain {
    level: f64,
    unit: f64,
    states: Vec<Box<[u32]>>,
    transitions: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
}

impl BaseStockChain {
    pub fn build(
        level: f64,
        model: &DemandModel,
        lead_time: usize,
        params: &CostParams,
        state_cap: usize,
    ) -> Result<Self> {
        if !(level.is_finite() && level >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "level must be nonnegative, got {level}"
            )));
        }
        let mut values: Vec<f64> = model.support().to_vec();
        values.push(level);
        let unit = commensurate_unit(&values).ok_or(Error::NotCommensurate { level })?;
        let to_units = |v: f64| (v / unit).round() as u32;
        let level_units = to_units(level);
        let demand: Vec<(u32, f64)> = model.outcomes().map(|(v, w)| (to_units(v), w)).collect();

        let mut index: HashMap<Box<[u32]>, usize> = HashMap::new();
        let mut states: Vec<Box<[u32]>> = Vec::new();
        let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut costs: Vec<f64> = Vec::new();

        let mut top = vec![0u32; lead_time + 1];
        top[0] = level_units;
        let top: Box<[u32]> = top.into();
        index.insert(top.clone(), 0);
        states.push(top);

        let mut cursor = 0;
        let mut next = vec![0u32; lead_time + 1];
        while cursor < states.len() {
            let s = states[cursor].clone();
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(demand.len());
            let mut cost = 0.0;
            for &(d, w) in &demand {
                let y = s[0].min(d);
                cost += w
                    * (params.holding() * f64::from(s[0] - y) - params.penalty() * f64::from(y))
                    * unit;
                if lead_time == 0 {
                    next[0] = s[0];
                } else {
                    next[0] = s[0] - y + s[1];
                    next[1..lead_time].copy_from_slice(&s[2..]);
                    next[lead_time] = y;
                }
                let j = match index.get(next.as_slice()) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= state_cap {
                            return Err(Error::StateCapExceeded { cap: state_cap });
                        }
                        let key: Box<[u32]> = next.clone().into();
                        let j = states.len();
                        index.insert(key.clone(), j);
                        states.push(key);
                        j
                    }
                };
                match row.iter_mut().find(|(k, _)| *k == j) {
                    Some(entry) => entry.1 += w,
                    None => row.push((j, w)),
                }
            }
            transitions.push(row);
            costs.push(cost);
            cursor += 1;
        }

        Ok(Self {
            level,
            unit,
            states,
            transitions,
            costs,
        })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Grid spacing shared by the level and every demand value.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> MrpState {
        MrpState::new(
            self.states[i]
                .iter()
                .map(|u| f64::from(*u) * self.unit)
                .collect(),
        )
        .expect("grid states are nonnegative")
    }

    /// `C^x(s) = E[h (s(0) - y) - p y]`.
    pub fn expected_cost(&self, i: usize) -> f64 {
        self.costs[i]
    }

    pub fn transitions(&self, i: usize) -> &[(usize, f64)] {
        &self.transitions[i]
    }

    /// Confirms a single closed class that is aperiodic.
    pub fn check_ergodic(&self) -> Result<()> {
        let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(self.len(), self.len() * 2);
        let nodes: Vec<NodeIndex> = (0..self.len()).map(|_| graph.add_node(())).collect();
        for (i, row) in self.transitions.iter().enumerate() {
            for &(j, _) in row {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
        let components = tarjan_scc(&graph);
        let mut component_of = vec![0usize; self.len()];
        for (c, members) in components.iter().enumerate() {
            for n in members {
                component_of[n.index()] = c;
            }
        }
        let closed: Vec<usize> = (0..components.len())
            .filter(|&c| {
                components[c].iter().all(|n| {
                    self.transitions[n.index()]
                        .iter()
                        .all(|&(j, _)| component_of[j] == c)
                })
            })
            .collect();
        if closed.len() != 1 {
            return Err(Error::NotUnichain {
                level: self.level,
                classes: closed.len(),
            });
        }

        // Period: gcd of depth[u] + 1 - depth[v] over edges inside the class.
        let class = closed[0];
        let start = components[class][0].index();
        let mut depth = vec![usize::MAX; self.len()];
        depth[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut period = 0usize;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.transitions[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                } else {
                    period = gcd(period, (depth[u] + 1).abs_diff(depth[v]));
                }
            }
        }
        if period > 1 {
            return Err(Error::PeriodicChain {
                level: self.level,
                period,
            });
        }
        Ok(())
    }

    /// Stationary distribution by power iteration from `(x, 0, ..., 0)`.
    pub fn stationary(&self, settings: &ChainSettings) -> Result<Vec<f64>> {
        self.check_ergodic()?;
        let n = self.len();
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        let mut next = vec![0.0; n];
        for _ in 0..settings.max_iterations {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (i, row) in self.transitions.iter().enumerate() {
                let mass = pi[i];
                if mass == 0.0 {
                    continue;
                }
                for &(j, w) in row {
                    next[j] += mass * w;
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            let change: f64 = pi
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            std::mem::swap(&mut pi, &mut next);
            if change < settings.tolerance {
                return Ok(pi);
            }
        }
        Err(Error::NotConverged {
            iterations: settings.max_iterations,
        })
    }

    pub fn loss(&self, settings: &ChainSettings) -> Result<f64> {
        let pi = self.stationary(settings)?;
        Ok(pi.iter().zip(&self.costs).map(|(p, c)| p * c).sum())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn exact_loss(
    level: f64,
    model: &DemandModel,
    lead_time: usize,
    params: &CostParams,
) -> Result<LossEstimate> {
    exact_loss_with(level, model, lead_time, params, &ChainSettings::default())
}

pub fn exact_loss_with(
    level: f64,
    model: &DemandModel,
    lead_time: usize,
    params: &CostParams,
    settings: &ChainSettings,
) -> Result<LossEstimate> {
    let chain = BaseStockChain::build(level, model, lead_time, params, settings.state_cap)?;
    let g_hat = chain.loss(settings)?;
    Ok(LossEstimate {
        level,
        g_hat,
        std_err: 0.0,
        method: EstimateMethod::ExactChain,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub horizon: usize,
    pub burn_in: usize,
    pub replications: usize,
}

pub fn mc_loss(
    level: f64,
    model: &DemandModel,
    lead_time: usize,
    params: &CostParams,
    settings: &McSettings,
    streams: &Streams,
) -> Result<LossEstimate> {
    mc_loss_from(
        &MrpState::top(level, lead_time),
        model,
        params,
        settings,
        streams,
    )
}

/// Monte Carlo loss of the base-stock level `start.sum()` started in `start`.
pub fn mc_loss_from(
    start: &MrpState,
    model: &DemandModel,
    params: &CostParams,
    settings: &McSettings,
    streams: &Streams,
) -> Result<LossEstimate> {
    let lead_time = start.lead_time();
    if settings.burn_in < lead_time + 1 || settings.horizon <= settings.burn_in {
        return Err(Error::InvalidParameter(format!(
            "need horizon > burn_in >= L + 1, got horizon {} burn_in {} L {lead_time}",
            settings.horizon, settings.burn_in
        )));
    }
    if settings.replications < 2 {
        return Err(Error::InvalidParameter(
            "Monte Carlo loss needs at least 2 replications".into(),
        ));
    }
    let averages: Vec<f64> = (0..settings.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream(Purpose::Oracle, r);
            let mut state = start.clone();
            let mut total = 0.0;
            for t in 0..settings.horizon {
                let c = state.transition(model.sample(&mut rng), params).pseudo_cost;
                if t >= settings.burn_in {
                    total += c;
                }
            }
            total / (settings.horizon - settings.burn_in) as f64
        })
        .collect();
    let (mean, std_err) = mean_and_std_err(&averages);
    Ok(LossEstimate {
        level: start.sum(),
        g_hat: mean,
        std_err,
        method: EstimateMethod::MonteCarlo,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// Optimal base-stock level
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossOracle {
    ExactChain(ChainSettings),
    MonteCarlo { settings: McSettings, seed: u64 },
}

impl LossOracle {
    pub fn evaluate(
        &self,
        level: f64,
        model: &DemandModel,
        lead_time: usize,
        params: &CostParams,
    ) -> Result<LossEstimate> {
        match self {
            LossOracle::ExactChain(settings) => {
                exact_loss_with(level, model, lead_time, params, settings)
            }
            // Common random numbers across levels keep comparisons sharp.
            LossOracle::MonteCarlo { settings, seed } => mc_loss(
                level,
                model,
                lead_time,
                params,
                settings,
                &Streams::new(*seed),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    #[default]
    Exhaustive,
    /// Ternary search over grid indices; valid because the loss is convex.
    Ternary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalLevel {
    pub level: f64,
    pub loss: f64,
    /// Every grid point that was evaluated, in grid order.
    pub evaluated: Vec<LossEstimate>,
}

pub fn loss_curve(
    model: &DemandModel,
    lead_time: usize,
    params: &CostParams,
    grid: &[f64],
    oracle: &LossOracle,
) -> Result<Vec<LossEstimate>> {
    grid.par_iter()
        .map(|&x| oracle.evaluate(x, model, lead_time, params))
        .collect()
}

/// Losses closer than this to the minimum count as ties. Power iteration
/// leaves errors near 1e-12, which would otherwise pick an arbitrary point on a
/// flat stretch of the curve.
pub const LOSS_TIE_TOLERANCE: f64 = 1e-9;

/// Index of the first estimate within [`LOSS_TIE_TOLERANCE`] of the minimum.
pub fn argmin_level(estimates: &[LossEstimate]) -> usize {
    let min = estimates
        .iter()
        .map(|e| e.g_hat)
        .fold(f64::INFINITY, f64::min);
    let tol = LOSS_TIE_TOLERANCE * (1.0 + min.abs());
    estimates
        .iter()
        .position(|e| e.g_hat <= min + tol)
        .expect("non-empty estimates")
}

/// Minimiser of the loss over `grid`. Ties resolve to the smallest level.
pub fn optimal_base_stock(
    model: &DemandModel,
    lead_time: usize,
    params: &CostParams,
    grid: &[f64],
    oracle: &LossOracle,
    search: SearchMode,
) -> Result<OptimalLevel> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty level grid".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("level grid must be sorted".into()));
    }
    let evaluated = match search {
        SearchMode::Exhaustive => loss_curve(model, lead_time, params, grid, oracle)?,
        SearchMode::Ternary => {
            let mut cache: HashMap<usize, LossEstimate> = HashMap::new();
            let mut eval = |i: usize| -> Result<f64> {
                if let Some(e) = cache.get(&i) {
                    return Ok(e.g_hat);
                }
                let e = oracle.evaluate(grid[i], model, lead_time, params)?;
                cache.insert(i, e);
                Ok(e.g_hat)
            };
            let (mut lo, mut hi) = (0usize, grid.len() - 1);
            while hi - lo > 2 {
                let m1 = lo + (hi - lo) / 3;
                let m2 = hi - (hi - lo) / 3;
                if eval(m1)? <= eval(m2)? {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            for i in lo..=hi {
                eval(i)?;
            }
            let mut idx: Vec<usize> = cache.keys().copied().collect();
            idx.sort_unstable();
            idx.into_iter().map(|i| cache[&i]).collect()
        }
    };
    let best = evaluated[argmin_level(&evaluated)];
    Ok(OptimalLevel {
        level: best.level,
        loss: best.g_hat,
        evaluated,
    })
}

// ---------------------------------------------------------------------------
// Coupling
// ---------------------------------------------------------------------------

const SUM_TOLERANCE: f64 = 1e-9;

fn check_equal_sums(a: &MrpState, b: &MrpState) -> Result<()> {
    if a.lead_time() != b.lead_time() {
        return Err(Error::InvalidState(format!(
            "lead times differ: {} vs {}",
            a.lead_time(),
            b.lead_time()
        )));
    }
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - sb).abs() > SUM_TOLERANCE * sa.abs().max(1.0) {
        return Err(Error::UnequalSums {
            left: sa,
            right: sb,
        });
    }
    Ok(())
}

/// `s' ⪰ s`: the difference `s' - s` is nonnegative up to some index and
/// nonpositive afterwards.
pub fn succeq(s_prime: &MrpState, s: &MrpState) -> Result<bool> {
    check_equal_sums(s_prime, s)?;
    let mut seen_negative = false;
    for (a, b) in s_prime.entries().iter().zip(s.entries()) {
        let delta = a - b;
        if delta < 0.0 {
            seen_negative = true;
        } else if delta > 0.0 && seen_negative {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoupledDiff {
    /// `n_T(s') - n_T(s)`, total sales.
    pub delta_sales: f64,
    /// `m_T(s') - m_T(s)`, total on-hand inventory.
    pub delta_inventory: f64,
    /// Largest `|sum_{t <= T'} (C'_t - C_t)|` over prefixes `T' <= T`.
    pub max_abs_cost_gap: f64,
}

/// Runs both start states on one demand path drawn from `rng`.
pub fn coupled_diff<R: Rng + ?Sized>(
    s: &MrpState,
    s_prime: &MrpState,
    level: f64,
    model: &DemandModel,
    params: &CostParams,
    horizon: usize,
    rng: &mut R,
) -> Result<CoupledDiff> {
    check_equal_sums(s, s_prime)?;
    if (s.sum() - level).abs() > SUM_TOLERANCE * level.max(1.0) {
        return Err(Error::UnequalSums {
            left: s.sum(),
            right: level,
        });
    }
    let mut a = s.clone();
    let mut b = s_prime.clone();
    let mut out = CoupledDiff::default();
    let mut gap = 0.0f64;
    for _ in 0..horizon {
        let d = model.sample(rng);
        let ra = a.transition(d, params);
        let rb = b.transition(d, params);
        out.delta_sales += rb.sales - ra.sales;
        out.delta_inventory += rb.on_hand_pre_demand - ra.on_hand_pre_demand;
        gap += rb.pseudo_cost - ra.pseudo_cost;
        out.max_abs_cost_gap = out.max_abs_cost_gap.max(gap.abs());
    }
    Ok(out)
}

/// Per-check outcome of [`verify_lemmas`].
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub trials: u64,
    pub violations: u64,
    /// Largest observed `statistic / bound` (0 when the bound is 0 and met).
    pub worst_ratio: f64,
}

impl LemmaCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            violations: 0,
            worst_ratio: 0.0,
        }
    }

    fn record(&mut self, statistic: f64, bound: f64) {
        self.trials += 1;
        // Relative slack covers accumulated rounding over thousands of steps.
        if statistic > bound + 1e-9 * (1.0 + bound) {
            self.violations += 1;
        }
        if bound > 0.0 {
            self.worst_ratio = self.worst_ratio.max(statistic / bound);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSuite {
    pub coupling_trials: u64,
    pub lipschitz_trials: u64,
    pub max_lead_time: usize,
    pub max_level: f64,
    pub max_horizon: usize,
    pub seed: u64,
}

impl Default for LemmaSuite {
    fn default() -> Self {
        Self {
            coupling_trials: 10_000,
            lipschitz_trials: 10_000,
            max_lead_time: 6,
            max_level: 10.0,
            max_horizon: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(LemmaCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_SALES: &str = "sales-gap<=3x";
pub const CHECK_INVENTORY: &str = "inventory-gap<=6Lx";
pub const CHECK_VALUE: &str = "value-gap<=6hLx+3(h+p)x";
pub const CHECK_LIPSCHITZ: &str = "step-cost-gap<=max(h,p)delta";
pub const CHECK_DOMINANCE: &str = "higher-level-dominates";

#[derive(Debug, Clone, Copy, Default)]
struct CouplingOutcome {
    sales: f64,
    inventory: f64,
    value: f64,
    level: f64,
    lead: usize,
    holding: f64,
    penalty: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct LipschitzOutcome {
    worst_step_gap: f64,
    bound: f64,
    dominance_broken: bool,
}

/// Randomised pathwise checks of the coupling bounds, run in parallel with
/// one stream family per trial.
pub fn verify_lemmas(suite: &LemmaSuite) -> LemmaReport {
    let streams = Streams::new(suite.seed);

    let coupling: Vec<CouplingOutcome> = (0..suite.coupling_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = streams.stream(Purpose::Trial, trial);
            let inst = sampling::coupling_instance(
                &mut rng,
                suite.max_lead_time,
                suite.max_level,
                suite.max_horizon,
            );
            let diff = coupled_diff(
                &inst.s,
                &inst.s_prime,
                inst.level,
                &inst.model,
                &inst.params,
                inst.horizon,
                &mut rng,
            )
            .expect("sampled states share a sum");
            CouplingOutcome {
                sales: diff.delta_sales.abs(),
                inventory: diff.delta_inventory.abs(),
                value: diff.max_abs_cost_gap,
                level: inst.level,
                lead: inst.s.lead_time(),
                holding: inst.params.holding(),
                penalty: inst.params.penalty(),
            }
        })
        .collect();

    let lipschitz: Vec<LipschitzOutcome> = (0..suite.lipschitz_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = streams.stream(Purpose::Custom(1), trial);
            let inst = sampling::lipschitz_instance(
                &mut rng,
                suite.max_lead_time,
                suite.max_level,
                suite.max_horizon,
            );
            lipschitz_trial(&inst, &mut rng)
        })
        .collect();

    let mut sales = LemmaCheck::new(CHECK_SALES);
    let mut inventory = LemmaCheck::new(CHECK_INVENTORY);
    let mut value = LemmaCheck::new(CHECK_VALUE);
    for o in &coupling {
        let x = o.level;
        let lead = o.lead as f64;
        sales.record(o.sales, 3.0 * x);
        inventory.record(o.inventory, 6.0 * lead * x);
        value.record(
            o.value,
            6.0 * o.holding * lead * x + 3.0 * (o.holding + o.penalty) * x,
        );
    }
    let mut step_gap = LemmaCheck::new(CHECK_LIPSCHITZ);
    let mut dominance = LemmaCheck::new(CHECK_DOMINANCE);
    for o in &lipschitz {
        step_gap.record(o.worst_step_gap, o.bound);
        dominance.record(if o.dominance_broken { 1.0 } else { 0.0 }, 0.0);
    }
    LemmaReport {
        checks: vec![sales, inventory, value, step_gap, dominance],
    }
}

fn lipschitz_trial(inst: &sampling::LipschitzInstance, rng: &mut StreamRng) -> LipschitzOutcome {
    let lead = inst.lead_time;
    let mut low = MrpState::top(inst.level, lead);
    let mut high = MrpState::top(inst.level + inst.delta, lead);
    let bound = inst.params.max_rate() * inst.delta;
    let mut out = LipschitzOutcome {
        bound,
        ..Default::default()
    };
    for _ in 0..inst.horizon {
        let d = inst.model.sample(rng);
        let a = low.transition(d, &inst.params);
        let b = high.transition(d, &inst.params);
        out.worst_step_gap = out
            .worst_step_gap
            .max((b.pseudo_cost - a.pseudo_cost).abs());
        let dominated = high
            .entries()
            .iter()
            .zip(low.entries())
            .all(|(h, l)| *h >= *l - 1e-12);
        let sum_gap = high.sum() - low.sum() - inst.delta;
        if !dominated || sum_gap.abs() > 1e-9 * (1.0 + inst.level) {
            out.dominance_broken = true;
        }
    }
    out
}
