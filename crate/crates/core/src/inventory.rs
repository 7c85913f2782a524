//! System dynamics and cost accounting.
//!
//! [`PipelineState`] is the start-of-period view: leftover inventory `inv_t`
//! and the `L` outstanding orders `o_{t-L}, ..., o_{t-1}`, oldest first. Each
//! period the new order joins the back of the pipeline, the front order
//! arrives, demand is drawn, and sales are `min(I_t, d_t)`.
//!
//! [`MrpState`] is the post-arrival tuple `(I_t, o_{t-L+1}, ..., o_t)` of the
//! base-stock Markov reward process. Under base-stock level `x` its entries sum
//! to `x`, and the analysis module works exclusively in this view.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::demand::DemandModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    holding: f64,
    penalty: f64,
}

impl CostParams {
    pub fn new(holding: f64, penalty: f64) -> Result<Self> {
        if !(holding.is_finite() && holding > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "holding cost must be positive, got {holding}"
            )));
        }
        if !(penalty.is_finite() && penalty > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lost-sales penalty must be positive, got {penalty}"
            )));
        }
        Ok(Self { holding, penalty })
    }

    /// `h`
    pub fn holding(&self) -> f64 {
        self.holding
    }

    /// `p`
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// `max(h, p)`, the per-unit bound on any one-period cost change.
    pub fn max_rate(&self) -> f64 {
        self.holding.max(self.penalty)
    }
}

/// Observable cost `h (I - y) - p y`.
#[inline]
pub fn pseudo_cost(on_hand: f64, sales: f64, params: &CostParams) -> f64 {
    params.holding * (on_hand - sales) - params.penalty * sales
}

/// `h (I - d)^+ + p (d - I)^+`.
#[inline]
pub fn true_cost(on_hand: f64, demand: f64, params: &CostParams) -> f64 {
    params.holding * (on_hand - demand).max(0.0) + params.penalty * (demand - on_hand).max(0.0)
}

/// One period of costs. `demand` is simulator-private; the learner only ever
/// receives [`CostRecord::observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRecord {
    pub true_cost: f64,
    pub pseudo_cost: f64,
    pub sales: f64,
    pub on_hand_pre_demand: f64,
    pub demand: f64,
}

impl CostRecord {
    pub fn new(on_hand: f64, demand: f64, params: &CostParams) -> Self {
        let sales = on_hand.min(demand);
        Self {
            true_cost: true_cost(on_hand, demand, params),
            pseudo_cost: pseudo_cost(on_hand, sales, params),
            sales,
            on_hand_pre_demand: on_hand,
            demand,
        }
    }

    pub fn observed(&self) -> Observed {
        Observed {
            sales: self.sales,
            on_hand_pre_demand: self.on_hand_pre_demand,
        }
    }
}

/// What the decision maker sees at the end of a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub sales: f64,
    pub on_hand_pre_demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    on_hand: f64,
    outstanding: VecDeque<f64>,
}

impl PipelineState {
    /// No inventory and `lead_time` empty pipeline slots.
    pub fn empty(lead_time: usize) -> Self {
        Self {
            on_hand: 0.0,
            outstanding: std::iter::repeat_n(0.0, lead_time).collect(),
        }
    }

    /// `outstanding` is oldest first: its front arrives in the next period.
    pub fn new(on_hand: f64, outstanding: Vec<f64>) -> Result<Self> {
        if !(on_hand.is_finite() && on_hand >= 0.0)
            || outstanding.iter().any(|o| !(o.is_finite() && *o >= 0.0))
        {
            return Err(Error::InvalidState(format!(
                "entries must be finite and nonnegative: {on_hand} {outstanding:?}"
            )));
        }
        Ok(Self {
            on_hand,
            outstanding: outstanding.into(),
        })
    }

    /// Start-of-period state that, under any base-stock level equal to the
    /// tuple's sum, reproduces `mrp` as its post-arrival tuple.
    pub fn from_mrp(mrp: &MrpState) -> Self {
        let e = mrp.entries();
        let lead = e.len() - 1;
        let mut outstanding = VecDeque::with_capacity(lead);
        if lead > 0 {
            outstanding.push_back(0.0);
            outstanding.extend(&e[1..lead]);
        }
        Self {
            on_hand: e[0],
            outstanding,
        }
    }

    pub fn lead_time(&self) -> usize {
        self.outstanding.len()
    }

    /// Leftover inventory `inv_t`.
    pub fn on_hand(&self) -> f64 {
        self.on_hand
    }

    pub fn outstanding(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.outstanding.iter().copied()
    }

    /// Leftover inventory plus every outstanding order.
    pub fn position(&self) -> f64 {
        self.on_hand + self.outstanding.iter().sum::<f64>()
    }

    /// Place `new_order`, receive the oldest order, then serve `demand`.
    pub fn advance(&mut self, new_order: f64, demand: f64, params: &CostParams) -> CostRecord {
        debug_assert!(new_order >= 0.0 && demand >= 0.0);
        self.outstanding.push_back(new_order);
        let arrived = self.outstanding.pop_front().unwrap_or(0.0);
        let on_hand = self.on_hand + arrived;
        let record = CostRecord::new(on_hand, demand, params);
        self.on_hand = on_hand - record.sales;
        record
    }

    pub fn step(
        &self,
        new_order: f64,
        demand: f64,
        params: &CostParams,
    ) -> (PipelineState, CostRecord) {
        let mut next = self.clone();
        let record = next.advance(new_order, demand, params);
        (next, record)
    }
}

/// `(x - inv_t - sum of outstanding)^+`.
pub fn base_stock_order(state: &PipelineState, level: f64) -> f64 {
    (level - state.position()).max(0.0)
}

/// Post-arrival tuple of the base-stock reward process.
#[derive(Debug, Clone, PartialEq)]
pub struct MrpState(Vec<f64>);

impl MrpState {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidState(
                "state needs at least the on-hand entry".into(),
            ));
        }
        if entries.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidState(format!(
                "entries must be nonnegative: {entries:?}"
            )));
        }
        Ok(Self(entries))
    }

    /// `(x, 0, ..., 0)`, the state every base-stock run reaches L steps after
    /// starting empty.
    pub fn top(level: f64, lead_time: usize) -> Self {
        let mut e = vec![0.0; lead_time + 1];
        e[0] = level;
        Self(e)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn lead_time(&self) -> usize {
        self.0.len() - 1
    }

    pub fn on_hand(&self) -> f64 {
        self.0[0]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `(s(0) - y + s(1), s(2), ..., s(L), y)` with `y = min(s(0), d)`.
    pub fn transition(&mut self, demand: f64, params: &CostParams) -> CostRecord {
        let record = CostRecord::new(self.0[0], demand, params);
        let y = record.sales;
        let lead = self.0.len() - 1;
        if lead > 0 {
            let carried = self.0[0] - y + self.0[1];
            self.0.copy_within(2.., 1);
            self.0[0] = carried;
            self.0[lead] = y;
        }
        record
    }
}

/// A fixed base-stock policy driving a [`PipelineState`].
#[derive(Debug, Clone)]
pub struct BaseStockRun {
    level: f64,
    state: PipelineState,
    last_order: f64,
}

impl BaseStockRun {
    pub fn new(level: f64, start: PipelineState) -> Self {
        Self {
            level,
            state: start,
            last_order: 0.0,
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn step(&mut self, demand: f64, params: &CostParams) -> CostRecord {
        let order = base_stock_order(&self.state, self.level);
        self.last_order = order;
        self.state.advance(order, demand, params)
    }

    /// Post-arrival tuple observed in the most recent step: on-hand after
    /// arrival followed by the pipeline including the order just placed.
    pub fn last_mrp_tuple(&self, last: &CostRecord) -> Vec<f64> {
        let mut tuple = Vec::with_capacity(self.state.lead_time() + 1);
        tuple.push(last.on_hand_pre_demand);
        let lead = self.state.lead_time();
        if lead > 0 {
            // The pipeline now holds o_{t-L+1}..o_t; the tuple wants exactly that.
            tuple.extend(self.state.outstanding());
        }
        tuple
    }
}

/// Trajectory of `horizon` periods under the base-stock level `level`.
pub fn simulate_base_stock<R: Rng + ?Sized>(
    level: f64,
    start: &PipelineState,
    horizon: usize,
    params: &CostParams,
    model: &DemandModel,
    rng: &mut R,
) -> Vec<CostRecord> {
    let mut run = BaseStockRun::new(level, start.clone());
    (0..horizon)
        .map(|_| run.step(model.sample(rng), params))
        .collect()
}

/// CSV rows `step,on_hand_pre_demand,sales,true_cost,pseudo_cost[,demand]`.
pub fn write_trajectory_csv<W: Write>(
    records: &[CostRecord],
    out: W,
    expose_demand: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "step",
        "on_hand_pre_demand",
        "sales",
        "true_cost",
        "pseudo_cost",
    ];
    if expose_demand {
        header.push("demand");
    }
    w.write_record(&header)?;
    for (t, r) in records.iter().enumerate() {
        let mut row = vec![
            (t + 1).to_string(),
            r.on_hand_pre_demand.to_string(),
            r.sales.to_string(),
            r.true_cost.to_string(),
            r.pseudo_cost.to_string(),
        ];
        if expose_demand {
            row.push(r.demand.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
