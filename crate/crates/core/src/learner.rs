//! Trisection learner for the best base-stock level under censored demand.
//!
//! The learner keeps a working interval `[l, r]` of levels and probes the
//! quartile points `x_l, x_c, x_r`. Each round it first orders nothing until
//! the inventory position drops to `x_l`, then plays the base-stock policy at
//! each probe for `N_i` periods, recording the observable pseudo-cost
//! `h (I - y) - p y`. Confidence intervals of width `H gamma_i` around the
//! three sample means decide whether a quarter of the interval can go; if not,
//! the next round quadruples `N`.
//!
//! The learner never receives demand. Its inputs are [`Observation`] (its
//! inventory position) and the sales/on-hand pair seen after each period.

use std::fmt;

use crate::error::{Error, Result};
use crate::inventory::{pseudo_cost, CostParams, PipelineState};

/// Constant in `H = 576 max(h, p) (L + 1) U`.
pub const CONFIDENCE_CONSTANT: f64 = 576.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// `U`: levels are searched in `[0, U]`.
    pub upper: f64,
    pub lead_time: usize,
    /// `T`
    pub horizon: u64,
    pub params: CostParams,
    /// Multiplier on `H`; 1 reproduces the analysed constant.
    pub h_scale: f64,
}

impl LearnerConfig {
    pub fn new(
        upper: f64,
        lead_time: usize,
        horizon: u64,
        params: CostParams,
        h_scale: f64,
    ) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "U must be positive, got {upper}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if !(h_scale.is_finite() && h_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "H scale must be positive, got {h_scale}"
            )));
        }
        Ok(Self {
            upper,
            lead_time,
            horizon,
            params,
            h_scale,
        })
    }

    /// `H`, scaled.
    pub fn confidence_width(&self) -> f64 {
        CONFIDENCE_CONSTANT
            * self.params.max_rate()
            * (self.lead_time as f64 + 1.0)
            * self.upper
            * self.h_scale
    }

    /// `log_{4/3}(T)`.
    pub fn epoch_bound(&self) -> f64 {
        (self.horizon as f64).ln() / (4.0f64 / 3.0).ln()
    }

    /// `gamma_i = 2^-i`.
    pub fn gamma(round: u32) -> f64 {
        0.5f64.powi(round as i32)
    }

    /// `N_i = ceil(ln(T) / gamma_i^2)`, at least 1.
    pub fn round_length(&self, round: u32) -> u64 {
        let n = ((self.horizon as f64).ln() * 4f64.powi(round as i32)).ceil();
        if n >= self.horizon as f64 {
            self.horizon
        } else {
            (n as u64).max(1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Drain,
    PlayLeft,
    PlayCenter,
    PlayRight,
}

impl Phase {
    fn probe_index(self) -> Option<usize> {
        match self {
            Phase::Drain => None,
            Phase::PlayLeft => Some(0),
            Phase::PlayCenter => Some(1),
            Phase::PlayRight => Some(2),
        }
    }

    pub fn is_play(self) -> bool {
        self != Phase::Drain
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Drain => "drain",
            Phase::PlayLeft => "play-left",
            Phase::PlayCenter => "play-center",
            Phase::PlayRight => "play-right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }

    /// Quartile probes `(x_l, x_c, x_r)`.
    pub fn probes(&self) -> [f64; 3] {
        let w = self.width();
        [
            self.left + w / 4.0,
            self.left + w / 2.0,
            self.left + 3.0 * w / 4.0,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Sample mean plus and minus `H gamma / 2`.
pub fn confidence_interval(costs: &[f64], gamma: f64, h: f64) -> ConfidenceInterval {
    assert!(!costs.is_empty(), "confidence interval of no observations");
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let half = h * gamma / 2.0;
    ConfidenceInterval {
        lower: mean - half,
        upper: mean + half,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// Drop `[l, x_l)`.
    CutLeft,
    /// Drop `(x_r, r]`.
    CutRight,
    Continue,
}

/// Cuts when `max(LB_l, LB_r) >= min(UB_l, UB_c, UB_r) + H gamma`; the side
/// with the larger lower bound goes, ties cutting left.
pub fn elimination_test(
    left: ConfidenceInterval,
    center: ConfidenceInterval,
    right: ConfidenceInterval,
    h_gamma: f64,
) -> Decision {
    let worst_lower = left.lower.max(right.lower);
    let best_upper = left.upper.min(center.upper).min(right.upper);
    if worst_lower >= best_upper + h_gamma {
        if left.lower >= right.lower {
            Decision::CutLeft
        } else {
            Decision::CutRight
        }
    } else {
        Decision::Continue
    }
}

/// What the learner may look at when ordering: its leftover inventory and the
/// total of its own outstanding orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub leftover: f64,
    pub in_transit: f64,
}

impl Observation {
    pub fn of(state: &PipelineState) -> Self {
        Self {
            leftover: state.on_hand(),
            in_transit: state.outstanding().sum(),
        }
    }

    pub fn position(&self) -> f64 {
        self.leftover + self.in_transit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub epoch: u32,
    pub round: u32,
    pub gamma: f64,
    pub samples: u64,
    pub probes: [f64; 3],
    pub intervals: [ConfidenceInterval; 3],
    pub decision: Decision,
    pub before: Interval,
    pub after: Interval,
    pub drain_steps: u64,
}

#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    h: f64,
    interval: Interval,
    probes: [f64; 3],
    epoch: u32,
    round: u32,
    round_length: u64,
    phase: Phase,
    buffers: [Vec<f64>; 3],
    steps_used: u64,
    drain_steps: u64,
    epoch_bound_exceeded: bool,
    history: Vec<RoundSummary>,
}

impl Learner {
    pub fn new(config: LearnerConfig) -> Self {
        let interval = Interval {
            left: 0.0,
            right: config.upper,
        };
        Self {
            h: config.confidence_width(),
            probes: interval.probes(),
            interval,
            epoch: 1,
            round: 1,
            round_length: config.round_length(1),
            phase: Phase::Drain,
            buffers: Default::default(),
            steps_used: 0,
            drain_steps: 0,
            epoch_bound_exceeded: false,
            history: Vec::new(),
            config,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn probes(&self) -> [f64; 3] {
        self.probes
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Level of the base-stock policy being played, if any.
    pub fn active_probe(&self) -> Option<f64> {
        self.phase.probe_index().map(|i| self.probes[i])
    }

    pub fn steps_used(&self) -> u64 {
        self.steps_used
    }

    /// `N` for the current round.
    pub fn round_length(&self) -> u64 {
        self.round_length
    }

    /// Completed rounds, oldest first.
    pub fn history(&self) -> &[RoundSummary] {
        &self.history
    }

    /// Set when the epoch count passed `log_{4/3}(T)` under a reduced `H`.
    pub fn epoch_bound_exceeded(&self) -> bool {
        self.epoch_bound_exceeded
    }

    pub fn next_order(&mut self, obs: Observation) -> Result<f64> {
        if self.steps_used >= self.config.horizon {
            return Err(Error::HorizonExhausted {
                horizon: self.config.horizon,
            });
        }
        self.steps_used += 1;
        let position = obs.position();
        if self.phase == Phase::Drain {
            if position <= self.probes[0] {
                self.phase = Phase::PlayLeft;
            } else {
                self.drain_steps += 1;
                return Ok(0.0);
            }
        }
        let level = self.active_probe().expect("play phase");
        Ok((level - position).max(0.0))
    }

    /// Feed back the period's sales and post-arrival on-hand inventory.
    /// Returns the round summary when this observation completed a round.
    pub fn record_cost(
        &mut self,
        sales: f64,
        on_hand_pre_demand: f64,
    ) -> Result<Option<RoundSummary>> {
        self.record_pseudo_cost(pseudo_cost(on_hand_pre_demand, sales, &self.config.params))
    }

    /// Same as [`Learner::record_cost`] with the pseudo-cost already formed.
    pub fn record_pseudo_cost(&mut self, cost: f64) -> Result<Option<RoundSummary>> {
        let Some(idx) = self.phase.probe_index() else {
            return Ok(None);
        };
        self.buffers[idx].push(cost);
        if (self.buffers[idx].len() as u64) < self.round_length {
            return Ok(None);
        }
        self.phase = match self.phase {
            Phase::PlayLeft => Phase::PlayCenter,
            Phase::PlayCenter => Phase::PlayRight,
            _ => return self.finish_round().map(Some),
        };
        Ok(None)
    }

    fn finish_round(&mut self) -> Result<RoundSummary> {
        let gamma = LearnerConfig::gamma(self.round);
        let intervals = [0, 1, 2].map(|a| confidence_interval(&self.buffers[a], gamma, self.h));
        let decision = elimination_test(intervals[0], intervals[1], intervals[2], self.h * gamma);
        let before = self.interval;
        match decision {
            Decision::CutLeft => self.interval.left = self.probes[0],
            Decision::CutRight => self.interval.right = self.probes[2],
            Decision::Continue => {}
        }
        let summary = RoundSummary {
            epoch: self.epoch,
            round: self.round,
            gamma,
            samples: self.round_length,
            probes: self.probes,
            intervals,
            decision,
            before,
            after: self.interval,
            drain_steps: self.drain_steps,
        };
        self.history.push(summary.clone());

        if decision == Decision::Continue {
            self.round += 1;
        } else {
            self.epoch += 1;
            self.round = 1;
            self.probes = self.interval.probes();
            let bound = self.config.epoch_bound();
            if f64::from(self.epoch) > bound {
                if self.config.h_scale >= 1.0 {
                    return Err(Error::EpochBoundExceeded {
                        epochs: self.epoch,
                        bound,
                    });
                }
                self.epoch_bound_exceeded = true;
            }
        }
        self.round_length = self.config.round_length(self.round);
        self.buffers.iter_mut().for_each(Vec::clear);
        self.drain_steps = 0;
        self.phase = Phase::Drain;
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(h_scale: f64) -> LearnerConfig {
        LearnerConfig::new(10.0, 1, 1_000, CostParams::new(1.0, 2.0).unwrap(), h_scale).unwrap()
    }

    fn ci(lower: f64, upper: f64) -> ConfidenceInterval {
        ConfidenceInterval { lower, upper }
    }

    #[test]
    fn confidence_interval_examples() {
        let c = confidence_interval(&[5.0, 15.0, 10.0], 0.1, 100.0);
        assert_eq!((c.lower, c.upper), (5.0, 15.0));
        let c = confidence_interval(&[3.0, 4.0], 0.3, 0.0);
        assert_eq!((c.lower, c.upper), (3.5, 3.5));
        let g = 1000f64.ln().sqrt();
        let c = confidence_interval(&[2.0], g, 4.0);
        assert_eq!((c.lower, c.upper), (2.0 - 2.0 * g, 2.0 + 2.0 * g));
        assert!((c.upper - c.lower - 4.0 * g).abs() < 1e-12);
    }

    #[test]
    fn elimination_examples() {
        assert_eq!(
            elimination_test(ci(5.0, 7.0), ci(0.0, 2.0), ci(1.0, 3.0), 1.0),
            Decision::CutLeft
        );
        assert_eq!(
            elimination_test(ci(1.0, 3.0), ci(0.0, 2.0), ci(5.0, 7.0), 1.0),
            Decision::CutRight
        );
        let same = ci(2.0, 2.0);
        assert_eq!(elimination_test(same, same, same, 0.5), Decision::Continue);
        // Equal lower bounds cut left.
        assert_eq!(
            elimination_test(ci(5.0, 7.0), ci(0.0, 1.0), ci(5.0, 7.0), 1.0),
            Decision::CutLeft
        );
    }

    #[test]
    fn probes_are_quartiles() {
        let i = Interval {
            left: 2.0,
            right: 10.0,
        };
        assert_eq!(i.probes(), [4.0, 6.0, 8.0]);
    }

    #[test]
    fn round_length_grows_fourfold() {
        let c = config(1.0);
        let ln = 1000f64.ln();
        assert_eq!(c.round_length(1), (ln * 4.0).ceil() as u64);
        assert_eq!(c.round_length(2), (ln * 16.0).ceil() as u64);
        let one = LearnerConfig::new(1.0, 0, 1, CostParams::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(one.round_length(1), 1);
    }

    #[test]
    fn h_constant() {
        let c = config(1.0);
        assert_eq!(c.confidence_width(), 576.0 * 2.0 * 2.0 * 10.0);
        assert_eq!(config(0.5).confidence_width(), 576.0 * 2.0 * 2.0 * 5.0);
    }

    #[test]
    fn drain_orders_nothing_above_left_probe() {
        let mut l = Learner::new(LearnerConfig {
            upper: 20.0,
            ..config(1.0)
        });
        assert_eq!(l.probes()[0], 5.0);
        let order = l
            .next_order(Observation {
                leftover: 6.0,
                in_transit: 2.0,
            })
            .unwrap();
        assert_eq!(order, 0.0);
        assert_eq!(l.phase(), Phase::Drain);
        // Drain costs are not buffered.
        assert_eq!(l.record_cost(1.0, 6.0).unwrap(), None);
        let order = l
            .next_order(Observation {
                leftover: 3.0,
                in_transit: 1.0,
            })
            .unwrap();
        assert_eq!(order, 1.0);
        assert_eq!(l.phase(), Phase::PlayLeft);
    }

    #[test]
    fn play_center_orders_up_to_probe() {
        let mut l = Learner::new(LearnerConfig {
            upper: 12.0,
            ..config(1.0)
        });
        assert_eq!(l.probes(), [3.0, 6.0, 9.0]);
        l.next_order(Observation {
            leftover: 0.0,
            in_transit: 0.0,
        })
        .unwrap();
        for _ in 0..l.round_length() {
            l.record_pseudo_cost(0.0).unwrap();
        }
        assert_eq!(l.phase(), Phase::PlayCenter);
        assert_eq!(
            l.next_order(Observation {
                leftover: 4.0,
                in_transit: 0.0
            })
            .unwrap(),
            2.0
        );
        assert_eq!(
            l.next_order(Observation {
                leftover: 7.0,
                in_transit: 0.5
            })
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn record_cost_uses_observable_formula() {
        let mut l = Learner::new(config(1.0));
        l.next_order(Observation {
            leftover: 0.0,
            in_transit: 0.0,
        })
        .unwrap();
        l.record_cost(3.0, 5.0).unwrap();
        l.record_cost(0.0, 0.0).unwrap();
        l.record_cost(2.5, 2.5).unwrap();
        assert_eq!(l.buffers[0], vec![-4.0, 0.0, -5.0]);
    }

    #[test]
    fn horizon_is_enforced() {
        let c = LearnerConfig::new(1.0, 0, 3, CostParams::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        let mut l = Learner::new(c);
        let obs = Observation {
            leftover: 0.0,
            in_transit: 0.0,
        };
        for _ in 0..3 {
            l.next_order(obs).unwrap();
        }
        assert!(matches!(
            l.next_order(obs),
            Err(Error::HorizonExhausted { horizon: 3 })
        ));
    }

    #[test]
    fn separated_costs_cut_the_expensive_side() {
        // Tiny H so that deterministic costs decide in the first round.
        let c =
            LearnerConfig::new(8.0, 0, 10_000, CostParams::new(1.0, 1.0).unwrap(), 1e-9).unwrap();
        let mut l = Learner::new(c);
        let f = |x: f64| (x - 1.0).abs();
        let mut summaries = Vec::new();
        for _ in 0..1_000 {
            let obs = Observation {
                leftover: 0.0,
                in_transit: 0.0,
            };
            l.next_order(obs).unwrap();
            let x = l.active_probe().unwrap();
            if let Some(s) = l.record_pseudo_cost(f(x)).unwrap() {
                summaries.push(s);
            }
            if summaries.len() == 3 {
                break;
            }
        }
        assert_eq!(summaries[0].decision, Decision::CutRight);
        assert_eq!(
            summaries[0].after,
            Interval {
                left: 0.0,
                right: 6.0
            }
        );
        assert_eq!(
            summaries[1].after,
            Interval {
                left: 0.0,
                right: 4.5
            }
        );
        assert!(summaries
            .windows(2)
            .all(|w| w[1].before.width() <= 0.75 * w[0].before.width() + 1e-12));
        assert!(l.interval().contains(1.0));
    }

    #[test]
    fn rejects_bad_config() {
        let p = CostParams::new(1.0, 1.0).unwrap();
        assert!(LearnerConfig::new(0.0, 0, 10, p, 1.0).is_err());
        assert!(LearnerConfig::new(1.0, 0, 0, p, 1.0).is_err());
        assert!(LearnerConfig::new(1.0, 0, 10, p, 0.0).is_err());
    }
}
