//! Experiment configuration in flat `key = value` text.
//!
//! One key per line, `#` starts a comment, blank lines are ignored, and
//! unknown or repeated keys are errors. Example:
//!
//! ```text
//! demand = scaled-bernoulli
//! demand.q0 = 0.5
//! demand.b = 1
//! lead_time = 1
//! upper = 2
//! horizon = 10000
//! h = 1
//! p = 4
//! h_scale = 0.01
//! replications = 50
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::analysis::McSettings;
use crate::demand::DemandModel;
use crate::error::{Error, Result};
use crate::inventory::CostParams;
use crate::learner::LearnerConfig;

const KEYS: &[&str] = &[
    "demand",
    "demand.q0",
    "demand.b",
    "demand.step",
    "demand.weights",
    "demand.decay",
    "demand.max_units",
    "lead_time",
    "upper",
    "horizon",
    "h",
    "p",
    "h_scale",
    "seed",
    "replications",
    "checkpoints",
    "oracle",
    "oracle.resolution",
    "oracle.horizon",
    "oracle.burn_in",
    "oracle.replications",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    ExactChain,
    MonteCarlo(McSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub demand: DemandModel,
    pub lead_time: usize,
    pub upper: f64,
    pub horizon: u64,
    pub params: CostParams,
    pub h_scale: f64,
    pub seed: u64,
    pub replications: usize,
    /// Sorted, each at most `horizon`.
    pub checkpoints: Vec<u64>,
    /// Spacing of the level grid the oracle scans on `[0, upper]`.
    pub oracle_resolution: f64,
    pub oracle: OracleKind,
}

impl ExperimentConfig {
    pub fn new(
        demand: DemandModel,
        lead_time: usize,
        upper: f64,
        horizon: u64,
        params: CostParams,
    ) -> Result<Self> {
        let cfg = Self {
            demand,
            lead_time,
            upper,
            horizon,
            params,
            h_scale: 1.0,
            seed: 0,
            replications: 1,
            checkpoints: default_checkpoints(horizon),
            oracle_resolution: upper / 20.0,
            oracle: OracleKind::ExactChain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if !(self.upper.is_finite() && self.upper > 0.0) {
            return invalid(format!("upper must be positive, got {}", self.upper));
        }
        if self.horizon == 0 {
            return invalid("horizon must be at least 1".into());
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        if !(self.h_scale.is_finite() && self.h_scale > 0.0) {
            return invalid(format!("h_scale must be positive, got {}", self.h_scale));
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("checkpoints must be non-empty and strictly increasing".into());
        }
        if self.checkpoints[0] == 0 || *self.checkpoints.last().unwrap() > self.horizon {
            return invalid(format!("checkpoints must lie in [1, {}]", self.horizon));
        }
        if !(self.oracle_resolution.is_finite() && self.oracle_resolution > 0.0) {
            return invalid(format!(
                "oracle.resolution must be positive, got {}",
                self.oracle_resolution
            ));
        }
        Ok(())
    }

    pub fn learner_config(&self) -> Result<LearnerConfig> {
        LearnerConfig::new(
            self.upper,
            self.lead_time,
            self.horizon,
            self.params,
            self.h_scale,
        )
    }

    /// `0, r, 2r, ...` up to and including `upper`.
    pub fn oracle_grid(&self) -> Vec<f64> {
        let r = self.oracle_resolution;
        let steps = (self.upper / r + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * r).collect();
        if (self.upper - grid.last().unwrap()).abs() > 1e-9 * self.upper {
            grid.push(self.upper);
        } else {
            *grid.last_mut().unwrap() = self.upper;
        }
        grid
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(
                    line_no,
                    format!("expected key = value, got {line:?}"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(config_err(line_no, format!("unknown key {key:?}")));
            }
            if entries.insert(key, (line_no, value)).is_some() {
                return Err(config_err(line_no, format!("duplicate key {key:?}")));
            }
        }
        let fields = Fields(entries);

        let demand = match fields.required_str("demand")? {
            (_, "scaled-bernoulli") => DemandModel::scaled_bernoulli(
                fields.required("demand.q0")?,
                fields.required("demand.b")?,
            ),
            (_, "discrete-grid") => {
                let weights = fields.list::<f64>("demand.weights")?.unwrap_or_default();
                DemandModel::discrete_grid(fields.required("demand.step")?, weights)
            }
            (_, "truncated-geometric") => DemandModel::truncated_geometric(
                fields.required("demand.step")?,
                fields.required("demand.decay")?,
                fields.required("demand.max_units")?,
            ),
            (line, other) => {
                return Err(config_err(line, format!("unknown demand kind {other:?}")))
            }
        }?;

        let horizon: u64 = fields.required("horizon")?;
        let upper: f64 = fields.required("upper")?;
        let params = CostParams::new(fields.required("h")?, fields.required("p")?)?;
        let oracle = match fields.optional_str("oracle") {
            None | Some((_, "exact")) => OracleKind::ExactChain,
            Some((_, "monte-carlo")) => OracleKind::MonteCarlo(McSettings {
                horizon: fields.optional("oracle.horizon")?.unwrap_or(20_000),
                burn_in: fields.optional("oracle.burn_in")?.unwrap_or(1_000),
                replications: fields.optional("oracle.replications")?.unwrap_or(32),
            }),
            Some((line, other)) => {
                return Err(config_err(line, format!("unknown oracle {other:?}")))
            }
        };
        let cfg = ExperimentConfig {
            demand,
            lead_time: fields.required("lead_time")?,
            upper,
            horizon,
            params,
            h_scale: fields.optional("h_scale")?.unwrap_or(1.0),
            seed: fields.optional("seed")?.unwrap_or(0),
            replications: fields.optional("replications")?.unwrap_or(1),
            checkpoints: fields
                .list("checkpoints")?
                .unwrap_or_else(|| default_checkpoints(horizon)),
            oracle_resolution: fields
                .optional("oracle.resolution")?
                .unwrap_or(upper / 20.0),
            oracle,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Powers of ten below `horizon`, then `horizon` itself.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(10))
        .take_while(|c| *c < horizon)
        .collect();
    out.push(horizon);
    out
}

fn config_err(line: usize, message: String) -> Error {
    Error::Config { line, message }
}

struct Fields<'a>(BTreeMap<&'a str, (usize, &'a str)>);

impl<'a> Fields<'a> {
    fn optional_str(&self, key: &str) -> Option<(usize, &'a str)> {
        self.0.get(key).copied()
    }

    fn required_str(&self, key: &str) -> Result<(usize, &'a str)> {
        self.optional_str(key)
            .ok_or_else(|| config_err(0, format!("missing key {key:?}")))
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.optional_str(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(line, format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.optional(key)?
            .ok_or_else(|| config_err(0, format!("missing key {key:?}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.optional_str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| config_err(line, format!("cannot parse {key} item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}
