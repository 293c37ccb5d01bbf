use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::PolicyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bc,
    Iql,
    Riql,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bc, Algorithm::Iql, Algorithm::Riql];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bc => "bc",
            Algorithm::Iql => "iql",
            Algorithm::Riql => "riql",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "algorithm",
                name: s.to_string(),
            })
    }
}

/// How the target ensemble is reduced to one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    Min,
    Quantile(f64),
}

/// Q regression loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QLoss {
    Squared,
    Huber(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Inverse temperature of the advantage weights.
    pub beta: f64,
    /// Expectile of the value regression.
    pub tau: f64,
    /// Huber threshold.
    pub delta: f64,
    /// Ensemble quantile.
    pub alpha: f64,
    pub k_ensemble: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub train_steps: usize,
    pub target_rho: f64,
    pub normalize_obs: bool,
    pub use_huber: bool,
    pub use_quantile: bool,
    pub policy_kind: PolicyKind,
    pub adv_weight_clip: f64,
    /// Hidden layer widths shared by every network.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self::preset(Algorithm::Riql)
    }
}

impl AgentConfig {
    /// Defaults for each algorithm. BC and IQL train on raw observations;
    /// IQL keeps two squared-loss critics reduced by their minimum.
    pub fn preset(algorithm: Algorithm) -> Self {
        let riql = Self {
            algorithm,
            beta: 3.0,
            tau: 0.7,
            delta: 1.0,
            alpha: 0.25,
            k_ensemble: 5,
            gamma: 0.99,
            learning_rate: 3e-4,
            batch_size: 256,
            train_steps: 10_000,
            target_rho: 0.005,
            normalize_obs: true,
            use_huber: true,
            use_quantile: true,
            policy_kind: PolicyKind::Deterministic,
            adv_weight_clip: 100.0,
            hidden: vec![64, 64],
            seed: 0,
        };
        match algorithm {
            Algorithm::Riql => riql,
            Algorithm::Iql | Algorithm::Bc => Self {
                k_ensemble: 2,
                normalize_obs: false,
                use_huber: false,
                use_quantile: false,
                ..riql
            },
        }
    }

    /// Preset of `overrides["algorithm"]` (RIQL when absent) with the other
    /// keys of `overrides` laid over it.
    pub fn from_overrides(overrides: &serde_json::Value) -> Result<Self> {
        let obj = overrides
            .as_object()
            .ok_or_else(|| invalid("agent config must be a JSON object"))?;
        let algorithm = match obj.get("algorithm") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| invalid("algorithm must be a string"))?
                .parse()?,
            None => Algorithm::Riql,
        };
        let mut merged = serde_json::to_value(Self::preset(algorithm))?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in obj {
            target.insert(k.clone(), v.clone());
        }
        let config: Self = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {x}")))
            }
        };
        positive(self.beta, "beta")?;
        positive(self.delta, "delta")?;
        positive(self.learning_rate, "learning_rate")?;
        positive(self.adv_weight_clip, "adv_weight_clip")?;
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!("tau must lie in (0,1), got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0,1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma must lie in [0,1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.target_rho) {
            return Err(invalid("target_rho must lie in [0,1]"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden widths must be positive"));
        }
        if self.k_ensemble == 0 {
            return Err(invalid("k_ensemble must be at least 1"));
        }
        if self.use_quantile && self.k_ensemble < 2 {
            return Err(invalid("the quantile estimator needs k_ensemble >= 2"));
        }
        Ok(())
    }

    pub fn has_critics(&self) -> bool {
        self.algorithm != Algorithm::Bc
    }

    /// Number of Q networks trained: `k_ensemble` with the quantile
    /// estimator, otherwise at most two.
    pub fn ensemble_size(&self) -> usize {
        if self.use_quantile {
            self.k_ensemble
        } else {
            self.k_ensemble.min(2)
        }
    }

    pub fn aggregator(&self) -> Aggregator {
        if self.use_quantile {
            Aggregator::Quantile(self.alpha)
        } else {
            Aggregator::Min
        }
    }

    pub fn q_loss(&self) -> QLoss {
        if self.use_huber {
            QLoss::Huber(self.delta)
        } else {
            QLoss::Squared
        }
    }
}
