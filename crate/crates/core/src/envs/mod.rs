//! Desk-scale environments, dataset generation and tabular oracles.
//!
//! Environments are stateless: the caller owns the state vector, so any
//! number of episodes can run against one shared instance.

mod corruption_level;
mod generate;
mod gridworld;
mod pointmass;
mod tabular;

use std::sync::Arc;

pub use corruption_level::{corruption_level_report, CorruptionLevelReport};
pub use generate::{generate_dataset, rollout_return, BehaviorPolicy, PolicyMixture};
pub use gridworld::{gridworld, GridworldConfig, TabularEnv};
pub use pointmass::{PointMassConfig, PointMassEnv};
pub use tabular::{argmax, TabularMdp, Values};

use crate::data::{Action, ActionKind};
use crate::error::{Error, Result};
use crate::seed::LabRng;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    fn d_s(&self) -> usize;
    /// Action vector width; the number of actions for discrete environments.
    fn d_a(&self) -> usize;
    fn action_kind(&self) -> ActionKind;
    fn horizon(&self) -> usize;
    fn reset(&self, rng: &mut LabRng) -> Vec<f64>;
    fn step(&self, state: &[f64], action: &Action, rng: &mut LabRng) -> Result<StepOutcome>;
    fn random_action(&self, rng: &mut LabRng) -> Action;
    /// Scripted or value-iteration expert.
    fn expert_action(&self, state: &[f64]) -> Result<Action>;
    fn tabular(&self) -> Option<&TabularMdp> {
        None
    }
}

pub const ENV_NAMES: &[&str] = &["gridworld", "pointmass"];

/// Builds a registered environment with its default configuration.
pub fn make_env(name: &str) -> Result<Arc<dyn Environment>> {
    match name {
        "gridworld" => Ok(Arc::new(gridworld(&GridworldConfig::default())?)),
        "pointmass" => Ok(Arc::new(PointMassEnv::new(PointMassConfig::default()))),
        other => Err(Error::Unknown {
            kind: "environment",
            name: other.to_string(),
        }),
    }
}
