//! BC, IQL and RIQL learners.
//!
//! IQL and RIQL share one trainer; they differ only in the switches of
//! [`AgentConfig`]. Learners are registered by name in [`registry`].

mod agent;
mod config;
mod trainer;

pub use agent::{PenaltyReport, TrainedAgent};
pub use config::{Aggregator, AgentConfig, Algorithm, QLoss};
pub use trainer::{advantage_weights, q_loss_and_grad, LossTrace, StepLosses, Trainer};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A training strategy.
pub trait Learner: Send + Sync {
    fn algorithm(&self) -> Algorithm;
    fn train(&self, data: &Dataset, config: &AgentConfig) -> Result<(TrainedAgent, LossTrace)>;
}

struct Bc;
struct Iql;
struct Riql;

fn run(data: &Dataset, config: &AgentConfig, expected: Algorithm) -> Result<(TrainedAgent, LossTrace)> {
    if config.algorithm != expected {
        return Err(Error::InvalidArgument(format!(
            "{} learner got a {} config",
            expected, config.algorithm
        )));
    }
    let mut trainer = Trainer::new(data, config)?;
    let mut trace = LossTrace::default();
    for _ in 0..config.train_steps {
        trace.push(trainer.step()?);
    }
    Ok((trainer.finish(), trace))
}

impl Learner for Bc {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Bc
    }

    fn train(&self, data: &Dataset, config: &AgentConfig) -> Result<(TrainedAgent, LossTrace)> {
        run(data, config, Algorithm::Bc)
    }
}

impl Learner for Iql {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Iql
    }

    fn train(&self, data: &Dataset, config: &AgentConfig) -> Result<(TrainedAgent, LossTrace)> {
        run(data, config, Algorithm::Iql)
    }
}

impl Learner for Riql {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Riql
    }

    fn train(&self, data: &Dataset, config: &AgentConfig) -> Result<(TrainedAgent, LossTrace)> {
        run(data, config, Algorithm::Riql)
    }
}

pub fn registry() -> Vec<Box<dyn Learner>> {
    vec![Box::new(Bc), Box::new(Iql), Box::new(Riql)]
}

pub fn learner(algorithm: Algorithm) -> Box<dyn Learner> {
    registry()
        .into_iter()
        .find(|l| l.algorithm() == algorithm)
        .expect("every algorithm is registered")
}

/// Trains with the learner named by `config.algorithm`.
pub fn train(data: &Dataset, config: &AgentConfig) -> Result<(TrainedAgent, LossTrace)> {
    learner(config.algorithm).train(data, config)
}
