//! Desk-scale laboratory for offline reinforcement learning on corrupted
//! datasets: behavior cloning, IQL and robust IQL, random and adversarial
//! dataset attacks, exact tabular oracles, and evaluation tooling.

pub mod agents;
pub mod corruption;
pub mod data;
pub mod envs;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod robust;
pub mod seed;

pub use error::{Error, Result};
