//! Transitions, datasets, observation statistics and the JSON-lines dataset format.

mod dataset;
mod io;
mod stats;

pub use dataset::{Action, ActionKind, Dataset, Transition};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use stats::{column_std, compute_obs_stats, normalize, ObsStats, STD_FLOOR};
