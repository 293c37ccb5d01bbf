//! Resumable benchmark grids over algorithms, attacks and seeds.

mod config;
mod suite;

pub use config::{AttackGrid, DatasetSource, EvalSpec, ExperimentConfig, OracleSource};
pub use suite::{enumerate_cells, run_suite, Cell, CellRecord, CellStatus, Manifest, SuiteSummary, THREADS_ENV};
