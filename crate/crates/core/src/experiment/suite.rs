use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OracleSource};
use crate::agents::{self, AgentConfig, Algorithm, TrainedAgent};
use crate::corruption::{self, AttackOracle, CorruptionSpec, Element, Mode};
use crate::data::Dataset;
use crate::envs::{make_env, Environment};
use crate::error::{invalid, Result};
use crate::eval::{self, EvalResult, ReferenceScores};
use crate::seed::{derive_seed, role};

/// Caps the worker pool used by [`run_suite`].
pub const THREADS_ENV: &str = "RIQL_LAB_THREADS";

/// One training and evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    /// `None` for the clean dataset.
    pub attack: Option<(Element, Mode)>,
    pub seed: u64,
}

impl Cell {
    pub fn key(&self) -> String {
        let (e, m) = match self.attack {
            Some((e, m)) => (e.as_str(), m.as_str()),
            None => ("none", "none"),
        };
        format!("{}-{e}-{m}-s{}", self.algorithm, self.seed)
    }
}

/// Cells in grid order: algorithm, then clean before each attack, then seed.
pub fn enumerate_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut attacks: Vec<Option<(Element, Mode)>> = Vec::new();
    if config.attacks.include_clean {
        attacks.push(None);
    }
    for &e in &config.attacks.elements {
        for &m in &config.attacks.modes {
            attacks.push(Some((e, m)));
        }
    }
    let mut cells = Vec::new();
    for &algorithm in &config.algorithms {
        for &attack in &attacks {
            for &seed in &config.eval.seeds {
                cells.push(Cell { algorithm, attack, seed });
            }
        }
    }
    cells
}

/// Saved next to each finished cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: Cell,
    pub agent: AgentConfig,
    pub corruption: Option<CorruptionSpec>,
    pub eval_seed: u64,
    pub final_losses: Option<[f64; 3]>,
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Done,
    Failed { error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub cells: BTreeMap<String, CellStatus>,
}

impl Manifest {
    fn load(path: &Path) -> Result<Self> {
        if path.exists() {
            Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
        } else {
            Ok(Self::default())
        }
    }

    fn store(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
    pub results_path: PathBuf,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn corruption_spec(config: &ExperimentConfig, cell: &Cell) -> Option<CorruptionSpec> {
    cell.attack.map(|(element, mode)| CorruptionSpec {
        element,
        mode,
        rate: config.attacks.rate,
        scale: config.attacks.scale,
        seed: derive_seed(
            config.master_seed,
            &[role::CELL_CORRUPT, element.code(), mode as u64, cell.seed],
        ),
    })
}

fn build_oracle(config: &ExperimentConfig, clean: &Dataset) -> Result<TrainedAgent> {
    match &config.oracle {
        Some(OracleSource::Checkpoint(p)) => TrainedAgent::load(p),
        Some(OracleSource::Train(overrides)) => {
            let mut cfg = AgentConfig::from_overrides(overrides)?;
            cfg.seed = derive_seed(config.master_seed, &[role::ORACLE]);
            if !cfg.has_critics() {
                return Err(invalid("the attack oracle needs Q-functions"));
            }
            Ok(agents::train(clean, &cfg)?.0)
        }
        None => Err(invalid("adversarial attacks need an oracle")),
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn run_cell(
    config: &ExperimentConfig,
    env: &dyn Environment,
    refs: &ReferenceScores,
    data: &Dataset,
    cell: &Cell,
    spec: Option<CorruptionSpec>,
    dir: &Path,
) -> Result<CellRecord> {
    let mut agent_cfg = config.agent_config(cell.algorithm)?;
    agent_cfg.seed = derive_seed(config.master_seed, &[role::CELL_TRAIN, cell.seed]);
    let (agent, trace) = agents::train(data, &agent_cfg)?;
    let eval_seed = derive_seed(config.master_seed, &[role::CELL_EVAL, cell.seed]);
    let stats = eval::evaluate(&agent, env, config.eval.episodes, None, eval_seed)?;
    let last = trace.len().checked_sub(1);
    let (element, mode) = match cell.attack {
        Some((e, m)) => (e.as_str(), m.as_str()),
        None => ("none", "none"),
    };
    let result = EvalResult {
        env: config.env.clone(),
        algorithm: cell.algorithm.to_string(),
        attack_element: element.into(),
        attack_mode: mode.into(),
        rate: if cell.attack.is_some() { config.attacks.rate } else { 0.0 },
        scale: if cell.attack.is_some() { config.attacks.scale } else { 0.0 },
        seed: cell.seed,
        mean_return: stats.mean,
        normalized_score: eval::normalized_score(stats.mean, refs)?,
        episodes: stats.episodes,
    };
    fs::create_dir_all(dir)?;
    if config.save_checkpoints {
        agent.save(dir.join("agent"))?;
    }
    let record = CellRecord {
        cell: *cell,
        agent: agent_cfg,
        corruption: spec,
        eval_seed,
        final_losses: last.map(|i| [trace.q[i], trace.v[i], trace.policy[i]]),
        result,
    };
    write_atomic(&dir.join("result.json"), &serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

fn read_record(dir: &Path) -> Result<CellRecord> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("result.json"))?)?)
}

/// Runs every cell of the grid not already marked done in the manifest and
/// rewrites `results.csv` from all finished cells.
///
/// Each cell derives its corruption, training and evaluation seeds from the
/// master seed and its own coordinates, so results do not depend on the
/// order or parallelism of execution. Failed cells are recorded and retried
/// on the next run.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteSummary> {
    config.validate()?;
    let out = &config.output_dir;
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir)?;
    write_atomic(&out.join("config.json"), &serde_json::to_string_pretty(config)?)?;

    let env = make_env(&config.env)?;
    let refs = ReferenceScores::measure(
        env.as_ref(),
        config.eval.reference_episodes,
        derive_seed(config.master_seed, &[role::REFERENCES]),
    )?;
    refs.validate()?;
    write_atomic(&out.join("references.json"), &serde_json::to_string_pretty(&refs)?)?;

    let manifest_path = out.join("manifest.json");
    let mut manifest = Manifest::load(&manifest_path)?;
    let cells = enumerate_cells(config);
    let (pending, done): (Vec<Cell>, Vec<Cell>) = cells.iter().partition(|c| {
        !(matches!(manifest.cells.get(&c.key()), Some(CellStatus::Done))
            && cells_dir.join(c.key()).join("result.json").exists())
    });

    let mut failed = Vec::new();
    if !pending.is_empty() {
        let clean = config.load_dataset()?;
        let needs_oracle = pending
            .iter()
            .any(|c| matches!(c.attack, Some((e, Mode::Adversarial)) if e != Element::Reward));
        let oracle = if needs_oracle { Some(build_oracle(config, &clean)?) } else { None };

        let pool = {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(n) = thread_count()? {
                b = b.num_threads(n);
            }
            b.build().map_err(|e| invalid(format!("thread pool: {e}")))?
        };

        // Corrupted datasets are shared by every algorithm at the same seed.
        let mut keys: Vec<(Element, Mode, u64)> = pending
            .iter()
            .filter_map(|c| c.attack.map(|(e, m)| (e, m, c.seed)))
            .collect();
        keys.sort();
        keys.dedup();
        let datasets: HashMap<(Element, Mode, u64), Result<Dataset>> = pool.install(|| {
            keys.par_iter()
                .map(|&(e, m, seed)| {
                    let cell = Cell { algorithm: Algorithm::Bc, attack: Some((e, m)), seed };
                    let spec = corruption_spec(config, &cell).expect("attacked cell");
                    let o = oracle.as_ref().map(|a| a as &dyn AttackOracle);
                    ((e, m, seed), corruption::corrupt(&clean, &spec, o, &config.pgd))
                })
                .collect()
        });

        let (tx, rx) = mpsc::channel::<(String, std::result::Result<(), String>)>();
        manifest = std::thread::scope(|scope| -> Result<Manifest> {
            let coordinator = scope.spawn(move || -> Result<Manifest> {
                for (key, outcome) in rx {
                    let status = match outcome {
                        Ok(()) => CellStatus::Done,
                        Err(error) => CellStatus::Failed { error },
                    };
                    manifest.cells.insert(key, status);
                    manifest.store(&manifest_path)?;
                }
                Ok(manifest)
            });
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, cell| {
                    let spec = corruption_spec(config, cell);
                    let data = match &cell.attack {
                        Some((e, m)) => datasets[&(*e, *m, cell.seed)].as_ref().map_err(|e| e.to_string()),
                        None => Ok(&clean),
                    };
                    let outcome = data.and_then(|d| {
                        run_cell(config, env.as_ref(), &refs, d, cell, spec, &cells_dir.join(cell.key()))
                            .map(|_| ())
                            .map_err(|e| e.to_string())
                    });
                    let _ = tx.send((cell.key(), outcome));
                });
            });
            coordinator
                .join()
                .map_err(|_| invalid("suite coordinator panicked"))?
        })?;
        for cell in &pending {
            if let Some(CellStatus::Failed { error }) = manifest.cells.get(&cell.key()) {
                failed.push((cell.key(), error.clone()));
            }
        }
    }

    let mut results = Vec::new();
    for cell in &cells {
        if matches!(manifest.cells.get(&cell.key()), Some(CellStatus::Done)) {
            results.push(read_record(&cells_dir.join(cell.key()))?.result);
        }
    }
    let results_path = out.join("results.csv");
    eval::emit_results(&results, &results_path)?;
    Ok(SuiteSummary {
        executed: pending.len() - failed.len(),
        skipped: done.len(),
        failed,
        results_path,
    })
}
