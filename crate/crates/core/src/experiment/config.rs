use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Algorithm};
use crate::corruption::{Element, Mode, PgdConfig};
use crate::data::{load_dataset, Dataset};
use crate::envs::{generate_dataset, make_env, PolicyMixture};
use crate::error::{invalid, Result};

/// Where the offline dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Path(PathBuf),
    Generate {
        #[serde(default = "default_mixture")]
        mixture: String,
        n: usize,
        seed: u64,
    },
}

fn default_mixture() -> String {
    "medium-replay".into()
}

/// The attack axis of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackGrid {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Adds one uncorrupted cell per algorithm and seed.
    #[serde(default)]
    pub include_clean: bool,
}

impl Default for AttackGrid {
    fn default() -> Self {
        Self {
            elements: Vec::new(),
            modes: default_modes(),
            rate: default_rate(),
            scale: default_scale(),
            include_clean: false,
        }
    }
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Random]
}

fn default_rate() -> f64 {
    0.3
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Episodes used to measure the random and expert references.
    #[serde(default = "default_reference_episodes")]
    pub reference_episodes: usize,
}

fn default_episodes() -> usize {
    10
}

fn default_reference_episodes() -> usize {
    100
}

/// Agent used to compute adversarial perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSource {
    Checkpoint(PathBuf),
    /// Trains an agent on the clean dataset; keys override its preset.
    Train(serde_json::Value),
}

/// A benchmark grid: algorithms × attacks × seeds on one dataset.
///
/// ```json
/// {
///   "env": "pointmass",
///   "dataset": {"generate": {"mixture": "medium-replay", "n": 20000, "seed": 1}},
///   "algorithms": ["bc", "iql", "riql"],
///   "attacks": {"elements": ["observation", "dynamics"], "modes": ["random"],
///               "rate": 0.3, "scale": 1.0, "include_clean": true},
///   "agent": {"train_steps": 3000},
///   "agent_overrides": {"riql": {"alpha": 0.1}},
///   "eval": {"episodes": 10, "seeds": [0, 1, 2, 3]},
///   "master_seed": 7,
///   "output_dir": "runs/pointmass"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    pub dataset: DatasetSource,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub attacks: AttackGrid,
    /// Overrides shared by every algorithm.
    #[serde(default = "empty_object")]
    pub agent: serde_json::Value,
    /// Per-algorithm overrides, applied after `agent`.
    #[serde(default)]
    pub agent_overrides: std::collections::BTreeMap<Algorithm, serde_json::Value>,
    pub eval: EvalSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub oracle: Option<OracleSource>,
    #[serde(default)]
    pub pgd: PgdConfig,
    #[serde(default)]
    pub save_checkpoints: bool,
    pub output_dir: PathBuf,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        make_env(&self.env)?;
        if self.eval.seeds.is_empty() {
            return Err(invalid("eval.seeds must not be empty"));
        }
        if self.eval.episodes == 0 || self.eval.reference_episodes == 0 {
            return Err(invalid("evaluation needs at least one episode"));
        }
        match &self.dataset {
            DatasetSource::Path(p) if !p.exists() => {
                return Err(invalid(format!("dataset {} does not exist", p.display())))
            }
            DatasetSource::Generate { mixture, n, .. } => {
                PolicyMixture::by_name(mixture)?;
                if *n == 0 {
                    return Err(invalid("generated dataset size must be positive"));
                }
            }
            _ => {}
        }
        if self.attacks.elements.contains(&Element::Mixed) && self.attacks.modes.contains(&Mode::Adversarial) {
            return Err(invalid("the mixed attack is only defined in random mode"));
        }
        let adversarial = self.attacks.modes.contains(&Mode::Adversarial)
            && self.attacks.elements.iter().any(|e| *e != Element::Reward);
        match &self.oracle {
            None if adversarial => return Err(invalid("adversarial attacks need an oracle")),
            Some(OracleSource::Checkpoint(p)) if !p.exists() => {
                return Err(invalid(format!("oracle {} does not exist", p.display())))
            }
            _ => {}
        }
        self.pgd.validate()?;
        for a in &self.algorithms {
            self.agent_config(*a)?;
        }
        Ok(())
    }

    /// Preset of `algorithm`, then shared overrides, then its own overrides.
    pub fn agent_config(&self, algorithm: Algorithm) -> Result<AgentConfig> {
        let mut merged = serde_json::Map::new();
        let layers = [Some(&self.agent), self.agent_overrides.get(&algorithm)];
        for layer in layers.into_iter().flatten() {
            let obj = layer
                .as_object()
                .ok_or_else(|| invalid("agent overrides must be JSON objects"))?;
            merged.extend(obj.clone());
        }
        merged.insert("algorithm".into(), serde_json::to_value(algorithm)?);
        AgentConfig::from_overrides(&serde_json::Value::Object(merged))
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Path(p) => load_dataset(p),
            DatasetSource::Generate { mixture, n, seed } => {
                let env = make_env(&self.env)?;
                generate_dataset(env.as_ref(), &PolicyMixture::by_name(mixture)?, *n, *seed)
            }
        }
    }
}
