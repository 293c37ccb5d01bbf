//! Rollout evaluation, normalized scores and result tables.

use std::cmp::Ordering;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::TrainedAgent;
use crate::data::Action;
use crate::envs::Environment;
use crate::error::{invalid, Result};
use crate::seed::{self, role};

/// Undiscounted episode returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub episodes: usize,
}

impl ReturnStats {
    pub fn of(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(invalid("need at least one episode"));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            episodes: returns.len(),
        })
    }
}

/// Runs `episodes` episodes of `policy` in `env`, episode `e` seeded from
/// `(seed, e)`. Episodes stop at a terminal state or after `max_len` steps
/// (the environment horizon when `None`).
pub fn evaluate_policy(
    env: &dyn Environment,
    policy: &mut dyn FnMut(&[f64]) -> Result<Action>,
    episodes: usize,
    max_len: Option<usize>,
    seed_: u64,
) -> Result<ReturnStats> {
    let max_len = max_len.unwrap_or(env.horizon());
    let returns = (0..episodes as u64)
        .map(|e| {
            let mut rng = seed::derived_rng(seed_, &[role::EVAL, e]);
            let mut state = env.reset(&mut rng);
            let mut total = 0.0;
            for _ in 0..max_len {
                let out = env.step(&state, &policy(&state)?, &mut rng)?;
                total += out.reward;
                state = out.next_state;
                if out.terminal {
                    break;
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    ReturnStats::of(&returns)
}

/// Evaluates a trained agent in the clean environment.
pub fn evaluate(
    agent: &TrainedAgent,
    env: &dyn Environment,
    episodes: usize,
    max_len: Option<usize>,
    seed_: u64,
) -> Result<ReturnStats> {
    if agent.d_s != env.d_s() || agent.d_a != env.d_a() || agent.action_kind != env.action_kind() {
        return Err(invalid(format!(
            "agent shape ({}, {}) does not fit environment {} ({}, {})",
            agent.d_s,
            agent.d_a,
            env.name(),
            env.d_s(),
            env.d_a()
        )));
    }
    evaluate_policy(env, &mut |s| agent.act(s), episodes, max_len, seed_)
}

/// Random-policy and expert returns used to normalize scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub random_score: f64,
    pub expert_score: f64,
}

impl ReferenceScores {
    /// Measures both references over `episodes` episodes.
    pub fn measure(env: &dyn Environment, episodes: usize, seed_: u64) -> Result<Self> {
        let mut action_rng = seed::derived_rng(seed_, &[role::EVAL, u64::MAX]);
        let random = evaluate_policy(env, &mut |_| Ok(env.random_action(&mut action_rng)), episodes, None, seed_)?;
        let expert = evaluate_policy(env, &mut |s| env.expert_action(s), episodes, None, seed_)?;
        let refs = Self {
            random_score: random.mean,
            expert_score: expert.mean,
        };
        refs.validate()?;
        Ok(refs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.expert_score == self.random_score {
            return Err(invalid("expert and random reference scores coincide"));
        }
        Ok(())
    }
}

/// `100·(score − random)/(expert − random)`.
pub fn normalized_score(score: f64, refs: &ReferenceScores) -> Result<f64> {
    refs.validate()?;
    Ok(100.0 * (score - refs.random_score) / (refs.expert_score - refs.random_score))
}

/// `100·(clean − corrupted)/clean`.
pub fn degradation_percentage(clean_score: f64, corrupted_score: f64) -> Result<f64> {
    if !(clean_score > 0.0) {
        return Err(invalid(format!(
            "degradation needs a positive clean score, got {clean_score}"
        )));
    }
    Ok(100.0 * (clean_score - corrupted_score) / clean_score)
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub env: String,
    pub algorithm: String,
    /// `none` for clean data.
    pub attack_element: String,
    pub attack_mode: String,
    pub rate: f64,
    pub scale: f64,
    pub seed: u64,
    pub mean_return: f64,
    pub normalized_score: f64,
    pub episodes: usize,
}

fn row_order(a: &EvalResult, b: &EvalResult) -> Ordering {
    (&a.env, &a.algorithm, &a.attack_element, &a.attack_mode)
        .cmp(&(&b.env, &b.algorithm, &b.attack_element, &b.attack_mode))
        .then(a.rate.total_cmp(&b.rate))
        .then(a.scale.total_cmp(&b.scale))
        .then(a.seed.cmp(&b.seed))
        .then(a.mean_return.total_cmp(&b.mean_return))
}

/// Writes the results as CSV, sorted by environment, algorithm, attack and
/// seed. Identical inputs give identical bytes.
pub fn emit_results(results: &[EvalResult], path: impl AsRef<Path>) -> Result<()> {
    let mut rows = results.to_vec();
    rows.sort_by(row_order);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(File::create(path)?);
    w.write_record([
        "env",
        "algorithm",
        "attack_element",
        "attack_mode",
        "rate",
        "scale",
        "seed",
        "mean_return",
        "normalized_score",
        "episodes",
    ])?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<EvalResult>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<EvalResult>, _>>()?)
}

/// Merges `results` into the table at `path` (created if missing).
pub fn append_results(results: &[EvalResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut all = if path.exists() { read_results(path)? } else { Vec::new() };
    all.extend_from_slice(results);
    emit_results(&all, path)
}
