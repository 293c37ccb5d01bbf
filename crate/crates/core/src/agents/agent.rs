use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentConfig;
use crate::corruption::AttackOracle;
use crate::data::{Action, ActionKind, Dataset, ObsStats};
use crate::envs::argmax;
use crate::error::{invalid, Error, Result};
use crate::nn::{load_mlp, load_policy, save_mlp, save_policy, Mlp, PolicyHead};
use crate::robust::{ensemble_quantile, mean};
use crate::seed::{self, role};

/// A trained policy with its critics and the observation normalization it
/// was trained under. All public queries take raw observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAgent {
    pub config: AgentConfig,
    pub obs_stats: ObsStats,
    pub d_s: usize,
    pub d_a: usize,
    pub action_kind: ActionKind,
    pub policy: PolicyHead,
    pub value: Option<Mlp>,
    pub q: Vec<Mlp>,
    pub q_target: Vec<Mlp>,
}

/// Mean of `m(s,a) − Q_α(s,a)` over attacked and clean rows, where `m` is
/// the ensemble mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub attacked: f64,
    pub clean: f64,
    pub alpha: f64,
    pub k_ensemble: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: AgentConfig,
    obs_stats: ObsStats,
    d_s: usize,
    d_a: usize,
    action_kind: ActionKind,
    has_value: bool,
    q_members: usize,
}

impl TrainedAgent {
    fn normalized(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.obs_stats.apply(state)
    }

    /// Raw policy output (mean action) for a raw state.
    pub fn policy_output(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.policy.mean_action(&self.normalized(state)?)
    }

    /// Evaluation action: the mean action, or its argmax for discrete tasks.
    pub fn act(&self, state: &[f64]) -> Result<Action> {
        let out = self.policy_output(state)?;
        Ok(match self.action_kind {
            ActionKind::Continuous => Action::Continuous(out),
            ActionKind::Discrete => Action::Discrete(argmax(&out)),
        })
    }

    fn require_value(&self) -> Result<&Mlp> {
        self.value
            .as_ref()
            .ok_or_else(|| Error::NoValueFunction(self.config.algorithm.to_string()))
    }

    pub fn state_value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.require_value()?.forward(&self.normalized(state)?)?[0])
    }

    /// Every online Q member at `(state, action)`.
    pub fn q_members(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if self.q.is_empty() {
            return Err(Error::NoValueFunction(self.config.algorithm.to_string()));
        }
        if action.len() != self.d_a {
            return Err(Error::DimensionMismatch {
                context: "q action".into(),
                expected: self.d_a,
                got: action.len(),
            });
        }
        let mut input = self.normalized(state)?;
        input.extend_from_slice(action);
        self.q.iter().map(|q| Ok(q.forward(&input)?[0])).collect()
    }

    /// Bootstrap targets `r + γ(1−done)·V(s')` for `n` rows drawn uniformly
    /// with replacement, minus their mean.
    pub fn q_target_samples(&self, data: &Dataset, n: usize, seed_: u64) -> Result<Vec<f64>> {
        self.require_value()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = seed::derived_rng(seed_, &[role::SAMPLES]);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let t = &data.transitions[rng.random_range(0..data.len())];
            let bootstrap = if t.terminal { 0.0 } else { self.state_value(&t.next_state)? };
            out.push(t.reward + self.config.gamma * bootstrap);
        }
        let m = mean(&out);
        out.iter_mut().for_each(|x| *x -= m);
        Ok(out)
    }

    /// In-dataset penalty `m − Q_α` of the online ensemble, split by whether
    /// a row index is in `attacked`.
    pub fn penalty_report(&self, data: &Dataset, attacked: &[usize], alpha: f64) -> Result<PenaltyReport> {
        if self.q.len() < 2 {
            return Err(invalid("the penalty needs at least two Q members"));
        }
        let mut flagged = vec![false; data.len()];
        for &i in attacked {
            *flagged
                .get_mut(i)
                .ok_or_else(|| invalid(format!("attacked row {i} is out of range")))? = true;
        }
        let (mut sums, mut counts) = ([0.0; 2], [0usize; 2]);
        for (i, t) in data.transitions.iter().enumerate() {
            let qs = self.q_members(&t.state, &t.action.to_vector(data.d_a))?;
            let penalty = mean(&qs) - ensemble_quantile(&qs, alpha)?;
            let g = usize::from(flagged[i]);
            sums[g] += penalty;
            counts[g] += 1;
        }
        let avg = |g: usize| if counts[g] == 0 { 0.0 } else { sums[g] / counts[g] as f64 };
        Ok(PenaltyReport {
            attacked: avg(1),
            clean: avg(0),
            alpha,
            k_ensemble: self.q.len(),
        })
    }

    /// Writes `config.json` plus one network file per component.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            version: 1,
            config: self.config.clone(),
            obs_stats: self.obs_stats.clone(),
            d_s: self.d_s,
            d_a: self.d_a,
            action_kind: self.action_kind,
            has_value: self.value.is_some(),
            q_members: self.q.len(),
        };
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        save_policy(&self.policy, dir.join("policy.jsonl"))?;
        if let Some(v) = &self.value {
            save_mlp(v, dir.join("value.jsonl"))?;
        }
        for (i, (q, t)) in self.q.iter().zip(&self.q_target).enumerate() {
            save_mlp(q, dir.join(format!("q{i}.jsonl")))?;
            save_mlp(t, dir.join(format!("q{i}_target.jsonl")))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        if manifest.version != 1 {
            return Err(invalid(format!("unsupported checkpoint version {}", manifest.version)));
        }
        let value = if manifest.has_value {
            Some(load_mlp(dir.join("value.jsonl"))?)
        } else {
            None
        };
        let mut q = Vec::new();
        let mut q_target = Vec::new();
        for i in 0..manifest.q_members {
            q.push(load_mlp(dir.join(format!("q{i}.jsonl")))?);
            q_target.push(load_mlp(dir.join(format!("q{i}_target.jsonl")))?);
        }
        let agent = Self {
            config: manifest.config,
            obs_stats: manifest.obs_stats,
            d_s: manifest.d_s,
            d_a: manifest.d_a,
            action_kind: manifest.action_kind,
            policy: load_policy(dir.join("policy.jsonl"))?,
            value,
            q,
            q_target,
        };
        if agent.policy.backbone().input_dim() != agent.d_s || agent.obs_stats.dim() != agent.d_s {
            return Err(invalid("checkpoint networks disagree with the recorded state size"));
        }
        Ok(agent)
    }
}

/// Mean of the online ensemble; the policy answers in action-vector form
/// (one-hot for discrete tasks).
impl AttackOracle for TrainedAgent {
    fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(mean(&self.q_members(state, action)?))
    }

    fn policy_act(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.act(state)?.to_vector(self.d_a))
    }
}
