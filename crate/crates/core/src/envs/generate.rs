use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::data::{Action, Dataset, Transition};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, role, LabRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorPolicy {
    Random,
    Expert,
    /// Expert action, replaced by a uniformly random one with probability `epsilon`.
    EpsilonExpert { epsilon: f64 },
    /// Explicit `probs[state][action]` for tabular environments.
    Tabular { probs: Vec<Vec<f64>> },
}

impl BehaviorPolicy {
    pub fn act(&self, env: &dyn Environment, state: &[f64], rng: &mut LabRng) -> Result<Action> {
        match self {
            BehaviorPolicy::Random => Ok(env.random_action(rng)),
            BehaviorPolicy::Expert => env.expert_action(state),
            BehaviorPolicy::EpsilonExpert { epsilon } => {
                if rng.random::<f64>() < *epsilon {
                    Ok(env.random_action(rng))
                } else {
                    env.expert_action(state)
                }
            }
            BehaviorPolicy::Tabular { probs } => {
                let mdp = env
                    .tabular()
                    .ok_or_else(|| Error::NonTabular(format!("{} is not tabular", env.name())))?;
                let s = mdp
                    .state_index(state)
                    .ok_or_else(|| Error::NonTabular("state is not one-hot".into()))?;
                let row = probs
                    .get(s)
                    .ok_or_else(|| invalid("tabular behavior policy misses a state"))?;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(Action::Discrete(a));
                    }
                }
                Ok(Action::Discrete(row.iter().rposition(|p| *p > 0.0).unwrap_or(0)))
            }
        }
    }
}

/// Episode-level mixture: each episode draws one component by weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMixture {
    pub components: Vec<(f64, BehaviorPolicy)>,
}

impl PolicyMixture {
    /// Half random episodes, half ε-greedy expert episodes with ε = 0.3.
    pub fn medium_replay() -> Self {
        Self {
            components: vec![
                (0.5, BehaviorPolicy::Random),
                (0.5, BehaviorPolicy::EpsilonExpert { epsilon: 0.3 }),
            ],
        }
    }

    pub fn single(policy: BehaviorPolicy) -> Self {
        Self {
            components: vec![(1.0, policy)],
        }
    }

    /// Named presets: `medium-replay`, `random`, `expert`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "medium-replay" => Ok(Self::medium_replay()),
            "random" => Ok(Self::single(BehaviorPolicy::Random)),
            "expert" => Ok(Self::single(BehaviorPolicy::Expert)),
            other => Err(Error::Unknown {
                kind: "policy mixture",
                name: other.to_string(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(invalid("policy mixture has no components"));
        }
        if self.components.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(invalid("mixture weights must be non-negative"));
        }
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("mixture weights sum to {total}")));
        }
        for (_, p) in &self.components {
            if let BehaviorPolicy::EpsilonExpert { epsilon } = p {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(invalid("epsilon must lie in [0,1]"));
                }
            }
        }
        Ok(())
    }

    fn pick(&self, rng: &mut LabRng) -> &BehaviorPolicy {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, p) in &self.components {
            acc += w;
            if u < acc {
                return p;
            }
        }
        &self.components.last().expect("validated").1
    }
}

/// Rolls out whole episodes until `n_transitions` are recorded; the final
/// episode is cut short if needed. Episode `e` uses its own stream derived
/// from `(seed, e)`.
pub fn generate_dataset(
    env: &dyn Environment,
    mixture: &PolicyMixture,
    n_transitions: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_transitions == 0 {
        return Err(invalid("cannot generate an empty dataset"));
    }
    mixture.validate()?;
    let mut data = Dataset::new(env.d_s(), env.d_a(), env.action_kind())?;
    data.transitions.reserve(n_transitions);
    let mut episode = 0u64;
    while data.len() < n_transitions {
        let mut rng = seed::derived_rng(seed, &[role::EPISODE, episode]);
        let policy = mixture.pick(&mut rng);
        let mut state = env.reset(&mut rng);
        for _ in 0..env.horizon() {
            let action = policy.act(env, &state, &mut rng)?;
            let out = env.step(&state, &action, &mut rng)?;
            data.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward,
                next_state: out.next_state.clone(),
                terminal: out.terminal,
            })?;
            state = out.next_state;
            if out.terminal || data.len() == n_transitions {
                break;
            }
        }
        episode += 1;
    }
    data.metadata.insert("env".into(), env.name().to_string());
    data.metadata.insert("generator.seed".into(), seed.to_string());
    data.metadata.insert("generator.episodes".into(), episode.to_string());
    data.metadata
        .insert("generator.mixture".into(), serde_json::to_string(mixture)?);
    Ok(data)
}

/// Undiscounted return of one episode under `policy`.
pub fn rollout_return(
    env: &dyn Environment,
    policy: &mut dyn FnMut(&[f64]) -> Result<Action>,
    rng: &mut LabRng,
) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut total = 0.0;
    for _ in 0..env.horizon() {
        let action = policy(&state)?;
        let out = env.step(&state, &action, rng)?;
        total += out.reward;
        state = out.next_state;
        if out.terminal {
            break;
        }
    }
    Ok(total)
}
