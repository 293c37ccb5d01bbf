use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Environment, StepOutcome, TabularMdp};
use crate::data::{Action, ActionKind};
use crate::error::{invalid, Error, Result};
use crate::seed::LabRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridworldConfig {
    pub rows: usize,
    pub cols: usize,
    /// Probability that the chosen move is replaced by a uniformly random one.
    pub slip: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            slip: 0.1,
            goal_reward: 1.0,
            step_reward: 0.0,
            gamma: 0.99,
            horizon: 100,
        }
    }
}

/// Episodic wrapper around a [`TabularMdp`] with one-hot state vectors and
/// discrete actions. Rewards are the expected `R[s][a]`.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    name: String,
    mdp: TabularMdp,
    horizon: usize,
    expert: Vec<usize>,
}

impl TabularEnv {
    pub fn new(name: impl Into<String>, mdp: TabularMdp, horizon: usize) -> Result<Self> {
        let optimal = mdp.value_iteration(1e-10)?;
        let expert = optimal.q.iter().map(|row| argmax(row)).collect();
        Ok(Self {
            name: name.into(),
            mdp,
            horizon,
            expert,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn index(&self, state: &[f64]) -> Result<usize> {
        self.mdp
            .state_index(state)
            .ok_or_else(|| Error::NonTabular("state is not a one-hot vector".into()))
    }
}

fn sample_categorical(p: &[f64], rng: &mut LabRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|x| *x > 0.0).unwrap_or(p.len() - 1)
}

impl Environment for TabularEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn d_s(&self) -> usize {
        self.mdp.n_states
    }

    fn d_a(&self) -> usize {
        self.mdp.n_actions
    }

    fn action_kind(&self) -> ActionKind {
        ActionKind::Discrete
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut LabRng) -> Vec<f64> {
        self.mdp.one_hot(sample_categorical(&self.mdp.initial, rng))
    }

    fn step(&self, state: &[f64], action: &Action, rng: &mut LabRng) -> Result<StepOutcome> {
        let s = self.index(state)?;
        let a = action
            .as_discrete()
            .filter(|a| *a < self.mdp.n_actions)
            .ok_or_else(|| invalid("tabular step needs a valid discrete action"))?;
        let next = sample_categorical(&self.mdp.transitions[s][a], rng);
        Ok(StepOutcome {
            next_state: self.mdp.one_hot(next),
            reward: self.mdp.rewards[s][a],
            terminal: self.mdp.terminal[next],
        })
    }

    fn random_action(&self, rng: &mut LabRng) -> Action {
        Action::Discrete(rng.random_range(0..self.mdp.n_actions))
    }

    fn expert_action(&self, state: &[f64]) -> Result<Action> {
        Ok(Action::Discrete(self.expert[self.index(state)?]))
    }

    fn tabular(&self) -> Option<&TabularMdp> {
        Some(&self.mdp)
    }
}

/// Up, right, down, left.
const MOVES: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Grid with the goal in the bottom-right corner. Entering the goal pays
/// `goal_reward` and ends the episode; bumping a wall stays in place.
/// Episodes start uniformly on non-goal cells.
pub fn gridworld(cfg: &GridworldConfig) -> Result<TabularEnv> {
    if cfg.rows == 0 || cfg.cols == 0 || cfg.rows * cfg.cols < 2 {
        return Err(invalid("gridworld needs at least two cells"));
    }
    if !(0.0..=1.0).contains(&cfg.slip) {
        return Err(invalid("slip probability must lie in [0,1]"));
    }
    let n = cfg.rows * cfg.cols;
    let goal = n - 1;
    let cell = |r: i64, c: i64| -> usize {
        let r = r.clamp(0, cfg.rows as i64 - 1) as usize;
        let c = c.clamp(0, cfg.cols as i64 - 1) as usize;
        r * cfg.cols + c
    };
    let mut transitions = vec![vec![vec![0.0; n]; 4]; n];
    let mut rewards = vec![vec![0.0; 4]; n];
    for s in 0..n {
        for a in 0..4 {
            if s == goal {
                transitions[s][a][goal] = 1.0;
                continue;
            }
            let (r, c) = ((s / cfg.cols) as i64, (s % cfg.cols) as i64);
            for (m, (dr, dc)) in MOVES.iter().enumerate() {
                let p = if m == a {
                    1.0 - cfg.slip + cfg.slip / 4.0
                } else {
                    cfg.slip / 4.0
                };
                transitions[s][a][cell(r + dr, c + dc)] += p;
            }
            let p_goal = transitions[s][a][goal];
            rewards[s][a] = cfg.step_reward + p_goal * cfg.goal_reward;
        }
    }
    let mut initial = vec![1.0 / (n - 1) as f64; n];
    initial[goal] = 0.0;
    // Renormalize so the table sums to one within rounding.
    let total: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|p| *p /= total);
    let mut terminal = vec![false; n];
    terminal[goal] = true;
    let r_max = rewards
        .iter()
        .flatten()
        .fold(0.0f64, |m, r| m.max(r.abs()))
        .max(cfg.goal_reward.abs());
    let mdp = TabularMdp {
        n_states: n,
        n_actions: 4,
        transitions,
        rewards,
        r_max,
        gamma: cfg.gamma,
        initial,
        terminal,
    };
    mdp.validate()?;
    TabularEnv::new("gridworld", mdp, cfg.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn default_grid_shape() {
        let env = gridworld(&GridworldConfig::default()).unwrap();
        assert_eq!(env.d_s(), 64);
        assert_eq!(env.d_a(), 4);
        let mdp = env.mdp();
        // Interior cell, moving right: 0.925 intended.
        assert!((mdp.transitions[9][1][10] - 0.925).abs() < 1e-12);
        assert!((mdp.rewards[62][1] - 0.925).abs() < 1e-12);
    }

    #[test]
    fn expert_reaches_goal() {
        let env = gridworld(&GridworldConfig::default()).unwrap();
        let mut rng = seed::rng(3);
        let mut s = env.mdp().one_hot(0);
        let mut done = false;
        for _ in 0..100 {
            let a = env.expert_action(&s).unwrap();
            let out = env.step(&s, &a, &mut rng).unwrap();
            s = out.next_state;
            if out.terminal {
                done = true;
                break;
            }
        }
        assert!(done);
    }

    #[test]
    fn non_one_hot_state_is_rejected() {
        let env = gridworld(&GridworldConfig::default()).unwrap();
        let mut rng = seed::rng(0);
        let s = vec![0.5; 64];
        assert!(matches!(
            env.step(&s, &Action::Discrete(0), &mut rng),
            Err(Error::NonTabular(_))
        ));
    }
}
