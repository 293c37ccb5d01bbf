use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::data::{Action, ActionKind};
use crate::error::{Error, Result};
use crate::seed::LabRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassConfig {
    pub goal: [f64; 2],
    /// Positions live in `[-arena, arena]²`.
    pub arena: f64,
    pub dt: f64,
    pub horizon: usize,
    pub goal_radius: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            goal: [0.5, 0.5],
            arena: 1.0,
            dt: 0.1,
            horizon: 50,
            goal_radius: 0.05,
        }
    }
}

/// Kinematic point in the plane. State `(x, y, vx, vy)`; the action is the
/// commanded velocity, clipped to `[-1, 1]²`, and becomes the new velocity.
/// Reward is minus the distance to the goal after the move; reaching within
/// `goal_radius` ends the episode.
#[derive(Debug, Clone)]
pub struct PointMassEnv {
    cfg: PointMassConfig,
}

impl PointMassEnv {
    pub fn new(cfg: PointMassConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.cfg
    }

    fn distance(&self, p: &[f64]) -> f64 {
        ((p[0] - self.cfg.goal[0]).powi(2) + (p[1] - self.cfg.goal[1]).powi(2)).sqrt()
    }

    /// Diameter of the arena, the largest distance any step can pay.
    pub fn diameter(&self) -> f64 {
        2.0 * self.cfg.arena * std::f64::consts::SQRT_2
    }

    /// Return of the straight-line expert from `start`, computed from the
    /// geometry: the expert covers a fixed length `L` per step along the
    /// segment to the goal, so after `k` steps the distance is `max(d₀ − kL, 0)`.
    pub fn expert_return_from(&self, start: [f64; 2]) -> f64 {
        let dx = self.cfg.goal[0] - start[0];
        let dy = self.cfg.goal[1] - start[1];
        let d0 = (dx * dx + dy * dy).sqrt();
        if d0 == 0.0 {
            return 0.0;
        }
        let step_len = self.cfg.dt * d0 / dx.abs().max(dy.abs());
        let mut total = 0.0;
        for k in 1..=self.cfg.horizon {
            let d = (d0 - k as f64 * step_len).max(0.0);
            total -= d;
            if d < self.cfg.goal_radius {
                break;
            }
        }
        total
    }
}

impl Environment for PointMassEnv {
    fn name(&self) -> &str {
        "pointmass"
    }

    fn d_s(&self) -> usize {
        4
    }

    fn d_a(&self) -> usize {
        2
    }

    fn action_kind(&self) -> ActionKind {
        ActionKind::Continuous
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn reset(&self, rng: &mut LabRng) -> Vec<f64> {
        let a = self.cfg.arena;
        vec![rng.random_range(-a..=a), rng.random_range(-a..=a), 0.0, 0.0]
    }

    fn step(&self, state: &[f64], action: &Action, _rng: &mut LabRng) -> Result<StepOutcome> {
        if state.len() != 4 {
            return Err(Error::DimensionMismatch {
                context: "pointmass state".into(),
                expected: 4,
                got: state.len(),
            });
        }
        let a = action
            .as_continuous()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| crate::error::invalid("pointmass needs a 2-D continuous action"))?;
        let v = [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)];
        let lim = self.cfg.arena;
        let p = [
            (state[0] + self.cfg.dt * v[0]).clamp(-lim, lim),
            (state[1] + self.cfg.dt * v[1]).clamp(-lim, lim),
        ];
        let d = self.distance(&p);
        Ok(StepOutcome {
            next_state: vec![p[0], p[1], v[0], v[1]],
            reward: -d,
            terminal: d < self.cfg.goal_radius,
        })
    }

    fn random_action(&self, rng: &mut LabRng) -> Action {
        Action::Continuous(vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
    }

    /// Heads straight for the goal at full speed along the dominant axis,
    /// landing exactly on it when within one step.
    fn expert_action(&self, state: &[f64]) -> Result<Action> {
        if state.len() != 4 {
            return Err(Error::DimensionMismatch {
                context: "pointmass state".into(),
                expected: 4,
                got: state.len(),
            });
        }
        let raw = [
            (self.cfg.goal[0] - state[0]) / self.cfg.dt,
            (self.cfg.goal[1] - state[1]) / self.cfg.dt,
        ];
        let m = raw[0].abs().max(raw[1].abs());
        let scale = if m > 1.0 { 1.0 / m } else { 1.0 };
        Ok(Action::Continuous(vec![raw[0] * scale, raw[1] * scale]))
    }
}
