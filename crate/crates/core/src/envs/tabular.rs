//! Finite MDPs with exact dynamic-programming oracles.

use crate::error::{invalid, Result};
use crate::robust::weighted_expectile;

/// A finite discounted MDP. States flagged in `terminal` are absorbing and
/// end an episode when entered.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[s][a][s']`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a]`
    pub rewards: Vec<Vec<f64>>,
    pub r_max: f64,
    pub gamma: f64,
    pub initial: Vec<f64>,
    pub terminal: Vec<bool>,
}

/// Optimal or policy values: `v[s]` and `q[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !(*x >= 0.0)) {
        return Err(invalid(format!("{what} has a negative or NaN entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(invalid("tabular MDP needs states and actions"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid(format!("discount must lie in [0,1), got {}", self.gamma)));
        }
        if self.transitions.len() != ns
            || self.rewards.len() != ns
            || self.initial.len() != ns
            || self.terminal.len() != ns
        {
            return Err(invalid("tabular MDP tables disagree on the state count"));
        }
        for s in 0..ns {
            if self.transitions[s].len() != na || self.rewards[s].len() != na {
                return Err(invalid(format!("state {s}: tables disagree on the action count")));
            }
            for a in 0..na {
                if self.transitions[s][a].len() != ns {
                    return Err(invalid(format!("P[{s}][{a}] has the wrong length")));
                }
                check_distribution(&self.transitions[s][a], &format!("P[{s}][{a}]"))?;
                if self.rewards[s][a].abs() > self.r_max {
                    return Err(invalid(format!("|R[{s}][{a}]| exceeds r_max")));
                }
            }
        }
        check_distribution(&self.initial, "initial distribution")
    }

    /// `R[s][a] + γ·Σ P[s][a][s']·v[s']`
    pub fn backup(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let ev: f64 = self.transitions[s][a]
                            .iter()
                            .zip(v)
                            .map(|(p, v)| p * v)
                            .sum();
                        self.rewards[s][a] + self.gamma * ev
                    })
                    .collect()
            })
            .collect()
    }

    /// Iterates the Bellman optimality operator until the sup-norm change
    /// between sweeps is at most `tol·(1−γ)/γ`, which bounds the residual by
    /// `tol`.
    pub fn value_iteration(&self, tol: f64) -> Result<Values> {
        self.validate()?;
        let mut v = vec![0.0; self.n_states];
        let stop = if self.gamma == 0.0 {
            f64::INFINITY
        } else {
            tol * (1.0 - self.gamma) / self.gamma
        };
        loop {
            let q = self.backup(&v);
            let next: Vec<f64> = q
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let change = sup_diff(&next, &v);
            v = next;
            if change <= stop {
                let q = self.backup(&v);
                return Ok(Values { v, q });
            }
        }
    }

    /// Exact value of a stochastic policy `policy[s][a]` by iterative evaluation.
    pub fn policy_evaluation(&self, policy: &[Vec<f64>], tol: f64) -> Result<Values> {
        self.check_policy(policy)?;
        let mut v = vec![0.0; self.n_states];
        let stop = if self.gamma == 0.0 {
            f64::INFINITY
        } else {
            tol * (1.0 - self.gamma) / self.gamma
        };
        loop {
            let q = self.backup(&v);
            let next: Vec<f64> = q
                .iter()
                .zip(policy)
                .map(|(qs, ps)| qs.iter().zip(ps).map(|(q, p)| q * p).sum())
                .collect();
            let change = sup_diff(&next, &v);
            v = next;
            if change <= stop {
                let q = self.backup(&v);
                return Ok(Values { v, q });
            }
        }
    }

    /// Fixed point of `V(s) = τ-expectile_{a∼π_D(·|s)} Q(s,a)`,
    /// `Q = R + γ·P·V`, iterated to a sup-norm change of at most `tol`.
    /// Each per-state expectile is solved by bisection.
    pub fn expectile_fixed_point(
        &self,
        behavior: &[Vec<f64>],
        tau: f64,
        tol: f64,
    ) -> Result<Values> {
        self.check_policy(behavior)?;
        let mut v = vec![0.0; self.n_states];
        for _ in 0..1_000_000 {
            let q = self.backup(&v);
            let next = q
                .iter()
                .zip(behavior)
                .map(|(qs, ps)| weighted_expectile(qs, ps, tau))
                .collect::<Result<Vec<f64>>>()?;
            let change = sup_diff(&next, &v);
            v = next;
            if change <= tol {
                break;
            }
        }
        let q = self.backup(&v);
        Ok(Values { v, q })
    }

    fn check_policy(&self, policy: &[Vec<f64>]) -> Result<()> {
        self.validate()?;
        if policy.len() != self.n_states {
            return Err(invalid("policy must list every state"));
        }
        for (s, p) in policy.iter().enumerate() {
            if p.len() != self.n_actions {
                return Err(invalid(format!("policy row {s} has the wrong length")));
            }
            check_distribution(p, &format!("policy at state {s}"))?;
        }
        Ok(())
    }

    /// `Σ_s ρ₀(s)·v[s]`
    pub fn initial_value(&self, v: &[f64]) -> f64 {
        self.initial.iter().zip(v).map(|(p, v)| p * v).sum()
    }

    pub fn greedy_policy(q: &[Vec<f64>]) -> Vec<Vec<f64>> {
        q.iter()
            .map(|row| {
                let best = argmax(row);
                (0..row.len()).map(|a| if a == best { 1.0 } else { 0.0 }).collect()
            })
            .collect()
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[s] = 1.0;
        v
    }

    /// Recovers a state index from its exact one-hot encoding.
    pub fn state_index(&self, encoded: &[f64]) -> Option<usize> {
        if encoded.len() != self.n_states {
            return None;
        }
        let mut hot = None;
        for (i, &x) in encoded.iter().enumerate() {
            if x == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(i);
            } else if x != 0.0 {
                return None;
            }
        }
        hot
    }
}

/// First index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
