use std::collections::HashMap;

use serde::Serialize;

use super::TabularMdp;
use crate::data::{ActionKind, Dataset};
use crate::error::{invalid, Error, Result};

/// Per-transition corruption quantities for a tabular dataset pair.
///
/// `zeta_bound[i] = |r̃ᵢ − rᵢ| + γ·r_max/(1−γ)·TV(P̂(·|sᵢ,aᵢ), P̃(·|sᵢ,aᵢ))`
/// where `P̂` and `P̃` are the empirical next-state conditionals of the clean
/// and corrupted datasets. This bounds the Bellman-operator gap for values in
/// `[0, r_max/(1−γ)]`; it is an upper bound, not the supremum itself.
///
/// `log_zeta_prime[i] = max_a |log π̃(a|sᵢ) − log π(a|sᵢ)|` with add-one
/// smoothed empirical action conditionals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionLevelReport {
    pub zeta_bound: Vec<f64>,
    pub log_zeta_prime: Vec<f64>,
    /// `Σ (2·zeta_bound[i] + log_zeta_prime[i])`
    pub cumulative: f64,
    pub label: &'static str,
}

struct Tabulated {
    states: Vec<usize>,
    actions: Vec<usize>,
    next: Vec<usize>,
    rewards: Vec<f64>,
}

fn tabulate(data: &Dataset, mdp: &TabularMdp, which: &str) -> Result<Tabulated> {
    if data.action_kind != ActionKind::Discrete || data.d_a != mdp.n_actions {
        return Err(Error::NonTabular(format!(
            "{which} dataset does not use the MDP's discrete actions"
        )));
    }
    let idx = |v: &[f64], row: usize| {
        mdp.state_index(v)
            .ok_or_else(|| Error::NonTabular(format!("{which} row {row}: state is not one-hot")))
    };
    let mut t = Tabulated {
        states: Vec::with_capacity(data.len()),
        actions: Vec::with_capacity(data.len()),
        next: Vec::with_capacity(data.len()),
        rewards: Vec::with_capacity(data.len()),
    };
    for (i, tr) in data.transitions.iter().enumerate() {
        t.states.push(idx(&tr.state, i)?);
        t.next.push(idx(&tr.next_state, i)?);
        t.actions.push(tr.action.as_discrete().expect("discrete dataset"));
        t.rewards.push(tr.reward);
    }
    Ok(t)
}

/// Add-one smoothed `π(a|s)` table.
fn action_conditionals(t: &Tabulated, n_states: usize, n_actions: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; n_actions]; n_states];
    for (&s, &a) in t.states.iter().zip(&t.actions) {
        counts[s][a] += 1.0;
    }
    counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + n_actions as f64;
            row.into_iter().map(|c| (c + 1.0) / total).collect()
        })
        .collect()
}

fn next_state_conditionals(t: &Tabulated) -> HashMap<(usize, usize), HashMap<usize, f64>> {
    let mut counts: HashMap<(usize, usize), HashMap<usize, f64>> = HashMap::new();
    for i in 0..t.states.len() {
        *counts
            .entry((t.states[i], t.actions[i]))
            .or_default()
            .entry(t.next[i])
            .or_default() += 1.0;
    }
    for row in counts.values_mut() {
        let total: f64 = row.values().sum();
        row.values_mut().for_each(|c| *c /= total);
    }
    counts
}

fn total_variation(p: Option<&HashMap<usize, f64>>, q: Option<&HashMap<usize, f64>>) -> f64 {
    match (p, q) {
        (Some(p), Some(q)) => {
            let mut keys: Vec<usize> = p.keys().chain(q.keys()).copied().collect();
            keys.sort_unstable();
            keys.dedup();
            0.5 * keys
                .iter()
                .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
                .sum::<f64>()
        }
        (None, None) => 0.0,
        _ => 1.0,
    }
}

/// Compares a corrupted dataset against its clean counterpart, row by row.
pub fn corruption_level_report(
    clean: &Dataset,
    corrupted: &Dataset,
    mdp: &TabularMdp,
) -> Result<CorruptionLevelReport> {
    mdp.validate()?;
    if clean.len() != corrupted.len() {
        return Err(invalid("clean and corrupted datasets must align row by row"));
    }
    let c = tabulate(clean, mdp, "clean")?;
    let k = tabulate(corrupted, mdp, "corrupted")?;
    let pi_clean = action_conditionals(&c, mdp.n_states, mdp.n_actions);
    let pi_corrupt = action_conditionals(&k, mdp.n_states, mdp.n_actions);
    let p_clean = next_state_conditionals(&c);
    let p_corrupt = next_state_conditionals(&k);
    let v_max = mdp.r_max / (1.0 - mdp.gamma);

    let mut zeta_bound = Vec::with_capacity(clean.len());
    let mut log_zeta_prime = Vec::with_capacity(clean.len());
    for i in 0..clean.len() {
        let key = (k.states[i], k.actions[i]);
        let tv = total_variation(p_clean.get(&key), p_corrupt.get(&key));
        zeta_bound.push((k.rewards[i] - c.rewards[i]).abs() + mdp.gamma * v_max * tv);
        let s = k.states[i];
        let lz = pi_corrupt[s]
            .iter()
            .zip(&pi_clean[s])
            .map(|(d, m)| (d.ln() - m.ln()).abs())
            .fold(0.0, f64::max);
        log_zeta_prime.push(lz);
    }
    let cumulative = zeta_bound
        .iter()
        .zip(&log_zeta_prime)
        .map(|(z, l)| 2.0 * z + l)
        .sum();
    Ok(CorruptionLevelReport {
        zeta_bound,
        log_zeta_prime,
        cumulative,
        label: "upper bound",
    })
}
