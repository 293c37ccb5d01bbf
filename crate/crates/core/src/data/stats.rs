use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Lower bound applied to every normalization standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension observation statistics pooled over states and next states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ObsStats {
    pub fn identity(d_s: usize) -> Self {
        Self {
            mean: vec![0.0; d_s],
            std: vec![1.0; d_s],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "observation normalization".into(),
                expected: self.dim(),
                got: state.len(),
            });
        }
        Ok(state
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

/// Pooled mean and population standard deviation over all `2N` states and
/// next states, with each std entry floored at [`STD_FLOOR`].
pub fn compute_obs_stats(dataset: &Dataset) -> Result<ObsStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dataset.d_s;
    let count = 2.0 * dataset.len() as f64;
    let mut mean = vec![0.0; d];
    for t in &dataset.transitions {
        for j in 0..d {
            mean[j] += t.state[j] + t.next_state[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; d];
    for t in &dataset.transitions {
        for j in 0..d {
            let a = t.state[j] - mean[j];
            let b = t.next_state[j] - mean[j];
            var[j] += a * a + b * b;
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / count).sqrt().max(STD_FLOOR))
        .collect();
    Ok(ObsStats { mean, std })
}

/// Returns a copy with states and next states standardized by `stats`.
pub fn normalize(dataset: &Dataset, stats: &ObsStats) -> Result<Dataset> {
    if stats.dim() != dataset.d_s || stats.std.len() != dataset.d_s {
        return Err(Error::DimensionMismatch {
            context: "normalization stats".into(),
            expected: dataset.d_s,
            got: stats.dim(),
        });
    }
    let mut transitions = dataset.transitions.clone();
    for t in &mut transitions {
        t.state = stats.apply(&t.state)?;
        t.next_state = stats.apply(&t.next_state)?;
    }
    let mut out = dataset.with_transitions(transitions);
    out.metadata.insert(
        "obs_norm".into(),
        serde_json::to_string(stats).expect("stats serialize"),
    );
    Ok(out)
}

/// Population standard deviation of each column of `rows`; zero for no rows.
pub fn column_std<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Vec<f64> {
    let n = rows.clone().count();
    if n == 0 {
        return vec![0.0; dim];
    }
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for r in rows {
        for j in 0..dim {
            let d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    var.into_iter().map(|v| (v / n as f64).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Action, ActionKind, Transition};

    fn scalar_dataset(pairs: &[(f64, f64)]) -> Dataset {
        let mut d = Dataset::new(1, 1, ActionKind::Continuous).unwrap();
        for &(s, s2) in pairs {
            d.push(Transition {
                state: vec![s],
                action: Action::Continuous(vec![0.0]),
                reward: 0.0,
                next_state: vec![s2],
                terminal: false,
            })
            .unwrap();
        }
        d
    }

    #[test]
    fn pooled_stats_over_states_and_next_states() {
        let d = scalar_dataset(&[(0.0, 2.0), (2.0, 4.0)]);
        let s = compute_obs_stats(&d).unwrap();
        assert!((s.mean[0] - 2.0).abs() < 1e-12);
        assert!((s.std[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_dimension_hits_floor() {
        let d = scalar_dataset(&[(5.0, 5.0), (5.0, 5.0)]);
        let s = compute_obs_stats(&d).unwrap();
        assert_eq!(s.mean, vec![5.0]);
        assert_eq!(s.std, vec![STD_FLOOR]);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let d = Dataset::new(1, 1, ActionKind::Continuous).unwrap();
        assert!(matches!(compute_obs_stats(&d), Err(Error::EmptyDataset)));
    }

    #[test]
    fn normalize_single_value_and_identity() {
        let d = scalar_dataset(&[(4.0, 4.0)]);
        let stats = ObsStats {
            mean: vec![2.0],
            std: vec![2.0],
        };
        let n = normalize(&d, &stats).unwrap();
        assert_eq!(n.transitions[0].state, vec![1.0]);
        let id = normalize(&d, &ObsStats::identity(1)).unwrap();
        assert_eq!(id.transitions, d.transitions);
        assert!(n.metadata.contains_key("obs_norm"));
    }

    #[test]
    fn self_normalized_dataset_has_zero_mean() {
        let d = scalar_dataset(&[(0.0, 2.0), (2.0, 4.0)]);
        let n = normalize(&d, &compute_obs_stats(&d).unwrap()).unwrap();
        let s = compute_obs_stats(&n).unwrap();
        assert!(s.mean[0].abs() < 1e-9);
        assert!((s.std[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_rejects_dimension_mismatch() {
        let d = scalar_dataset(&[(0.0, 1.0)]);
        assert!(normalize(&d, &ObsStats::identity(2)).is_err());
    }
}
