use serde::{Deserialize, Serialize};

use super::normal::inverse_normal_cdf;
use crate::error::{invalid, Result};

/// Ensemble size and quantile level of the quantile Q estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    k_ensemble: usize,
    alpha: f64,
}

impl QuantileSpec {
    pub fn new(k_ensemble: usize, alpha: f64) -> Result<Self> {
        if k_ensemble < 2 {
            return Err(invalid(format!("quantile estimator needs K >= 2, got {k_ensemble}")));
        }
        check_alpha(alpha)?;
        Ok(Self { k_ensemble, alpha })
    }

    pub fn k_ensemble(&self) -> usize {
        self.k_ensemble
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("quantile alpha must lie in [0,1], got {alpha}")));
    }
    Ok(())
}

/// Linear-interpolation quantile of an ascending slice at zero-based
/// position `α·(K−1)`.
#[inline]
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let p = alpha * (sorted.len() - 1) as f64;
    let lo = p.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * (p - lo as f64)
}

/// α-quantile of ensemble member values; α=0 is the minimum, α=1 the maximum.
pub fn ensemble_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("quantile of an empty ensemble"));
    }
    check_alpha(alpha)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, alpha))
}

/// Coefficient `c` in `E[Q_α] ≈ m − c·σ` for Gaussian ensemble members,
/// from Blom's order-statistic approximation with constant 0.375:
/// `c = Φ⁻¹(((1−α)(K−1) + 1 − 0.375) / (K − 2·0.375 + 1))`.
pub fn lcb_coefficient(k_ensemble: usize, alpha: f64) -> Result<f64> {
    if k_ensemble < 2 {
        return Err(invalid("lcb coefficient needs K >= 2"));
    }
    check_alpha(alpha)?;
    const BLOM: f64 = 0.375;
    let k = k_ensemble as f64;
    let rank = (1.0 - alpha) * (k - 1.0) + 1.0;
    let arg = (rank - BLOM) / (k - 2.0 * BLOM + 1.0);
    if !(arg > 0.0 && arg < 1.0) {
        return Err(invalid(format!("lcb argument {arg} outside (0,1)")));
    }
    inverse_normal_cdf(arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        assert_eq!(ensemble_quantile(&[3.0, 9.0], 0.0).unwrap(), 3.0);
        assert_eq!(ensemble_quantile(&[3.0, 9.0], 0.5).unwrap(), 6.0);
        assert_eq!(ensemble_quantile(&[9.0, 3.0], 1.0).unwrap(), 9.0);
        let q = ensemble_quantile(&[9.0, 1.0, 5.0, 3.0, 7.0], 0.1).unwrap();
        assert!((q - 1.8).abs() < 1e-12);
    }

    #[test]
    fn two_member_closed_form() {
        for alpha in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let (a, b) = (-1.5, 4.0);
            let q = ensemble_quantile(&[b, a], alpha).unwrap();
            assert!((q - ((1.0 - alpha) * a + alpha * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(ensemble_quantile(&[], 0.5).is_err());
        assert!(ensemble_quantile(&[1.0], 1.5).is_err());
        assert!(QuantileSpec::new(1, 0.5).is_err());
        assert!(lcb_coefficient(1, 0.0).is_err());
        assert!(lcb_coefficient(3, -0.1).is_err());
    }

    #[test]
    fn single_member_is_itself() {
        assert_eq!(ensemble_quantile(&[2.5], 0.3).unwrap(), 2.5);
    }
}
