use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectileParams {
    tau: f64,
}

impl ExpectileParams {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid(format!("expectile tau must lie in (0,1), got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

#[inline]
fn weight(x: f64, tau: f64) -> f64 {
    if x < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

/// Asymmetric squared loss `|τ − 1(x<0)|·x²`.
#[inline]
pub fn expectile_loss(x: f64, tau: f64) -> f64 {
    weight(x, tau) * x * x
}

#[inline]
pub fn expectile_grad(x: f64, tau: f64) -> f64 {
    2.0 * weight(x, tau) * x
}

/// τ-expectile of a discrete distribution (`values` with probability
/// `weights`), found by bisection on `Σ wᵢ·|τ − 1(xᵢ<v)|·(xᵢ − v) = 0`.
pub fn weighted_expectile(values: &[f64], weights: &[f64], tau: f64) -> Result<f64> {
    ExpectileParams::new(tau)?;
    if values.is_empty() || values.len() != weights.len() {
        return Err(invalid("weighted expectile needs matching non-empty inputs"));
    }
    let support: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| (x, w))
        .collect();
    if support.is_empty() {
        return Err(invalid("weighted expectile with zero total weight"));
    }
    let foc = |v: f64| -> f64 {
        support
            .iter()
            .map(|&(x, w)| w * weight(x - v, tau) * (x - v))
            .sum()
    };
    let mut lo = support.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut hi = support.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(lo);
    }
    // foc is strictly decreasing in v: positive at min, negative at max.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if foc(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymmetric_weights() {
        assert!((expectile_loss(1.0, 0.7) - 0.7).abs() < 1e-15);
        assert!((expectile_loss(-1.0, 0.7) - 0.3).abs() < 1e-15);
        for i in -20..=20 {
            let x = i as f64 * 0.3;
            assert!((expectile_loss(x, 0.5) - 0.5 * x * x).abs() < 1e-15);
            assert!((expectile_grad(x, 0.5) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn tau_bounds() {
        assert!(ExpectileParams::new(0.0).is_err());
        assert!(ExpectileParams::new(1.0).is_err());
        assert!(ExpectileParams::new(0.7).is_ok());
    }

    #[test]
    fn half_expectile_is_the_mean() {
        let v = weighted_expectile(&[1.0, 2.0, 6.0], &[0.5, 0.25, 0.25], 0.5).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn point_mass_expectile_is_the_point() {
        for tau in [0.1, 0.5, 0.99] {
            let v = weighted_expectile(&[3.0, 7.0], &[0.0, 1.0], tau).unwrap();
            assert_eq!(v, 7.0);
        }
    }

    #[test]
    fn expectile_increases_with_tau() {
        let xs = [0.0, 1.0, 5.0];
        let ws = [0.2, 0.5, 0.3];
        let mut prev = f64::NEG_INFINITY;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let v = weighted_expectile(&xs, &ws, tau).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev < 5.0);
    }
}
