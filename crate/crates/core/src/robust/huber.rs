use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    delta: f64,
}

impl HuberParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("huber delta must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `x²/(2δ)` for `|x| ≤ δ`, `|x| − δ/2` beyond.
#[inline]
pub fn huber_loss(x: f64, delta: f64) -> f64 {
    let ax = x.abs();
    if ax <= delta {
        x * x / (2.0 * delta)
    } else {
        ax - 0.5 * delta
    }
}

#[inline]
pub fn huber_grad(x: f64, delta: f64) -> f64 {
    if x.abs() <= delta {
        x / delta
    } else {
        x.signum()
    }
}

/// Huber M-estimate of location: minimizes `mean(l_H(x_i − m))`.
///
/// Gradient descent with step `δ/2` started at the median, stopped once the
/// gradient magnitude drops below `1e-10`.
pub fn huber_location(samples: &[f64], delta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("huber location of an empty sample"));
    }
    HuberParams::new(delta)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let step = 0.5 * delta;
    for _ in 0..1_000_000 {
        // d/dm mean l_H(x - m) = -mean psi(x - m)
        let psi = samples.iter().map(|&x| huber_grad(x - m, delta)).sum::<f64>() / n as f64;
        if psi.abs() < 1e-10 {
            break;
        }
        m += step * psi;
    }
    Ok(m)
}
