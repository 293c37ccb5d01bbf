use crate::error::{invalid, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Plain (non-excess) kurtosis `m₄ / m₂²` with population central moments.
pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(invalid(format!(
            "kurtosis needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let m = mean(samples);
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(s2, s4), &x| {
        let d = (x - m) * (x - m);
        (s2 + d, s4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 <= 0.0 || !m2.is_finite() {
        return Err(invalid("kurtosis of a zero-variance sample"));
    }
    Ok(m4 / (m2 * m2))
}
