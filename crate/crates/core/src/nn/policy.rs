use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, Mlp, MlpGrad};
use crate::error::{invalid, Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Deterministic,
    DiagonalGaussian,
}

/// Policy network. The Gaussian variant carries a state-independent log-std
/// vector, kept inside `[LOG_STD_MIN, LOG_STD_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    kind: PolicyKind,
    backbone: Mlp,
    log_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub backbone: MlpGrad,
    pub log_std: Vec<f64>,
}

impl PolicyHead {
    pub fn new(kind: PolicyKind, widths: &[usize], seed: u64) -> Result<Self> {
        let backbone = Mlp::init(widths, seed)?;
        let log_std = match kind {
            PolicyKind::Deterministic => Vec::new(),
            PolicyKind::DiagonalGaussian => vec![0.0; backbone.output_dim()],
        };
        Ok(Self {
            kind,
            backbone,
            log_std,
        })
    }

    pub fn from_parts(kind: PolicyKind, backbone: Mlp, log_std: Vec<f64>) -> Result<Self> {
        let expected = match kind {
            PolicyKind::Deterministic => 0,
            PolicyKind::DiagonalGaussian => backbone.output_dim(),
        };
        if log_std.len() != expected {
            return Err(invalid("log-std length does not match the policy kind"));
        }
        let log_std = log_std
            .into_iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        Ok(Self {
            kind,
            backbone,
            log_std,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn backbone(&self) -> &Mlp {
        &self.backbone
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn action_dim(&self) -> usize {
        self.backbone.output_dim()
    }

    /// Deterministic output, or the Gaussian mean.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.backbone.forward(state)
    }

    pub fn mean_batch(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.backbone.forward_batch(states)
    }

    pub fn sample<R: Rng>(&self, state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.mean_action(state)?;
        if self.kind == PolicyKind::DiagonalGaussian {
            for (x, ls) in a.iter_mut().zip(&self.log_std) {
                *x += ls.exp() * standard_normal(rng);
            }
        }
        Ok(a)
    }

    /// Weighted imitation loss `(1/B)·Σ wᵢ·ℓᵢ` and its gradient, where `ℓ`
    /// is `‖a − π(s)‖²` (deterministic) or `−log π(a|s)` (Gaussian).
    pub fn loss_and_grad(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        weights: &[f64],
    ) -> Result<(f64, PolicyGrad)> {
        let batch = states.nrows();
        if actions.nrows() != batch || weights.len() != batch {
            return Err(invalid("policy loss: batch sizes differ"));
        }
        if actions.ncols() != self.action_dim() {
            return Err(Error::DimensionMismatch {
                context: "policy action".into(),
                expected: self.action_dim(),
                got: actions.ncols(),
            });
        }
        let (mu, cache) = self.backbone.forward_train(states)?;
        let scale = 1.0 / batch as f64;
        let mut upstream = Array2::zeros(mu.raw_dim());
        let mut log_std_grad = vec![0.0; self.log_std.len()];
        let mut loss = 0.0;
        for b in 0..batch {
            let w = weights[b];
            for j in 0..self.action_dim() {
                let diff = actions[[b, j]] - mu[[b, j]];
                match self.kind {
                    PolicyKind::Deterministic => {
                        loss += w * diff * diff;
                        upstream[[b, j]] = -2.0 * w * diff * scale;
                    }
                    PolicyKind::DiagonalGaussian => {
                        let ls = self.log_std[j];
                        let inv_var = (-2.0 * ls).exp();
                        loss += w * (0.5 * diff * diff * inv_var + ls + HALF_LN_2PI);
                        upstream[[b, j]] = -w * diff * inv_var * scale;
                        log_std_grad[j] += w * (1.0 - diff * diff * inv_var) * scale;
                    }
                }
            }
        }
        let (backbone, _) = self.backbone.backward(&cache, upstream.view())?;
        Ok((
            loss * scale,
            PolicyGrad {
                backbone,
                log_std: log_std_grad,
            },
        ))
    }

    /// Adam update of backbone and log-std, then re-clamps the log-std.
    pub fn apply(&mut self, adam: &mut Adam, grad: &PolicyGrad) -> Result<()> {
        let mut params = self.backbone.blocks_mut();
        let mut grads = grad.backbone.blocks();
        if !self.log_std.is_empty() {
            params.push(&mut self.log_std);
            grads.push(&grad.log_std);
        }
        adam.step(params, grads)?;
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(())
    }
}

/// Box–Muller draw.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
