use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Aggregator, AgentConfig, QLoss, TrainedAgent};
use crate::data::{compute_obs_stats, Dataset, ObsStats};
use crate::error::{Error, Result};
use crate::nn::{soft_update, Adam, AdamConfig, Mlp, MlpGrad, PolicyHead};
use crate::robust::{expectile_grad, expectile_loss, huber_grad, huber_loss, quantile_sorted};
use crate::seed::{self, role, LabRng};

/// Losses of one training step. Critic losses are zero for BC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    /// Mean over ensemble members.
    pub q: f64,
    pub v: f64,
    pub policy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub policy: Vec<f64>,
}

impl LossTrace {
    pub fn push(&mut self, s: StepLosses) {
        self.q.push(s.q);
        self.v.push(s.v);
        self.policy.push(s.policy);
    }

    pub fn len(&self) -> usize {
        self.policy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policy.is_empty()
    }
}

/// `min(exp(β·A), clip)`, kept strictly positive.
pub fn advantage_weights(adv: &[f64], beta: f64, clip: f64) -> Vec<f64> {
    adv.iter()
        .map(|a| (beta * a).exp().min(clip).max(f64::MIN_POSITIVE))
        .collect()
}

/// Mean regression loss of `q(inputs)` against `targets` and its parameter
/// gradient.
pub fn q_loss_and_grad(
    q: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
    loss: QLoss,
) -> Result<(f64, MlpGrad)> {
    let (pred, cache) = q.forward_train(inputs)?;
    let batch = targets.len() as f64;
    let mut upstream = Array2::zeros(pred.raw_dim());
    let mut total = 0.0;
    for (b, y) in targets.iter().enumerate() {
        let x = pred[[b, 0]] - y;
        let (l, g) = match loss {
            QLoss::Squared => (x * x, 2.0 * x),
            QLoss::Huber(delta) => (huber_loss(x, delta), huber_grad(x, delta)),
        };
        total += l;
        upstream[[b, 0]] = g / batch;
    }
    let (grad, _) = q.backward(&cache, upstream.view())?;
    Ok((total / batch, grad))
}

fn aggregate(values: &mut [f64], how: Aggregator) -> f64 {
    match how {
        Aggregator::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
        Aggregator::Quantile(alpha) => {
            values.sort_by(|a, b| a.total_cmp(b));
            quantile_sorted(values, alpha)
        }
    }
}

fn normalized_rows(rows: impl Iterator<Item = Vec<f64>>, n: usize, d: usize, stats: &ObsStats) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((n, d));
    for (mut dst, src) in m.rows_mut().into_iter().zip(rows) {
        for (x, y) in dst.iter_mut().zip(stats.apply(&src)?) {
            *x = y;
        }
    }
    Ok(m)
}

struct Batch {
    s: Array2<f64>,
    s2: Array2<f64>,
    a: Array2<f64>,
    sa: Array2<f64>,
    r: Vec<f64>,
    not_done: Vec<f64>,
}

/// Step-by-step training of one agent.
///
/// A step samples a uniform minibatch (with replacement) and then:
/// evaluates `V(s')` for the bootstrap target; moves `V` toward the
/// aggregated target ensemble with the expectile loss; takes one step on
/// every Q member against `r + γ(1−done)V(s')`; takes one advantage-weighted
/// policy step using the pre-update advantage; soft-updates the targets.
pub struct Trainer {
    config: AgentConfig,
    obs_stats: ObsStats,
    data_shape: (usize, usize, crate::data::ActionKind),
    states: Array2<f64>,
    next_states: Array2<f64>,
    actions: Array2<f64>,
    rewards: Vec<f64>,
    not_done: Vec<f64>,
    policy: PolicyHead,
    policy_opt: Adam,
    value: Option<(Mlp, Adam)>,
    q: Vec<(Mlp, Adam)>,
    q_target: Vec<Mlp>,
    batch_rng: LabRng,
    steps: usize,
}

impl Trainer {
    pub fn new(data: &Dataset, config: &AgentConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        data.validate()?;
        let (n, d_s, d_a) = (data.len(), data.d_s, data.d_a);
        let obs_stats = if config.normalize_obs {
            compute_obs_stats(data)?
        } else {
            ObsStats::identity(d_s)
        };
        let states = normalized_rows(data.transitions.iter().map(|t| t.state.clone()), n, d_s, &obs_stats)?;
        let next_states =
            normalized_rows(data.transitions.iter().map(|t| t.next_state.clone()), n, d_s, &obs_stats)?;
        let mut actions = Array2::zeros((n, d_a));
        for (i, mut row) in actions.rows_mut().into_iter().enumerate() {
            for (x, y) in row.iter_mut().zip(data.action_vector(i)) {
                *x = y;
            }
        }
        let widths = |d_in: usize, d_out: usize| {
            let mut w = vec![d_in];
            w.extend(&config.hidden);
            w.push(d_out);
            w
        };
        let adam = || Adam::new(AdamConfig::with_lr(config.learning_rate));
        let s = config.seed;
        let policy = PolicyHead::new(
            config.policy_kind,
            &widths(d_s, d_a),
            seed::derive_seed(s, &[role::INIT_POLICY]),
        )?;
        let (value, q) = if config.has_critics() {
            let v = Mlp::init(&widths(d_s, 1), seed::derive_seed(s, &[role::INIT_VALUE]))?;
            let q = (0..config.ensemble_size())
                .map(|i| {
                    Ok((
                        Mlp::init(&widths(d_s + d_a, 1), seed::derive_seed(s, &[role::INIT_Q, i as u64]))?,
                        adam(),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            (Some((v, adam())), q)
        } else {
            (None, Vec::new())
        };
        let q_target = q.iter().map(|(m, _)| m.clone()).collect();
        Ok(Self {
            config: config.clone(),
            obs_stats,
            data_shape: (d_s, d_a, data.action_kind),
            states,
            next_states,
            actions,
            rewards: data.transitions.iter().map(|t| t.reward).collect(),
            not_done: data
                .transitions
                .iter()
                .map(|t| if t.terminal { 0.0 } else { 1.0 })
                .collect(),
            policy,
            policy_opt: adam(),
            value,
            q,
            q_target,
            batch_rng: seed::derived_rng(s, &[role::BATCHES]),
            steps: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn obs_stats(&self) -> &ObsStats {
        &self.obs_stats
    }

    pub fn policy(&self) -> &PolicyHead {
        &self.policy
    }

    pub fn value(&self) -> Option<&Mlp> {
        self.value.as_ref().map(|(v, _)| v)
    }

    pub fn q_networks(&self) -> Vec<&Mlp> {
        self.q.iter().map(|(m, _)| m).collect()
    }

    pub fn q_targets(&self) -> &[Mlp] {
        &self.q_target
    }

    /// Draws the next minibatch of row indices from the seeded stream.
    pub fn sample_batch(&mut self) -> Vec<usize> {
        let n = self.rewards.len();
        (0..self.config.batch_size)
            .map(|_| self.batch_rng.random_range(0..n))
            .collect()
    }

    pub fn step(&mut self) -> Result<StepLosses> {
        let idx = self.sample_batch();
        self.step_on(&idx)
    }

    fn gather(&self, idx: &[usize]) -> Batch {
        let s = self.states.select(Axis(0), idx);
        let a = self.actions.select(Axis(0), idx);
        let sa = concatenate(Axis(1), &[s.view(), a.view()]).expect("same row count");
        Batch {
            s2: self.next_states.select(Axis(0), idx),
            sa,
            s,
            a,
            r: idx.iter().map(|&i| self.rewards[i]).collect(),
            not_done: idx.iter().map(|&i| self.not_done[i]).collect(),
        }
    }

    /// One training step on an explicit minibatch.
    pub fn step_on(&mut self, idx: &[usize]) -> Result<StepLosses> {
        let step = self.steps;
        let b = self.gather(idx);
        let batch = idx.len() as f64;
        let check = |x: f64, which: &'static str| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::NonFiniteLoss { step, which })
            }
        };

        let (weights, v_loss, q_loss) = match &mut self.value {
            None => (vec![1.0; idx.len()], 0.0, 0.0),
            Some((value, value_opt)) => {
                let next_v = value.forward_batch(b.s2.view())?;
                let targets: Vec<f64> = (0..idx.len())
                    .map(|i| b.r[i] + self.config.gamma * b.not_done[i] * next_v[[i, 0]])
                    .collect();

                let target_q = self
                    .q_target
                    .iter()
                    .map(|t| t.forward_batch(b.sa.view()))
                    .collect::<Result<Vec<_>>>()?;
                let how = self.config.aggregator();
                let mut members = vec![0.0; target_q.len()];
                let agg: Vec<f64> = (0..idx.len())
                    .map(|i| {
                        for (m, q) in members.iter_mut().zip(&target_q) {
                            *m = q[[i, 0]];
                        }
                        aggregate(&mut members, how)
                    })
                    .collect();

                let (v_pred, cache) = value.forward_train(b.s.view())?;
                let tau = self.config.tau;
                let mut upstream = Array2::zeros(v_pred.raw_dim());
                let mut v_loss = 0.0;
                let mut adv = Vec::with_capacity(idx.len());
                for i in 0..idx.len() {
                    let u = agg[i] - v_pred[[i, 0]];
                    v_loss += expectile_loss(u, tau);
                    upstream[[i, 0]] = -expectile_grad(u, tau) / batch;
                    adv.push(u);
                }
                let v_loss = check(v_loss / batch, "value")?;
                let (grad, _) = value.backward(&cache, upstream.view())?;
                value_opt.step_mlp(value, &grad)?;

                let mut q_loss = 0.0;
                for (q, opt) in &mut self.q {
                    let (l, g) = q_loss_and_grad(q, b.sa.view(), &targets, self.config.q_loss())?;
                    check(l, "q")?;
                    opt.step_mlp(q, &g)?;
                    q_loss += l;
                }
                let q_loss = q_loss / self.q.len() as f64;
                let w = advantage_weights(&adv, self.config.beta, self.config.adv_weight_clip);
                (w, v_loss, q_loss)
            }
        };

        let (p_loss, p_grad) = self.policy.loss_and_grad(b.s.view(), b.a.view(), &weights)?;
        let p_loss = check(p_loss, "policy")?;
        self.policy.apply(&mut self.policy_opt, &p_grad)?;

        for (t, (q, _)) in self.q_target.iter_mut().zip(&self.q) {
            soft_update(t, q, self.config.target_rho)?;
        }
        self.steps += 1;
        Ok(StepLosses {
            q: q_loss,
            v: v_loss,
            policy: p_loss,
        })
    }

    pub fn finish(self) -> TrainedAgent {
        let (d_s, d_a, action_kind) = self.data_shape;
        TrainedAgent {
            config: self.config,
            obs_stats: self.obs_stats,
            d_s,
            d_a,
            action_kind,
            policy: self.policy,
            value: self.value.map(|(v, _)| v),
            q: self.q.into_iter().map(|(m, _)| m).collect(),
            q_target: self.q_target,
        }
    }
}
