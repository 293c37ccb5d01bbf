use rand::Rng;

use super::{Attack, AttackContext, Element, Mode};
use crate::data::{Action, ActionKind, Dataset, Transition};
use crate::error::{invalid, Result};
use crate::seed::LabRng;

/// `x + λ⊙std` with `λ ∼ U[−ε, ε]` per dimension.
fn jitter(x: &mut [f64], std: &[f64], eps: f64, rng: &mut LabRng) {
    for (xi, si) in x.iter_mut().zip(std) {
        let lambda = if eps > 0.0 { rng.random_range(-eps..=eps) } else { 0.0 };
        *xi += lambda * si;
    }
}

pub(super) struct RandomAttack(pub(super) Element);

impl Attack for RandomAttack {
    fn element(&self) -> Element {
        self.0
    }

    fn mode(&self) -> Mode {
        Mode::Random
    }

    fn prepare(&self, data: &Dataset, _ctx: &AttackContext<'_>) -> Result<()> {
        if self.0 == Element::Action && data.action_kind == ActionKind::Discrete {
            return Err(invalid("action attacks need continuous actions"));
        }
        Ok(())
    }

    fn corrupt_row(&self, row: &mut Transition, ctx: &AttackContext<'_>, rng: &mut LabRng) -> Result<()> {
        let eps = ctx.spec.scale;
        match self.0 {
            Element::Observation => jitter(&mut row.state, &ctx.stats.state_std, eps, rng),
            Element::Action => match &mut row.action {
                Action::Continuous(a) => jitter(a, &ctx.stats.action_std, eps, rng),
                Action::Discrete(_) => return Err(invalid("action attacks need continuous actions")),
            },
            Element::Reward => {
                let bound = 30.0 * eps;
                row.reward = if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
            }
            Element::Dynamics => jitter(&mut row.next_state, &ctx.stats.next_state_std, eps, rng),
            Element::Mixed => return Err(invalid("mixed is not a row-level attack")),
        }
        Ok(())
    }
}
