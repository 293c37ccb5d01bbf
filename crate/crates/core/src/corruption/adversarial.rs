use super::{pgd_minimize, Attack, AttackContext, Element, Mode};
use crate::data::{Action, ActionKind, Dataset, Transition};
use crate::error::{invalid, Error, Result};
use crate::seed::LabRng;

/// Value and policy queries in raw (unnormalized) coordinates.
pub trait AttackOracle: Sync {
    fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64>;
    fn policy_act(&self, state: &[f64]) -> Result<Vec<f64>>;
}

/// Oracle built from two closures.
pub struct FnOracle<Q, P> {
    pub q: Q,
    pub policy: P,
}

impl<Q, P> AttackOracle for FnOracle<Q, P>
where
    Q: Fn(&[f64], &[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok((self.q)(state, action))
    }

    fn policy_act(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok((self.policy)(state))
    }
}

pub(super) struct AdversarialAttack(pub(super) Element);

impl AdversarialAttack {
    fn oracle<'a>(&self, ctx: &AttackContext<'a>) -> Result<&'a dyn AttackOracle> {
        ctx.oracle
            .ok_or_else(|| Error::MissingOracle(self.0.as_str().to_string()))
    }
}

impl Attack for AdversarialAttack {
    fn element(&self) -> Element {
        self.0
    }

    fn mode(&self) -> Mode {
        Mode::Adversarial
    }

    fn prepare(&self, data: &Dataset, ctx: &AttackContext<'_>) -> Result<()> {
        match self.0 {
            Element::Reward => Ok(()),
            Element::Mixed => Err(invalid("the mixed attack is only defined in random mode")),
            Element::Action if data.action_kind == ActionKind::Discrete => {
                Err(invalid("action attacks need continuous actions"))
            }
            _ => self.oracle(ctx).map(|_| ()),
        }
    }

    fn corrupt_row(&self, row: &mut Transition, ctx: &AttackContext<'_>, rng: &mut LabRng) -> Result<()> {
        let eps = ctx.spec.scale;
        if self.0 == Element::Reward {
            row.reward *= -eps;
            return Ok(());
        }
        let oracle = self.oracle(ctx)?;
        match self.0 {
            Element::Observation => {
                let action = row.action.to_vector(ctx.d_a);
                let f = |s: &[f64]| oracle.q_value(s, &action);
                row.state = pgd_minimize(&row.state, &ctx.stats.state_std, eps, &f, ctx.pgd, rng)?;
            }
            Element::Action => {
                let Action::Continuous(a) = &row.action else {
                    return Err(invalid("action attacks need continuous actions"));
                };
                let state = &row.state;
                let f = |a: &[f64]| oracle.q_value(state, a);
                let attacked = pgd_minimize(a, &ctx.stats.action_std, eps, &f, ctx.pgd, rng)?;
                row.action = Action::Continuous(attacked);
            }
            Element::Dynamics => {
                let f = |s: &[f64]| oracle.q_value(s, &oracle.policy_act(s)?);
                row.next_state =
                    pgd_minimize(&row.next_state, &ctx.stats.next_state_std, eps, &f, ctx.pgd, rng)?;
            }
            Element::Reward | Element::Mixed => unreachable!(),
        }
        Ok(())
    }
}
