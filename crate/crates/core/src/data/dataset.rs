use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Continuous,
    Discrete,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Continuous => "continuous",
            ActionKind::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Continuous(_) => ActionKind::Continuous,
            Action::Discrete(_) => ActionKind::Discrete,
        }
    }

    /// Network input encoding: the vector itself, or a one-hot of width `d_a`.
    pub fn to_vector(&self, d_a: usize) -> Vec<f64> {
        match self {
            Action::Continuous(v) => v.clone(),
            Action::Discrete(id) => {
                let mut v = vec![0.0; d_a];
                if *id < d_a {
                    v[*id] = 1.0;
                }
                v
            }
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Continuous(v) => Some(v),
            Action::Discrete(_) => None,
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(id) => Some(*id),
            Action::Continuous(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

impl Transition {
    fn is_finite(&self) -> bool {
        let action_ok = match &self.action {
            Action::Continuous(v) => v.iter().all(|x| x.is_finite()),
            Action::Discrete(_) => true,
        };
        action_ok
            && self.reward.is_finite()
            && self.state.iter().all(|x| x.is_finite())
            && self.next_state.iter().all(|x| x.is_finite())
    }
}

/// An ordered list of transitions sharing one shape.
///
/// For discrete actions `d_a` is the number of actions and each action id is
/// below it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub transitions: Vec<Transition>,
    pub d_s: usize,
    pub d_a: usize,
    pub action_kind: ActionKind,
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(d_s: usize, d_a: usize, action_kind: ActionKind) -> Result<Self> {
        if d_s == 0 || d_a == 0 {
            return Err(Error::InvalidArgument(
                "dataset dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            transitions: Vec::new(),
            d_s,
            d_a,
            action_kind,
            metadata: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        self.check(&t, self.transitions.len())?;
        self.transitions.push(t);
        Ok(())
    }

    pub(crate) fn check(&self, t: &Transition, row: usize) -> Result<()> {
        let ctx = |field: &str| format!("row {row} {field}");
        if t.state.len() != self.d_s {
            return Err(Error::DimensionMismatch {
                context: ctx("state"),
                expected: self.d_s,
                got: t.state.len(),
            });
        }
        if t.next_state.len() != self.d_s {
            return Err(Error::DimensionMismatch {
                context: ctx("next_state"),
                expected: self.d_s,
                got: t.next_state.len(),
            });
        }
        match (&t.action, self.action_kind) {
            (Action::Continuous(a), ActionKind::Continuous) if a.len() != self.d_a => {
                return Err(Error::DimensionMismatch {
                    context: ctx("action"),
                    expected: self.d_a,
                    got: a.len(),
                })
            }
            (Action::Discrete(id), ActionKind::Discrete) if *id >= self.d_a => {
                return Err(Error::InvalidArgument(format!(
                    "row {row}: action id {id} out of range for {} actions",
                    self.d_a
                )))
            }
            (a, kind) if a.kind() != kind => {
                return Err(Error::InvalidArgument(format!(
                    "row {row}: {} action in {} dataset",
                    a.kind().as_str(),
                    kind.as_str()
                )))
            }
            _ => {}
        }
        if !t.is_finite() {
            return Err(Error::NonFinite(ctx("transition")));
        }
        Ok(())
    }

    /// Checks every row against the declared shape.
    pub fn validate(&self) -> Result<()> {
        self.transitions
            .iter()
            .enumerate()
            .try_for_each(|(i, t)| self.check(t, i))
    }

    /// Width of the action input fed to Q networks and produced by policies.
    pub fn action_width(&self) -> usize {
        self.d_a
    }

    pub fn action_vector(&self, i: usize) -> Vec<f64> {
        self.transitions[i].action.to_vector(self.d_a)
    }

    /// Same shape and metadata, rows replaced.
    pub fn with_transitions(&self, transitions: Vec<Transition>) -> Self {
        Self {
            transitions,
            d_s: self.d_s,
            d_a: self.d_a,
            action_kind: self.action_kind,
            metadata: self.metadata.clone(),
        }
    }
}
