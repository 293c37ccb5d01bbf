//! Dataset attacks: random noise and adversarial perturbations of states,
//! actions, rewards and next states.
//!
//! Every attack is a row-level strategy looked up by `(element, mode)`.
//! Selected rows are rewritten independently with a stream keyed by the row
//! index, so the output does not depend on how rows are scheduled.

mod adversarial;
mod pgd;
mod random;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adversarial::{AttackOracle, FnOracle};
pub use pgd::{pgd_minimize, PgdConfig};

use crate::data::{column_std, Dataset, Transition};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, role, LabRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Observation,
    Action,
    Reward,
    Dynamics,
    Mixed,
}

impl Element {
    /// The single-field elements, in the order the mixed attack applies them.
    pub const SINGLE: [Element; 4] = [
        Element::Observation,
        Element::Action,
        Element::Reward,
        Element::Dynamics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Element::Observation => "observation",
            Element::Action => "action",
            Element::Reward => "reward",
            Element::Dynamics => "dynamics",
            Element::Mixed => "mixed",
        }
    }

    pub(crate) fn code(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Element::SINGLE
            .into_iter()
            .chain([Element::Mixed])
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "attack element",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Random,
    Adversarial,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Random => "random",
            Mode::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Mode::Random),
            "adversarial" => Ok(Mode::Adversarial),
            other => Err(Error::Unknown {
                kind: "attack mode",
                name: other.to_string(),
            }),
        }
    }
}

/// Fully determines an attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub element: Element,
    pub mode: Mode,
    /// Fraction `c` of rows attacked.
    pub rate: f64,
    /// Attack scale `ε`.
    pub scale: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(invalid(format!("corruption rate must lie in [0,1], got {}", self.rate)));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(invalid(format!("corruption scale must be finite and >= 0, got {}", self.scale)));
        }
        if self.element == Element::Mixed && self.mode == Mode::Adversarial {
            return Err(invalid("the mixed attack is only defined in random mode"));
        }
        Ok(())
    }
}

/// Per-dimension standard deviations of the clean dataset, frozen before any
/// row is modified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanStats {
    pub state_std: Vec<f64>,
    pub action_std: Vec<f64>,
    pub next_state_std: Vec<f64>,
}

impl CleanStats {
    pub fn of(data: &Dataset) -> Self {
        let actions: Vec<Vec<f64>> = (0..data.len()).map(|i| data.action_vector(i)).collect();
        Self {
            state_std: column_std(data.transitions.iter().map(|t| t.state.as_slice()), data.d_s),
            action_std: column_std(actions.iter().map(|a| a.as_slice()), data.d_a),
            next_state_std: column_std(
                data.transitions.iter().map(|t| t.next_state.as_slice()),
                data.d_s,
            ),
        }
    }
}

/// `round(c·N)` distinct row indices drawn uniformly without replacement,
/// returned in ascending order.
pub fn select_corrupt_indices(n: usize, rate: f64, seed: u64) -> Vec<usize> {
    let count = ((rate * n as f64).round() as usize).min(n);
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Inputs shared by every row of one attack.
pub struct AttackContext<'a> {
    pub spec: &'a CorruptionSpec,
    pub stats: &'a CleanStats,
    pub d_a: usize,
    pub oracle: Option<&'a dyn AttackOracle>,
    pub pgd: &'a PgdConfig,
}

/// A row-level attack strategy.
pub trait Attack: Send + Sync {
    fn element(&self) -> Element;
    fn mode(&self) -> Mode;
    /// Checks the dataset and context once before any row is touched.
    fn prepare(&self, _data: &Dataset, _ctx: &AttackContext<'_>) -> Result<()> {
        Ok(())
    }
    fn corrupt_row(&self, row: &mut Transition, ctx: &AttackContext<'_>, rng: &mut LabRng) -> Result<()>;
}

/// All registered single-element attacks.
pub fn registry() -> Vec<Box<dyn Attack>> {
    let mut out: Vec<Box<dyn Attack>> = Vec::new();
    for element in Element::SINGLE {
        out.push(Box::new(random::RandomAttack(element)));
        out.push(Box::new(adversarial::AdversarialAttack(element)));
    }
    out
}

pub fn attack_for(element: Element, mode: Mode) -> Result<Box<dyn Attack>> {
    registry()
        .into_iter()
        .find(|a| a.element() == element && a.mode() == mode)
        .ok_or_else(|| Error::Unknown {
            kind: "attack",
            name: format!("{element}/{mode}"),
        })
}

fn index_seed(spec: &CorruptionSpec, element: Element) -> u64 {
    seed::derive_seed(spec.seed, &[role::INDICES, element.code()])
}

/// Runs one single-element attack against frozen `stats`.
fn apply_single(
    data: &Dataset,
    element: Element,
    spec: &CorruptionSpec,
    stats: &CleanStats,
    oracle: Option<&dyn AttackOracle>,
    pgd: &PgdConfig,
) -> Result<(Dataset, Vec<usize>)> {
    let attack = attack_for(element, spec.mode)?;
    let ctx = AttackContext {
        spec,
        stats,
        d_a: data.d_a,
        oracle,
        pgd,
    };
    attack.prepare(data, &ctx)?;
    let picked = select_corrupt_indices(data.len(), spec.rate, index_seed(spec, element));
    let rewritten = picked
        .par_iter()
        .map(|&i| {
            let mut row = data.transitions[i].clone();
            let mut rng = seed::derived_rng(spec.seed, &[role::NOISE, element.code(), i as u64]);
            attack.corrupt_row(&mut row, &ctx, &mut rng)?;
            data.check(&row, i)?;
            Ok(row)
        })
        .collect::<Result<Vec<Transition>>>()?;
    let mut out = data.clone();
    for (&i, row) in picked.iter().zip(rewritten) {
        out.transitions[i] = row;
    }
    Ok((out, picked))
}

fn record(out: &mut Dataset, spec: &CorruptionSpec, picked: &[(Element, Vec<usize>)]) -> Result<()> {
    let n = out
        .metadata
        .keys()
        .filter(|k| k.starts_with("corruption.") && k.ends_with(".spec"))
        .count();
    let prefix = format!("corruption.{n}");
    out.metadata
        .insert(format!("{prefix}.spec"), serde_json::to_string(spec)?);
    for (element, idx) in picked {
        out.metadata
            .insert(format!("{prefix}.{element}.count"), idx.len().to_string());
        out.metadata
            .insert(format!("{prefix}.{element}.indices"), serde_json::to_string(idx)?);
    }
    Ok(())
}

/// Random attack on one element.
pub fn random_attack(data: &Dataset, spec: &CorruptionSpec, stats: &CleanStats) -> Result<Dataset> {
    spec.validate()?;
    if spec.mode != Mode::Random || spec.element == Element::Mixed {
        return Err(invalid("random_attack takes a single element in random mode"));
    }
    let (mut out, picked) = apply_single(data, spec.element, spec, stats, None, &PgdConfig::default())?;
    record(&mut out, spec, &[(spec.element, picked)])?;
    Ok(out)
}

/// Observation, action, reward and dynamics random attacks in that order,
/// each on its own index set, all scaled by the stats of the input.
pub fn mixed_random_attack(data: &Dataset, rate: f64, scale: f64, seed: u64) -> Result<Dataset> {
    let spec = CorruptionSpec {
        element: Element::Mixed,
        mode: Mode::Random,
        rate,
        scale,
        seed,
    };
    spec.validate()?;
    let stats = CleanStats::of(data);
    let pgd = PgdConfig::default();
    let mut current = data.clone();
    let mut picked = Vec::new();
    for element in Element::SINGLE {
        let (next, idx) = apply_single(&current, element, &spec, &stats, None, &pgd)?;
        current = next;
        picked.push((element, idx));
    }
    record(&mut current, &spec, &picked)?;
    Ok(current)
}

/// Adversarial attack on one element. The reward attack needs no oracle.
pub fn adversarial_attack(
    data: &Dataset,
    spec: &CorruptionSpec,
    oracle: Option<&dyn AttackOracle>,
    pgd: &PgdConfig,
    stats: &CleanStats,
) -> Result<Dataset> {
    spec.validate()?;
    pgd.validate()?;
    if spec.mode != Mode::Adversarial {
        return Err(invalid("adversarial_attack takes an adversarial spec"));
    }
    let (mut out, picked) = apply_single(data, spec.element, spec, stats, oracle, pgd)?;
    record(&mut out, spec, &[(spec.element, picked)])?;
    Ok(out)
}

/// Dispatches on the spec, freezing clean stats from `data` first.
pub fn corrupt(
    data: &Dataset,
    spec: &CorruptionSpec,
    oracle: Option<&dyn AttackOracle>,
    pgd: &PgdConfig,
) -> Result<Dataset> {
    spec.validate()?;
    match (spec.element, spec.mode) {
        (Element::Mixed, _) => mixed_random_attack(data, spec.rate, spec.scale, spec.seed),
        (_, Mode::Random) => random_attack(data, spec, &CleanStats::of(data)),
        (_, Mode::Adversarial) => adversarial_attack(data, spec, oracle, pgd, &CleanStats::of(data)),
    }
}

/// Indices recorded by the most recent attack on `element`, if any.
pub fn recorded_indices(data: &Dataset, element: Element) -> Result<Option<Vec<usize>>> {
    let mut latest = None;
    for (k, v) in &data.metadata {
        if k.starts_with("corruption.") && k.ends_with(&format!(".{element}.indices")) {
            let n: usize = k.split('.').nth(1).and_then(|x| x.parse().ok()).unwrap_or(0);
            if latest.as_ref().is_none_or(|(m, _)| n >= *m) {
                latest = Some((n, v));
            }
        }
    }
    latest
        .map(|(_, v)| serde_json::from_str(v).map_err(Error::from))
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_count_rounds_half_up() {
        assert_eq!(select_corrupt_indices(1000, 0.3, 1).len(), 300);
        assert_eq!(select_corrupt_indices(5, 0.5, 1).len(), 3);
        assert!(select_corrupt_indices(10, 0.0, 1).is_empty());
        assert_eq!(select_corrupt_indices(10, 1.0, 1), (0..10).collect::<Vec<_>>());
        assert_eq!(select_corrupt_indices(0, 0.5, 1), Vec::<usize>::new());
    }

    #[test]
    fn indices_are_distinct_and_seeded() {
        let a = select_corrupt_indices(500, 0.4, 3);
        let mut d = a.clone();
        d.dedup();
        assert_eq!(a, d);
        assert_eq!(a, select_corrupt_indices(500, 0.4, 3));
        assert_ne!(a, select_corrupt_indices(500, 0.4, 4));
    }

    #[test]
    fn spec_rejects_mixed_adversarial_and_bad_ranges() {
        let mut s = CorruptionSpec {
            element: Element::Mixed,
            mode: Mode::Adversarial,
            rate: 0.3,
            scale: 1.0,
            seed: 0,
        };
        assert!(s.validate().is_err());
        s.mode = Mode::Random;
        assert!(s.validate().is_ok());
        s.rate = 1.5;
        assert!(s.validate().is_err());
        s.rate = 0.1;
        s.scale = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn registry_covers_every_single_element() {
        for e in Element::SINGLE {
            for m in [Mode::Random, Mode::Adversarial] {
                let a = attack_for(e, m).unwrap();
                assert_eq!((a.element(), a.mode()), (e, m));
            }
        }
        assert!(attack_for(Element::Mixed, Mode::Random).is_err());
        assert_eq!("dynamics".parse::<Element>().unwrap(), Element::Dynamics);
        assert!("next".parse::<Element>().is_err());
    }
}
