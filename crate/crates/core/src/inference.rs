//! Multiplicity correction, posterior probabilities and a scenario-based
//! Bayesian comparator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::onomasticon::{normalize_name, Gender, Lexicon};
use crate::rr_engine::{CandidateEntry, CandidateLists, Inscription, RrError, TombConfiguration};
use crate::tail_area::{slot_distribution, AtomLabel, ConfigurationShape, SlotDistribution, TailError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("the shape has no slots for any gender with a population")]
    ZeroSlots,
    #[error("theta and q are both zero; the posterior is undefined")]
    DegenerateInputs,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("scenario {0:?} cannot be placed on the observed configuration")]
    InconsistentScenario(String),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Rr(#[from] RrError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    #[default]
    UnionBound,
    ExactComplement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceInputs {
    pub alpha: f64,
    pub n_trials: u64,
    pub theta: f64,
    pub population_male: u64,
    pub population_female: u64,
}

impl InferenceInputs {
    pub fn validate(&self) -> Result<(), InferenceError> {
        check_unit("alpha", self.alpha)?;
        check_unit("theta", self.theta)?;
        if self.n_trials == 0 || self.population_male == 0 || self.population_female == 0 {
            return Err(InferenceError::InvalidInput("trials and populations must be positive".into()));
        }
        Ok(())
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), InferenceError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(InferenceError::InvalidInput(format!("{name} = {v} is outside [0, 1]")))
    }
}

/// Number of comparable tombs the populations can fill.
pub fn trials_estimate(
    population_male: u64,
    population_female: u64,
    shape: &ConfigurationShape,
) -> Result<u64, InferenceError> {
    let mut n: Option<u64> = None;
    for (pop, slots) in [(population_male, shape.male_slots), (population_female, shape.female_slots)] {
        if slots > 0 {
            let k = pop / slots as u64;
            n = Some(n.map_or(k, |m| m.min(k)));
        }
    }
    n.ok_or(InferenceError::ZeroSlots)
}

/// Probability bound that at least one of `n` independent trials has a tail
/// value at most `alpha`.
pub fn multiplicity_bound(alpha: f64, n: u64, method: Multiplicity) -> f64 {
    match method {
        Multiplicity::UnionBound => (n as f64 * alpha).min(1.0),
        Multiplicity::ExactComplement => {
            if alpha >= 1.0 {
                1.0
            } else {
                -(n as f64 * (-alpha).ln_1p()).exp_m1()
            }
        }
    }
}

/// `theta / (theta + q)`.
pub fn posterior(theta: f64, q: f64) -> Result<f64, InferenceError> {
    check_unit("theta", theta)?;
    check_unit("q", q)?;
    if theta + q == 0.0 {
        return Err(InferenceError::DegenerateInputs);
    }
    Ok(theta / (theta + q))
}

pub const POSTERIOR_FORMULA: &str = "theta / (theta + q) (reconstructed)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    pub theta: f64,
    pub alpha: f64,
    pub n_trials: u64,
    pub q: f64,
    pub posterior: f64,
    pub method: Multiplicity,
    pub formula: String,
}

pub fn posterior_result(inputs: &InferenceInputs, method: Multiplicity) -> Result<PosteriorResult, InferenceError> {
    inputs.validate()?;
    let q = multiplicity_bound(inputs.alpha, inputs.n_trials, method);
    Ok(PosteriorResult {
        theta: inputs.theta,
        alpha: inputs.alpha,
        n_trials: inputs.n_trials,
        q,
        posterior: posterior(inputs.theta, q)?,
        method,
        formula: POSTERIOR_FORMULA.into(),
    })
}

/// A name a scenario requires; `rendition` narrows it to one spelling.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScenarioName {
    pub gender: Gender,
    pub generic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rendition: Option<String>,
}

impl ScenarioName {
    pub fn new(gender: Gender, generic: &str, rendition: Option<&str>) -> Self {
        ScenarioName {
            gender,
            generic: normalize_name(generic),
            rendition: rendition.map(normalize_name),
        }
    }

    fn matches(&self, insc: &Inscription) -> bool {
        self.gender == insc.gender
            && self.generic == normalize_name(&insc.generic)
            && self
                .rendition
                .as_ref()
                .is_none_or(|r| Some(r.as_str()) == insc.rendition.as_deref().map(normalize_name).as_deref())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioPair {
    pub father: ScenarioName,
    pub son: ScenarioName,
}

/// An explicit name combination a true family tomb might exhibit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub names: Vec<ScenarioName>,
    #[serde(default)]
    pub pairs: Vec<ScenarioPair>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.names.is_empty() && self.pairs.is_empty() {
            return Err(InferenceError::InvalidInput(format!("scenario {:?} requires nothing", self.name)));
        }
        for p in &self.pairs {
            if p.father.gender != Gender::Male || p.son.gender != Gender::Male {
                return Err(InferenceError::InvalidInput(format!(
                    "scenario {:?}: father-son pairs must be male",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLikelihood {
    pub name: String,
    pub placements: u64,
    pub consistent_placements: u64,
    pub likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPosterior {
    pub prior: f64,
    pub likelihood_h1: f64,
    pub likelihood_h0: f64,
    pub posterior: f64,
    pub scenarios: Vec<ScenarioLikelihood>,
}

/// Observed kept slots with their null probabilities, shared by every scenario.
pub(crate) struct ObservedSlots {
    pub(crate) inscriptions: Vec<Inscription>,
    pub(crate) edges: Vec<(usize, usize)>,
    /// Null probability of each slot's observed atom.
    pub(crate) p_label: Vec<f64>,
    /// `P(observed atom | a planted bearer of the slot's generic)`.
    pub(crate) p_given_generic: Vec<f64>,
}

impl ObservedSlots {
    pub(crate) fn new(observed: &TombConfiguration, lexicon: &Lexicon, lists: &CandidateLists) -> Result<Self, InferenceError> {
        observed.validate()?;
        let kept = observed.without_discarded();
        let male = slot_distribution(Gender::Male, &lists.male, lexicon)?;
        let female = slot_distribution(Gender::Female, &lists.female, lexicon)?;
        let mut p_label = Vec::new();
        let mut p_given_generic = Vec::new();
        for insc in &kept.inscriptions {
            let (dist, list) = match insc.gender {
                Gender::Male => (&male, &lists.male),
                Gender::Female => (&female, &lists.female),
            };
            let idx = dist.atom_for(insc, list).ok_or_else(|| {
                RrError::Lexicon(crate::onomasticon::OnomasticonError::NameNotFound {
                    gender: insc.gender,
                    name: insc.specific_name().to_string(),
                })
            })?;
            p_label.push(dist.atoms[idx].probability.to_f64());
            p_given_generic.push(conditional_on_generic(dist, idx, &normalize_name(&insc.generic), lexicon));
        }
        Ok(ObservedSlots {
            edges: kept.edges.iter().map(|e| (e.father, e.son)).collect(),
            inscriptions: kept.inscriptions,
            p_label,
            p_given_generic,
        })
    }

    /// Whether the scenario's required names fit the slot counts.
    pub(crate) fn fits(&self, s: &Scenario) -> bool {
        Gender::ALL.iter().all(|&g| {
            let need = s.names.iter().filter(|n| n.gender == g).count()
                + if g == Gender::Male { 2 * s.pairs.len() } else { 0 };
            need <= self.inscriptions.iter().filter(|i| i.gender == g).count()
        })
    }

    pub(crate) fn likelihood_h0(&self) -> f64 {
        self.p_label.iter().product()
    }

    /// Placements of the scenario (total, consistent) and the summed
    /// probability of the data over consistent ones.
    pub(crate) fn scenario(&self, s: &Scenario) -> (u64, u64, f64) {
        let n = self.inscriptions.len();
        let mut occupied = vec![None::<f64>; n];
        let mut acc = (0u64, 0u64, 0.0f64);
        self.place_pairs(s, 0, &mut occupied, true, &mut acc);
        acc
    }

    fn factor(&self, slot: usize, name: &ScenarioName) -> Option<f64> {
        if !name.matches(&self.inscriptions[slot]) {
            return None;
        }
        Some(if name.rendition.is_some() { 1.0 } else { self.p_given_generic[slot] })
    }

    fn place_pairs(&self, s: &Scenario, k: usize, occ: &mut [Option<f64>], ok: bool, acc: &mut (u64, u64, f64)) {
        if k == s.pairs.len() {
            return self.place_names(s, 0, occ, ok, acc);
        }
        let pair = &s.pairs[k];
        for &(f, son) in &self.edges {
            if occ[f].is_some() || occ[son].is_some() {
                continue;
            }
            let (ff, fs) = (self.factor(f, &pair.father), self.factor(son, &pair.son));
            let consistent = ok && ff.is_some() && fs.is_some();
            occ[f] = Some(ff.unwrap_or(0.0));
            occ[son] = Some(fs.unwrap_or(0.0));
            self.place_pairs(s, k + 1, occ, consistent, acc);
            occ[f] = None;
            occ[son] = None;
        }
    }

    fn place_names(&self, s: &Scenario, k: usize, occ: &mut [Option<f64>], ok: bool, acc: &mut (u64, u64, f64)) {
        if k == s.names.len() {
            acc.0 += 1;
            if ok {
                acc.1 += 1;
                acc.2 += occ.iter().zip(&self.p_label).map(|(o, p)| o.unwrap_or(*p)).product::<f64>();
            }
            return;
        }
        let name = &s.names[k];
        for slot in 0..occ.len() {
            if occ[slot].is_some() || self.inscriptions[slot].gender != name.gender {
                continue;
            }
            let f = self.factor(slot, name);
            occ[slot] = Some(f.unwrap_or(0.0));
            self.place_names(s, k + 1, occ, ok && f.is_some(), acc);
            occ[slot] = None;
        }
    }
}

/// Probability that a bearer of `generic` lands in atom `idx`.
fn conditional_on_generic(dist: &SlotDistribution, idx: usize, generic: &str, lexicon: &Lexicon) -> f64 {
    let Ok(freq) = lexicon.generic_frequency(dist.gender, generic) else { return 1.0 };
    let freq = freq.to_f64();
    if freq <= 0.0 {
        return 1.0;
    }
    let atom = &dist.atoms[idx];
    match &atom.label {
        AtomLabel::Entry(e) if e.generic() == generic => (atom.probability.to_f64() / freq).min(1.0),
        AtomLabel::Entry(_) => 1.0,
        AtomLabel::Other { .. } => {
            let listed: f64 = dist
                .atoms
                .iter()
                .filter(|a| matches!(&a.label, AtomLabel::Entry(e) if e.generic() == generic))
                .map(|a| a.probability.to_f64())
                .sum();
            ((freq - listed) / freq).clamp(0.0, 1.0)
        }
    }
}

/// Posterior probability of the scenario hypothesis given the observed
/// kept slots, with equally weighted scenarios and uniformly random
/// placement of each scenario's required names.
pub fn scenario_posterior(
    scenarios: &[Scenario],
    observed: &TombConfiguration,
    lexicon: &Lexicon,
    lists: &CandidateLists,
    prior_pi: f64,
) -> Result<ScenarioPosterior, InferenceError> {
    if scenarios.is_empty() {
        return Err(InferenceError::InvalidInput("no scenarios".into()));
    }
    if !(prior_pi > 0.0 && prior_pi < 1.0) {
        return Err(InferenceError::InvalidInput(format!("prior {prior_pi} outside (0, 1)")));
    }
    for s in scenarios {
        s.validate()?;
    }
    let slots = ObservedSlots::new(observed, lexicon, lists)?;
    if !scenarios.iter().any(|s| slots.fits(s)) {
        return Err(InferenceError::InconsistentScenario(scenarios[0].name.clone()));
    }
    // Scenarios with more names than slots, or a pair with no father-son edge
    // to sit on, cannot have produced the data.
    let per: Vec<ScenarioLikelihood> = scenarios
        .par_iter()
        .map(|s| {
            let (placements, consistent, sum) = if slots.fits(s) { slots.scenario(s) } else { (0, 0, 0.0) };
            ScenarioLikelihood {
                name: s.name.clone(),
                placements,
                consistent_placements: consistent,
                likelihood: if placements == 0 { 0.0 } else { sum / placements as f64 },
            }
        })
        .collect();
    let l1 = per.iter().map(|s| s.likelihood).sum::<f64>() / per.len() as f64;
    let l0 = slots.likelihood_h0();
    let num = l1 * prior_pi;
    let den = num + l0 * (1.0 - prior_pi);
    if den == 0.0 {
        return Err(InferenceError::DegenerateInputs);
    }
    Ok(ScenarioPosterior { prior: prior_pi, likelihood_h1: l1, likelihood_h0: l0, posterior: num / den, scenarios: per })
}

/// Every scenario containing the required pair plus any subset of the
/// optional names, in subset-bitmask order.
pub fn subset_scenarios(pair: &ScenarioPair, optional: &[ScenarioName]) -> Vec<Scenario> {
    (0u64..1 << optional.len())
        .map(|mask| {
            let names: Vec<ScenarioName> = optional
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect();
            let label = std::iter::once(format!("{}>{}", pair.father.generic, pair.son.generic))
                .chain(names.iter().map(|n| n.rendition.clone().unwrap_or_else(|| n.generic.clone())))
                .collect::<Vec<_>>()
                .join("+");
            Scenario { name: label, names, pairs: vec![pair.clone()] }
        })
        .collect()
}

/// Scenario names corresponding to listed candidates (used to drop names
/// from scenarios when a candidate is demoted).
pub fn scenario_name_of(gender: Gender, entry: &CandidateEntry) -> ScenarioName {
    ScenarioName::new(gender, entry.generic(), entry.rendition())
}
