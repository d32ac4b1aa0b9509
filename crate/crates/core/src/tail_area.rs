//! Null distribution of the cluster RR and its tail probabilities.
//!
//! Under the null every slot of a configuration shape is an independent draw
//! from the lexicon. A draw is classified into an *atom*: a listed candidate
//! or Other. Exact enumeration walks every atom combination, aggregating
//! probability by the multiset of atoms per gender plus the bonus applied on
//! each father–son edge, which is all the cluster RR depends on. Monte Carlo
//! draws the same atoms with a counter-based batch layout so that the result
//! depends only on `(seed, n_samples)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numeric::{binomial_std_error, Exact, NeumaierSum, Threshold};
use crate::onomasticon::{normalize_name, Gender, Lexicon, OnomasticonError};
use crate::rr_engine::{
    entry_rr, match_candidate, BonusPolicy, CandidateEntry, CandidateList, CandidateLists,
    Inscription, Match, RrError, TombConfiguration,
};

pub const DEFAULT_BUDGET: u64 = 100_000_000;
const ENUMERATION_CHUNK: u64 = 4096;
pub(crate) const MC_BATCH: u64 = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error("{gender} slot distribution has negative mass: {detail}")]
    NegativeMass { gender: Gender, detail: String },
    #[error("enumeration needs {combinations} combinations, above the budget of {budget}; use Monte Carlo")]
    BudgetExceeded { combinations: String, budget: u64 },
    #[error("invalid configuration shape: {0}")]
    InvalidShape(String),
    #[error("invalid validity filter: {0}")]
    InvalidFilter(String),
    #[error("the validity filter rejects every configuration")]
    NothingAccepted,
    #[error("invalid sample count parameters: {0}")]
    InvalidParameters(String),
}

impl From<OnomasticonError> for TailError {
    fn from(e: OnomasticonError) -> Self {
        TailError::Rr(RrError::Lexicon(e))
    }
}

/// Slot counts per gender and father–son edges over male slot indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigurationShape {
    pub male_slots: usize,
    pub female_slots: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

impl ConfigurationShape {
    pub fn new(male_slots: usize, female_slots: usize, edges: Vec<(usize, usize)>) -> Result<Self, TailError> {
        let s = ConfigurationShape { male_slots, female_slots, edges };
        s.validate()?;
        Ok(s)
    }

    /// Shape of the kept (non-discarded) part of a configuration.
    pub fn of(config: &TombConfiguration) -> Self {
        let kept = config.without_discarded();
        let mut male_index = vec![None; kept.inscriptions.len()];
        let (mut males, mut females) = (0, 0);
        for (i, insc) in kept.inscriptions.iter().enumerate() {
            match insc.gender {
                Gender::Male => {
                    male_index[i] = Some(males);
                    males += 1;
                }
                Gender::Female => females += 1,
            }
        }
        let edges = kept
            .edges
            .iter()
            .filter_map(|e| Some((male_index[e.father]?, male_index[e.son]?)))
            .collect();
        ConfigurationShape { male_slots: males, female_slots: females, edges }
    }

    pub fn validate(&self) -> Result<(), TailError> {
        let mut sons = BTreeSet::new();
        for &(f, s) in &self.edges {
            if f >= self.male_slots || s >= self.male_slots || f == s {
                return Err(TailError::InvalidShape(format!(
                    "edge {f}->{s} is not a pair of distinct male slots in 0..{}",
                    self.male_slots
                )));
            }
            if !sons.insert(s) {
                return Err(TailError::InvalidShape(format!("male slot {s} is the son in two edges")));
            }
        }
        Ok(())
    }

    pub fn slots(&self, gender: Gender) -> usize {
        match gender {
            Gender::Male => self.male_slots,
            Gender::Female => self.female_slots,
        }
    }

    pub fn total_slots(&self) -> usize {
        self.male_slots + self.female_slots
    }
}

impl fmt::Display for ConfigurationShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m/{}f", self.male_slots, self.female_slots)?;
        if !self.edges.is_empty() {
            write!(f, " edges=")?;
            for (i, (a, b)) in self.edges.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}->{b}")?;
            }
        }
        Ok(())
    }
}

/// Classification of one null draw.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomLabel {
    Entry(CandidateEntry),
    /// An unlisted name; `generic` is set when the Other mass of a
    /// bonus-relevant generic is split out.
    Other { generic: Option<String> },
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomLabel::Entry(e) => write!(f, "{e}"),
            AtomLabel::Other { generic: None } => f.write_str("Other"),
            AtomLabel::Other { generic: Some(g) } => write!(f, "Other[{g}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub label: AtomLabel,
    pub probability: Exact,
    pub rr: Exact,
}

impl Atom {
    pub fn generic(&self) -> Option<&str> {
        match &self.label {
            AtomLabel::Entry(e) => Some(e.generic()),
            AtomLabel::Other { generic } => generic.as_deref(),
        }
    }

    /// Name compared at rendition level by bonus rules.
    pub fn specific_name(&self) -> Option<&str> {
        match &self.label {
            AtomLabel::Entry(e) => Some(e.rendition().unwrap_or(e.generic())),
            AtomLabel::Other { generic } => generic.as_deref(),
        }
    }
}

/// Null distribution of a single slot of one gender.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDistribution {
    pub gender: Gender,
    pub atoms: Vec<Atom>,
    /// Listed entries without a frequency; they carry no null mass.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unquantified: Vec<CandidateEntry>,
}

impl SlotDistribution {
    pub fn total_probability(&self) -> Exact {
        self.atoms.iter().map(|a| a.probability.clone()).sum()
    }

    pub fn position(&self, label: &AtomLabel) -> Option<usize> {
        self.atoms.iter().position(|a| &a.label == label)
    }

    /// Atom an observed inscription falls into.
    pub fn atom_for(&self, insc: &Inscription, list: &CandidateList) -> Option<usize> {
        match match_candidate(insc, list) {
            Match::Entry(e) => self.position(&AtomLabel::Entry(e)),
            Match::Other => self
                .position(&AtomLabel::Other { generic: Some(normalize_name(&insc.generic)) })
                .or_else(|| self.position(&AtomLabel::Other { generic: None })),
        }
    }
}

/// Per-slot null distribution for a gender's candidate list.
pub fn slot_distribution(
    gender: Gender,
    list: &CandidateList,
    lexicon: &Lexicon,
) -> Result<SlotDistribution, TailError> {
    slot_distribution_split(gender, list, lexicon, &BTreeSet::new())
}

/// As [`slot_distribution`], with the Other mass of each generic in
/// `split_generics` carried by its own atom. Bonuses never fire on Other
/// atoms, so the split only changes how draws are labelled.
pub fn slot_distribution_split(
    gender: Gender,
    list: &CandidateList,
    lexicon: &Lexicon,
    split_generics: &BTreeSet<String>,
) -> Result<SlotDistribution, TailError> {
    if list.gender != gender {
        return Err(RrError::InvalidList(format!("expected a {gender} list, got {}", list.gender)).into());
    }
    list.validate()?;

    let mut atoms = Vec::new();
    let mut unquantified = Vec::new();
    for entry in &list.entries {
        if lexicon.is_unquantified(gender, entry.generic(), entry.rendition()) {
            unquantified.push(entry.clone());
            continue;
        }
        let rr = entry_rr(gender, entry, lexicon)?;
        atoms.push(Atom { label: AtomLabel::Entry(entry.clone()), probability: rr.clone(), rr });
    }

    // Carve listed and demoted renditions out of their listed generic's atom.
    let rendition_mass = |generic: &str, entries: &[CandidateEntry]| -> Result<Exact, TailError> {
        let mut mass = Exact::zero();
        for e in entries {
            if let CandidateEntry::Rendition { generic: g, rendition } = e {
                if g == generic && !lexicon.is_unquantified(gender, g, Some(rendition)) {
                    mass = mass
                        + lexicon.generic_frequency(gender, g)?
                            * lexicon.rendition_frequency(gender, g, rendition)?;
                }
            }
        }
        Ok(mass)
    };
    for atom in atoms.iter_mut() {
        if let AtomLabel::Entry(CandidateEntry::Generic(g)) = &atom.label {
            let carved = rendition_mass(g, &list.entries)? + rendition_mass(g, &list.demoted)?;
            let mass = &atom.probability - &carved;
            if mass.is_negative() {
                return Err(TailError::NegativeMass {
                    gender,
                    detail: format!("renditions of {g} exceed its generic frequency"),
                });
            }
            atom.probability = mass;
        }
    }

    let listed: Exact = atoms.iter().map(|a| a.probability.clone()).sum();
    let mut other = &Exact::one() - &listed;
    if other.is_negative() {
        return Err(TailError::NegativeMass {
            gender,
            detail: format!("listed names carry {} of the probability", listed.to_f64()),
        });
    }

    for g in split_generics {
        let Ok(freq) = lexicon.generic_frequency(gender, g) else { continue };
        let assigned: Exact = atoms
            .iter()
            .filter(|a| a.generic() == Some(g.as_str()))
            .map(|a| a.probability.clone())
            .sum();
        let share = &freq - &assigned;
        if share.is_positive() {
            other = &other - &share;
            atoms.push(Atom {
                label: AtomLabel::Other { generic: Some(g.clone()) },
                probability: share,
                rr: list.other_rr.clone(),
            });
        }
    }
    if other.is_negative() {
        return Err(TailError::NegativeMass { gender, detail: "split Other mass exceeds the remainder".into() });
    }
    atoms.push(Atom { label: AtomLabel::Other { generic: None }, probability: other, rr: list.other_rr.clone() });

    Ok(SlotDistribution { gender, atoms, unquantified })
}

/// A drawn configuration presented to a validity filter: male slot atoms
/// followed by female slot atoms.
pub struct TombDraw<'a> {
    pub shape: &'a ConfigurationShape,
    pub atoms: &'a [&'a Atom],
}

pub type FilterFn = dyn Fn(&TombDraw<'_>) -> f64 + Send + Sync;

/// Which drawn configurations count as valid samples, as an acceptance
/// weight in `[0, 1]`.
#[derive(Clone, Default)]
pub enum ValidityFilter {
    #[default]
    AcceptAll,
    /// Accept each configuration independently with this probability.
    AcceptProbability(f64),
    /// Reject configurations where any listed candidate occurs more than
    /// `limit` times.
    MaxRepeats(usize),
    Custom { name: String, predicate: Arc<FilterFn> },
}

impl fmt::Debug for ValidityFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl ValidityFilter {
    pub fn custom(name: &str, predicate: impl Fn(&TombDraw<'_>) -> f64 + Send + Sync + 'static) -> Self {
        ValidityFilter::Custom { name: name.to_string(), predicate: Arc::new(predicate) }
    }

    pub fn validate(&self) -> Result<(), TailError> {
        match self {
            ValidityFilter::AcceptProbability(p) if !(*p > 0.0 && *p <= 1.0) => {
                Err(TailError::InvalidFilter(format!("accept probability {p} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ValidityFilter::AcceptAll => "accept_all".into(),
            ValidityFilter::AcceptProbability(p) => format!("accept_probability({p})"),
            ValidityFilter::MaxRepeats(k) => format!("max_repeats({k})"),
            ValidityFilter::Custom { name, .. } => format!("custom({name})"),
        }
    }

    pub fn is_accept_all(&self) -> bool {
        matches!(self, ValidityFilter::AcceptAll)
    }

    pub fn weight(&self, draw: &TombDraw<'_>) -> f64 {
        match self {
            ValidityFilter::AcceptAll => 1.0,
            ValidityFilter::AcceptProbability(p) => *p,
            ValidityFilter::MaxRepeats(limit) => {
                let mut counts: BTreeMap<&AtomLabel, usize> = BTreeMap::new();
                for a in draw.atoms {
                    if matches!(a.label, AtomLabel::Entry(_)) {
                        *counts.entry(&a.label).or_default() += 1;
                    }
                }
                if counts.values().any(|&c| c > *limit) {
                    0.0
                } else {
                    1.0
                }
            }
            ValidityFilter::Custom { predicate, .. } => predicate(draw).clamp(0.0, 1.0),
        }
    }
}

/// Declarative filter form used in configuration documents.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterSpec {
    #[default]
    AcceptAll,
    AcceptProbability(f64),
    MaxRepeats(usize),
}

impl From<&FilterSpec> for ValidityFilter {
    fn from(s: &FilterSpec) -> Self {
        match s {
            FilterSpec::AcceptAll => ValidityFilter::AcceptAll,
            FilterSpec::AcceptProbability(p) => ValidityFilter::AcceptProbability(*p),
            FilterSpec::MaxRepeats(k) => ValidityFilter::MaxRepeats(*k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub method: TailMethod,
    pub threshold: f64,
    pub threshold_exact: String,
    pub alpha: f64,
    /// Accepted fraction of the null mass (or of the samples).
    pub beta: f64,
    pub filter: String,
    pub model_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combinations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One distinct cluster-RR value with its (filter-weighted) null mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub rr: Exact,
    pub probability: f64,
    /// Accepted mass of all RR values `<=` this one.
    pub cumulative: f64,
}

/// Exact null distribution of the cluster RR for one shape.
#[derive(Clone, Debug)]
pub struct RrDistribution {
    pub support: Vec<SupportPoint>,
    /// Σ of filter-weighted probabilities (the accepted fraction).
    pub accepted_mass: f64,
    /// Σ of unweighted probabilities; 1 up to rounding.
    pub raw_mass: f64,
    pub combinations: u64,
    key_index: HashMap<Vec<u16>, usize>,
}

impl RrDistribution {
    fn index_at_or_below(&self, t: &Exact) -> Option<usize> {
        let n = self.support.partition_point(|p| &p.rr <= t);
        n.checked_sub(1)
    }

    /// `P(RR <= t | accepted)`.
    pub fn tail(&self, t: &Exact) -> f64 {
        match self.index_at_or_below(t) {
            None => 0.0,
            Some(i) => self.alpha_at(i),
        }
    }

    pub fn alpha_at(&self, index: usize) -> f64 {
        if index + 1 == self.support.len() {
            1.0
        } else {
            (self.support[index].cumulative / self.accepted_mass).min(1.0)
        }
    }

    /// Tail values achievable as a statistic (one per support point).
    pub fn alpha_atoms(&self) -> Vec<f64> {
        (0..self.support.len()).map(|i| self.alpha_at(i)).collect()
    }

    /// Exact null probability that the tail statistic is `<= a`.
    pub fn tail_statistic_cdf(&self, a: f64) -> f64 {
        let atoms = self.alpha_atoms();
        let n = atoms.partition_point(|&x| x <= a);
        match n.checked_sub(1) {
            None => 0.0,
            Some(i) => atoms[i],
        }
    }

    pub(crate) fn support_index_of_key(&self, key: &[u16]) -> Option<usize> {
        self.key_index.get(key).copied()
    }
}

/// Per-shape null model: slot distributions plus bonus lookup tables.
#[derive(Clone, Debug)]
pub struct TailModel {
    pub shape: ConfigurationShape,
    pub male: SlotDistribution,
    pub female: SlotDistribution,
    pub bonuses: BonusPolicy,
    /// `edge_rules[e][father_atom][son_atom]` is the matching rule, if any.
    edge_rules: Vec<Vec<Option<usize>>>,
    male_rr: Vec<f64>,
    female_rr: Vec<f64>,
    male_p: Vec<f64>,
    female_p: Vec<f64>,
    divisor_f64: Vec<f64>,
}

impl TailModel {
    /// Builds slot distributions from lists.
    pub fn new(
        shape: ConfigurationShape,
        lists: &CandidateLists,
        lexicon: &Lexicon,
        bonuses: &BonusPolicy,
    ) -> Result<Self, TailError> {
        let male = slot_distribution(Gender::Male, &lists.male, lexicon)?;
        let female = slot_distribution(Gender::Female, &lists.female, lexicon)?;
        Self::from_distributions(shape, male, female, bonuses.clone())
    }

    pub fn from_distributions(
        shape: ConfigurationShape,
        male: SlotDistribution,
        female: SlotDistribution,
        bonuses: BonusPolicy,
    ) -> Result<Self, TailError> {
        shape.validate()?;
        bonuses.validate()?;
        for d in [&male, &female] {
            if d.atoms.is_empty() || d.total_probability() != Exact::one() {
                return Err(TailError::NegativeMass {
                    gender: d.gender,
                    detail: "slot distribution does not sum to 1".into(),
                });
            }
            if d.atoms.iter().any(|a| a.probability.is_negative() || a.rr.is_negative()) {
                return Err(TailError::NegativeMass {
                    gender: d.gender,
                    detail: "atoms need non-negative probability and non-negative RR".into(),
                });
            }
        }
        let pair_rule = |f: &Atom, s: &Atom| -> Option<usize> {
            if !matches!(f.label, AtomLabel::Entry(_)) || !matches!(s.label, AtomLabel::Entry(_)) {
                return None;
            }
            let (fg, fs) = (f.generic()?, f.specific_name()?);
            let (sg, ss) = (s.generic()?, s.specific_name()?);
            bonuses.rule_for((fg, fs), (sg, ss))
        };
        let rules_table: Vec<Option<usize>> = male
            .atoms
            .iter()
            .flat_map(|f| male.atoms.iter().map(move |s| (f, s)))
            .map(|(f, s)| pair_rule(f, s))
            .collect();
        let edge_rules = shape.edges.iter().map(|_| rules_table.clone()).collect();
        Ok(TailModel {
            male_rr: male.atoms.iter().map(|a| a.rr.to_f64()).collect(),
            female_rr: female.atoms.iter().map(|a| a.rr.to_f64()).collect(),
            male_p: male.atoms.iter().map(|a| a.probability.to_f64()).collect(),
            female_p: female.atoms.iter().map(|a| a.probability.to_f64()).collect(),
            divisor_f64: bonuses.rules.iter().map(|r| r.divisor.to_f64()).collect(),
            shape,
            male,
            female,
            bonuses,
            edge_rules,
        })
    }

    pub fn distribution(&self, gender: Gender) -> &SlotDistribution {
        match gender {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        }
    }

    /// Hash of everything the tail depends on except the filter.
    pub fn model_hash(&self) -> String {
        let doc = serde_json::json!({
            "shape": self.shape,
            "male": self.male,
            "female": self.female,
            "bonuses": self.bonuses,
        });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }

    fn slot_atom_count(&self, slot: usize) -> usize {
        if slot < self.shape.male_slots {
            self.male.atoms.len()
        } else {
            self.female.atoms.len()
        }
    }

    fn slot_atom(&self, slot: usize, atom: usize) -> &Atom {
        if slot < self.shape.male_slots {
            &self.male.atoms[atom]
        } else {
            &self.female.atoms[atom]
        }
    }

    fn rule_on_edge(&self, edge: usize, slots: &[usize]) -> Option<usize> {
        let (f, s) = self.shape.edges[edge];
        self.edge_rules[edge][slots[f] * self.male.atoms.len() + slots[s]]
    }

    /// Aggregation key: atom counts per gender, then rule code per edge.
    pub(crate) fn key_of(&self, slots: &[usize], key: &mut Vec<u16>) {
        key.clear();
        key.resize(self.male.atoms.len() + self.female.atoms.len() + self.shape.edges.len(), 0);
        let m = self.shape.male_slots;
        for (i, &a) in slots.iter().enumerate() {
            let idx = if i < m { a } else { self.male.atoms.len() + a };
            key[idx] += 1;
        }
        let base = self.male.atoms.len() + self.female.atoms.len();
        for e in 0..self.shape.edges.len() {
            key[base + e] = self.rule_on_edge(e, slots).map_or(0, |r| r as u16 + 1);
        }
    }

    fn key_rr(&self, key: &[u16]) -> Exact {
        let nm = self.male.atoms.len();
        let nf = self.female.atoms.len();
        let mut factors = Vec::new();
        for (i, &c) in key[..nm].iter().enumerate() {
            if c > 0 {
                factors.push(self.male.atoms[i].rr.pow(c as u32));
            }
        }
        for (i, &c) in key[nm..nm + nf].iter().enumerate() {
            if c > 0 {
                factors.push(self.female.atoms[i].rr.pow(c as u32));
            }
        }
        let product = Exact::product(factors.iter());
        let divisors = Exact::product(
            key[nm + nf..].iter().filter(|&&c| c > 0).map(|&c| &self.bonuses.rules[c as usize - 1].divisor),
        );
        product / divisors
    }

    /// Cluster RR of one slot assignment, in floating point.
    pub(crate) fn draw_rr_f64(&self, slots: &[usize]) -> f64 {
        let m = self.shape.male_slots;
        let mut rr = 1.0;
        for (i, &a) in slots.iter().enumerate() {
            rr *= if i < m { self.male_rr[a] } else { self.female_rr[a] };
        }
        for e in 0..self.shape.edges.len() {
            if let Some(r) = self.rule_on_edge(e, slots) {
                rr /= self.divisor_f64[r];
            }
        }
        rr
    }

    /// Cluster RR of one slot assignment, exactly.
    pub(crate) fn draw_rr_exact(&self, slots: &[usize]) -> Exact {
        let factors: Vec<&Exact> = slots.iter().enumerate().map(|(i, &a)| &self.slot_atom(i, a).rr).collect();
        let mut rr = Exact::product(factors);
        for e in 0..self.shape.edges.len() {
            if let Some(r) = self.rule_on_edge(e, slots) {
                rr = rr / self.bonuses.rules[r].divisor.clone();
            }
        }
        rr
    }

    fn draw_probability(&self, slots: &[usize]) -> f64 {
        let m = self.shape.male_slots;
        slots
            .iter()
            .enumerate()
            .map(|(i, &a)| if i < m { self.male_p[a] } else { self.female_p[a] })
            .product()
    }

    fn filter_weight(&self, filter: &ValidityFilter, slots: &[usize]) -> f64 {
        if filter.is_accept_all() {
            return 1.0;
        }
        let atoms: Vec<&Atom> = slots.iter().enumerate().map(|(i, &a)| self.slot_atom(i, a)).collect();
        filter.weight(&TombDraw { shape: &self.shape, atoms: &atoms })
    }

    /// Number of atom combinations over all slots.
    pub fn combinations(&self) -> BigUint {
        let mut n = BigUint::from(1u32);
        for slot in 0..self.shape.total_slots() {
            n *= BigUint::from(self.slot_atom_count(slot));
        }
        n
    }

    /// Exact enumeration of the null RR distribution.
    pub fn enumerate(&self, filter: &ValidityFilter, budget: u64) -> Result<RrDistribution, TailError> {
        filter.validate()?;
        let combos = self.combinations();
        let total: u64 = match u64::try_from(&combos) {
            Ok(n) if n <= budget => n,
            _ => return Err(TailError::BudgetExceeded { combinations: combos.to_string(), budget }),
        };
        let n_slots = self.shape.total_slots();
        let radices: Vec<usize> = (0..n_slots).map(|s| self.slot_atom_count(s)).collect();
        let chunks = total.div_ceil(ENUMERATION_CHUNK);

        type Partial = BTreeMap<Vec<u16>, (NeumaierSum, NeumaierSum)>;
        let partials: Vec<Partial> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * ENUMERATION_CHUNK;
                let end = (start + ENUMERATION_CHUNK).min(total);
                let mut slots = decode(start, &radices);
                let mut key = Vec::new();
                let mut acc: Partial = BTreeMap::new();
                for _ in start..end {
                    let p = self.draw_probability(&slots);
                    let w = self.filter_weight(filter, &slots);
                    self.key_of(&slots, &mut key);
                    let entry = match acc.get_mut(key.as_slice()) {
                        Some(e) => e,
                        None => acc.entry(key.clone()).or_default(),
                    };
                    entry.0 += p;
                    entry.1 += p * w;
                    increment(&mut slots, &radices);
                }
                acc
            })
            .collect();

        let mut merged: BTreeMap<Vec<u16>, (NeumaierSum, NeumaierSum)> = BTreeMap::new();
        for partial in partials {
            for (k, (raw, weighted)) in partial {
                let e = merged.entry(k).or_default();
                e.0.merge(&raw);
                e.1.merge(&weighted);
            }
        }

        let mut keyed: Vec<(Exact, Vec<u16>, f64, f64)> = merged
            .into_iter()
            .map(|(k, (raw, weighted))| (self.key_rr(&k), k, raw.value(), weighted.value()))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        let mut support: Vec<SupportPoint> = Vec::new();
        let mut key_index = HashMap::with_capacity(keyed.len());
        let mut raw_total = NeumaierSum::new();
        let mut cumulative = NeumaierSum::new();
        let mut point_mass = NeumaierSum::new();
        for (i, (rr, key, raw, weighted)) in keyed.iter().enumerate() {
            raw_total += *raw;
            cumulative += *weighted;
            point_mass += *weighted;
            key_index.insert(key.clone(), support.len());
            let last_of_value = keyed.get(i + 1).is_none_or(|next| &next.0 != rr);
            if last_of_value {
                support.push(SupportPoint {
                    rr: rr.clone(),
                    probability: point_mass.value(),
                    cumulative: cumulative.value(),
                });
                point_mass = NeumaierSum::new();
            }
        }
        let accepted_mass = cumulative.value();
        if accepted_mass.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(TailError::NothingAccepted);
        }
        Ok(RrDistribution { support, accepted_mass, raw_mass: raw_total.value(), combinations: total, key_index })
    }

    pub fn exact_tail(
        &self,
        threshold: &Exact,
        filter: &ValidityFilter,
        budget: u64,
    ) -> Result<TailResult, TailError> {
        let dist = self.enumerate(filter, budget)?;
        Ok(self.exact_result(&dist, threshold, filter))
    }

    /// Packages a tail lookup on an already enumerated distribution.
    pub fn exact_result(&self, dist: &RrDistribution, threshold: &Exact, filter: &ValidityFilter) -> TailResult {
        TailResult {
            method: TailMethod::Exact,
            threshold: threshold.to_f64(),
            threshold_exact: threshold.to_fraction_string(),
            alpha: dist.tail(threshold),
            beta: dist.accepted_mass.min(1.0),
            filter: filter.describe(),
            model_hash: self.model_hash(),
            combinations: Some(dist.combinations),
            support_size: Some(dist.support.len()),
            n_samples: None,
            accepted: None,
            hits: None,
            std_error: None,
            seed: None,
        }
    }

    pub(crate) fn samplers(&self) -> (WeightedIndex<f64>, WeightedIndex<f64>) {
        let sampler = |p: &[f64]| {
            WeightedIndex::new(p.iter().copied()).expect("slot distributions have positive total mass")
        };
        (sampler(&self.male_p), sampler(&self.female_p))
    }

    pub(crate) fn draw_into<R: Rng>(
        &self,
        rng: &mut R,
        samplers: &(WeightedIndex<f64>, WeightedIndex<f64>),
        slots: &mut [usize],
    ) {
        let m = self.shape.male_slots;
        for (i, s) in slots.iter_mut().enumerate() {
            *s = if i < m { samplers.0.sample(rng) } else { samplers.1.sample(rng) };
        }
    }

    /// Seeded Monte Carlo estimate of `P(RR <= t | accepted)`.
    pub fn mc_tail(
        &self,
        threshold: &Exact,
        filter: &ValidityFilter,
        n_samples: u64,
        seed: u64,
    ) -> Result<TailResult, TailError> {
        filter.validate()?;
        if n_samples == 0 {
            return Err(TailError::InvalidParameters("n_samples must be at least 1".into()));
        }
        let t = Threshold::new(threshold.clone());
        let samplers = self.samplers();
        let batches = n_samples.div_ceil(MC_BATCH);
        let (accepted, hits) = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                let n = MC_BATCH.min(n_samples - b * MC_BATCH);
                let mut slots = vec![0usize; self.shape.total_slots()];
                let (mut accepted, mut hits) = (0u64, 0u64);
                for _ in 0..n {
                    self.draw_into(&mut rng, &samplers, &mut slots);
                    if !filter.is_accept_all() {
                        let w = self.filter_weight(filter, &slots);
                        let u: f64 = rng.random();
                        if u >= w {
                            continue;
                        }
                    }
                    accepted += 1;
                    if t.admits(self.draw_rr_f64(&slots), || self.draw_rr_exact(&slots)) {
                        hits += 1;
                    }
                }
                (accepted, hits)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let alpha = if accepted == 0 { 0.0 } else { hits as f64 / accepted as f64 };
        Ok(TailResult {
            method: TailMethod::MonteCarlo,
            threshold: threshold.to_f64(),
            threshold_exact: threshold.to_fraction_string(),
            alpha,
            beta: accepted as f64 / n_samples as f64,
            filter: filter.describe(),
            model_hash: self.model_hash(),
            combinations: None,
            support_size: None,
            n_samples: Some(n_samples),
            accepted: Some(accepted),
            hits: Some(hits),
            std_error: Some(binomial_std_error(alpha, accepted)),
            seed: Some(seed),
        })
    }
}

fn decode(mut index: u64, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (slot, &r) in radices.iter().enumerate().rev() {
        out[slot] = (index % r as u64) as usize;
        index /= r as u64;
    }
    out
}

fn increment(slots: &mut [usize], radices: &[usize]) {
    for i in (0..slots.len()).rev() {
        slots[i] += 1;
        if slots[i] < radices[i] {
            return;
        }
        slots[i] = 0;
    }
}

pub fn exact_tail(
    shape: &ConfigurationShape,
    male: &SlotDistribution,
    female: &SlotDistribution,
    bonuses: &BonusPolicy,
    threshold: &Exact,
    filter: &ValidityFilter,
    budget: u64,
) -> Result<TailResult, TailError> {
    TailModel::from_distributions(shape.clone(), male.clone(), female.clone(), bonuses.clone())?
        .exact_tail(threshold, filter, budget)
}

#[allow(clippy::too_many_arguments)]
pub fn mc_tail(
    shape: &ConfigurationShape,
    lists: &CandidateLists,
    lexicon: &Lexicon,
    bonuses: &BonusPolicy,
    threshold: &Exact,
    filter: &ValidityFilter,
    n_samples: u64,
    seed: u64,
) -> Result<TailResult, TailError> {
    TailModel::new(shape.clone(), lists, lexicon, bonuses)?.mc_tail(threshold, filter, n_samples, seed)
}

/// Agreement of a Monte Carlo tail with the exact one, measured in binomial
/// standard errors under the exact value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub exact_alpha: f64,
    pub mc_alpha: f64,
    pub std_error: f64,
    pub z: f64,
    pub within_three_se: bool,
}

pub fn agreement(exact: &TailResult, mc: &TailResult) -> Agreement {
    let n = mc.accepted.unwrap_or(0);
    let se = binomial_std_error(exact.alpha, n);
    let diff = (mc.alpha - exact.alpha).abs();
    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Agreement { exact_alpha: exact.alpha, mc_alpha: mc.alpha, std_error: se, z, within_three_se: diff <= 3.0 * se }
}

/// Raw and validity-scaled numbers of person tuples filling a shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCount {
    pub raw_count: String,
    pub raw_count_f64: f64,
    pub valid_count: f64,
    pub beta: f64,
}

pub fn count_samples(
    population_male: u64,
    population_female: u64,
    shape: &ConfigurationShape,
    beta: f64,
) -> Result<SampleCount, TailError> {
    if population_male == 0 || population_female == 0 {
        return Err(TailError::InvalidParameters("populations must be at least 1".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(TailError::InvalidParameters(format!("beta {beta} outside (0, 1]")));
    }
    let raw = num_traits::pow(BigUint::from(population_male), shape.male_slots)
        * num_traits::pow(BigUint::from(population_female), shape.female_slots);
    let raw_f64 = num_traits::ToPrimitive::to_f64(&raw).unwrap_or(f64::INFINITY);
    Ok(SampleCount { raw_count: raw.to_string(), raw_count_f64: raw_f64, valid_count: beta * raw_f64, beta })
}
