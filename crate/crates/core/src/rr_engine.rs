//! Relevance-and-rareness (RR) values for single inscriptions and clusters.
//!
//! An inscription scores its generic name's relative frequency when the
//! generic is listed, the product of that frequency and the rendition's
//! ossuary-source frequency when the rendition is listed, and the list's
//! `other_rr` (1 by default) otherwise. A cluster multiplies the factors of
//! its non-discarded inscriptions and divides by a bonus for every
//! father–son edge matching a rule.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::Exact;
use crate::onomasticon::{normalize_name, Gender, Lexicon, OnomasticonError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrError {
    #[error(transparent)]
    Lexicon(#[from] OnomasticonError),
    #[error("invalid candidate list: {0}")]
    InvalidList(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid bonus rule: {0}")]
    InvalidBonus(String),
    #[error("inscription {0} is discarded and has no RR value")]
    Discarded(usize),
}

/// An a priori candidate: a generic name, or one rendition of it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "EntrySpec", into = "EntrySpec")]
pub enum CandidateEntry {
    Generic(String),
    Rendition { generic: String, rendition: String },
}

#[derive(Serialize, Deserialize)]
struct EntrySpec {
    generic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rendition: Option<String>,
}

impl From<EntrySpec> for CandidateEntry {
    fn from(s: EntrySpec) -> Self {
        CandidateEntry::new(&s.generic, s.rendition.as_deref())
    }
}

impl From<CandidateEntry> for EntrySpec {
    fn from(e: CandidateEntry) -> Self {
        match e {
            CandidateEntry::Generic(generic) => EntrySpec { generic, rendition: None },
            CandidateEntry::Rendition { generic, rendition } => {
                EntrySpec { generic, rendition: Some(rendition) }
            }
        }
    }
}

impl CandidateEntry {
    pub fn new(generic: &str, rendition: Option<&str>) -> Self {
        match rendition {
            Some(r) => CandidateEntry::Rendition {
                generic: normalize_name(generic),
                rendition: normalize_name(r),
            },
            None => CandidateEntry::Generic(normalize_name(generic)),
        }
    }

    pub fn generic(&self) -> &str {
        match self {
            CandidateEntry::Generic(g) => g,
            CandidateEntry::Rendition { generic, .. } => generic,
        }
    }

    pub fn rendition(&self) -> Option<&str> {
        match self {
            CandidateEntry::Generic(_) => None,
            CandidateEntry::Rendition { rendition, .. } => Some(rendition),
        }
    }
}

impl fmt::Display for CandidateEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateEntry::Generic(g) => f.write_str(g),
            CandidateEntry::Rendition { generic, rendition } => write!(f, "{rendition} ({generic})"),
        }
    }
}

fn default_other_rr() -> Exact {
    Exact::one()
}

/// Per-gender a priori list of candidates.
///
/// `demoted` holds names explicitly scored as Other even when a less specific
/// entry (their generic) is listed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateList {
    pub gender: Gender,
    pub entries: Vec<CandidateEntry>,
    #[serde(default = "default_other_rr")]
    pub other_rr: Exact,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demoted: Vec<CandidateEntry>,
}

impl CandidateList {
    pub fn new(gender: Gender, entries: Vec<CandidateEntry>) -> Result<Self, RrError> {
        let list = CandidateList { gender, entries, other_rr: Exact::one(), demoted: Vec::new() };
        list.validate()?;
        Ok(list)
    }

    pub fn empty(gender: Gender) -> Self {
        CandidateList { gender, entries: Vec::new(), other_rr: Exact::one(), demoted: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), RrError> {
        if !self.other_rr.is_positive() {
            return Err(RrError::InvalidList(format!(
                "{} list: other_rr must be positive",
                self.gender
            )));
        }
        let mut seen = BTreeSet::new();
        for e in self.entries.iter().chain(&self.demoted) {
            if e.generic().is_empty() || e.rendition() == Some("") {
                return Err(RrError::InvalidList(format!("{} list: empty name", self.gender)));
            }
            if !seen.insert(e) {
                return Err(RrError::InvalidList(format!(
                    "{} list: {e} appears more than once",
                    self.gender
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, entry: &CandidateEntry) -> bool {
        self.entries.contains(entry)
    }

    pub fn is_demoted(&self, entry: &CandidateEntry) -> bool {
        self.demoted.contains(entry)
    }
}

/// Candidate lists for both genders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLists {
    pub male: CandidateList,
    pub female: CandidateList,
}

impl CandidateLists {
    pub fn empty() -> Self {
        CandidateLists {
            male: CandidateList::empty(Gender::Male),
            female: CandidateList::empty(Gender::Female),
        }
    }

    pub fn get(&self, gender: Gender) -> &CandidateList {
        match gender {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        }
    }

    pub fn get_mut(&mut self, gender: Gender) -> &mut CandidateList {
        match gender {
            Gender::Male => &mut self.male,
            Gender::Female => &mut self.female,
        }
    }

    pub fn validate(&self) -> Result<(), RrError> {
        for g in Gender::ALL {
            let list = self.get(g);
            if list.gender != g {
                return Err(RrError::InvalidList(format!(
                    "list stored under {g} declares gender {}",
                    list.gender
                )));
            }
            list.validate()?;
        }
        Ok(())
    }
}

/// One inscribed person.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inscription {
    pub gender: Gender,
    pub generic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rendition: Option<String>,
    #[serde(default)]
    pub discarded: bool,
    /// Ossuary label, e.g. `#2`; shared by persons on one ossuary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ossuary: Option<String>,
    /// Inscription as read, for reports only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Inscription {
    pub fn new(gender: Gender, generic: &str, rendition: Option<&str>) -> Self {
        Inscription {
            gender,
            generic: normalize_name(generic),
            rendition: rendition.map(normalize_name),
            discarded: false,
            ossuary: None,
            text: None,
        }
    }

    pub fn male(generic: &str) -> Self {
        Self::new(Gender::Male, generic, None)
    }

    pub fn female(generic: &str) -> Self {
        Self::new(Gender::Female, generic, None)
    }

    pub fn with_rendition(mut self, rendition: &str) -> Self {
        self.rendition = Some(normalize_name(rendition));
        self
    }

    pub fn discarded(mut self) -> Self {
        self.discarded = true;
        self
    }

    pub fn on_ossuary(mut self, label: &str) -> Self {
        self.ossuary = Some(label.to_string());
        self
    }

    /// The most specific name: the rendition if inscribed, else the generic.
    pub fn specific_name(&self) -> &str {
        self.rendition.as_deref().unwrap_or(&self.generic)
    }
}

impl fmt::Display for Inscription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rendition {
            Some(r) => write!(f, "{r} ({})", self.generic),
            None => f.write_str(&self.generic),
        }
    }
}

/// A father–son relation between two inscriptions (indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub father: usize,
    pub son: usize,
}

/// The observed cluster.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TombConfiguration {
    pub inscriptions: Vec<Inscription>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl TombConfiguration {
    pub fn new(inscriptions: Vec<Inscription>, edges: Vec<Edge>) -> Result<Self, RrError> {
        let c = TombConfiguration { inscriptions, edges };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), RrError> {
        let n = self.inscriptions.len();
        let mut sons = BTreeSet::new();
        for e in &self.edges {
            if e.father >= n || e.son >= n {
                return Err(RrError::InvalidConfiguration(format!(
                    "edge {}->{} references a slot outside 0..{n}",
                    e.father, e.son
                )));
            }
            if e.father == e.son {
                return Err(RrError::InvalidConfiguration(format!(
                    "edge {}->{} links a slot to itself",
                    e.father, e.son
                )));
            }
            for idx in [e.father, e.son] {
                if self.inscriptions[idx].gender != Gender::Male {
                    return Err(RrError::InvalidConfiguration(format!(
                        "edge {}->{}: slot {idx} is not male",
                        e.father, e.son
                    )));
                }
            }
            if !sons.insert(e.son) {
                return Err(RrError::InvalidConfiguration(format!(
                    "slot {} is the son in more than one edge",
                    e.son
                )));
            }
        }
        for (i, insc) in self.inscriptions.iter().enumerate() {
            if insc.generic.is_empty() || insc.rendition.as_deref() == Some("") {
                return Err(RrError::InvalidConfiguration(format!("slot {i} has an empty name")));
            }
        }
        Ok(())
    }

    /// Edges whose endpoints are both kept (not discarded).
    pub fn active_edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| {
            !self.inscriptions[e.father].discarded && !self.inscriptions[e.son].discarded
        })
    }

    /// Copy without discarded inscriptions, edges re-indexed.
    pub fn without_discarded(&self) -> TombConfiguration {
        let mut remap = vec![None; self.inscriptions.len()];
        let mut kept = Vec::new();
        for (i, insc) in self.inscriptions.iter().enumerate() {
            if !insc.discarded {
                remap[i] = Some(kept.len());
                kept.push(insc.clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| Some(Edge { father: remap[e.father]?, son: remap[e.son]? }))
            .collect();
        TombConfiguration { inscriptions: kept, edges }
    }
}

/// How bonus rules compare names.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusLevel {
    /// Compare generic names; a Yoseh father counts as Yoseph.
    #[default]
    Generic,
    /// Compare the most specific inscribed name.
    Rendition,
}

fn default_divisor() -> Exact {
    Exact::ratio(6, 5)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BonusRule {
    pub father_generic: String,
    pub son_generic: String,
    #[serde(default = "default_divisor")]
    pub divisor: Exact,
}

impl BonusRule {
    pub fn new(father: &str, son: &str, divisor: Exact) -> Self {
        BonusRule {
            father_generic: normalize_name(father),
            son_generic: normalize_name(son),
            divisor,
        }
    }

    fn name_matches(&self, wanted: &str, insc_generic: &str, insc_specific: &str, level: BonusLevel) -> bool {
        let wanted = normalize_name(wanted);
        match level {
            BonusLevel::Generic => wanted == insc_generic,
            BonusLevel::Rendition => wanted == insc_specific,
        }
    }

    /// Whether a (father, son) pair of names triggers this rule.
    pub fn matches_names(
        &self,
        father: (&str, &str),
        son: (&str, &str),
        level: BonusLevel,
    ) -> bool {
        self.name_matches(&self.father_generic, father.0, father.1, level)
            && self.name_matches(&self.son_generic, son.0, son.1, level)
    }
}

/// Bonus rules plus matching policy.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BonusPolicy {
    #[serde(default)]
    pub rules: Vec<BonusRule>,
    #[serde(default)]
    pub level: BonusLevel,
    /// Permit divisors below 1 (bonuses that raise the RR).
    #[serde(default)]
    pub allow_penalties: bool,
}

impl BonusPolicy {
    pub fn none() -> Self {
        BonusPolicy::default()
    }

    pub fn validate(&self) -> Result<(), RrError> {
        for r in &self.rules {
            if !r.divisor.is_positive() {
                return Err(RrError::InvalidBonus(format!(
                    "{}->{}: divisor must be positive",
                    r.father_generic, r.son_generic
                )));
            }
            if !self.allow_penalties && r.divisor < Exact::one() {
                return Err(RrError::InvalidBonus(format!(
                    "{}->{}: divisor {} below 1 requires allow_penalties",
                    r.father_generic, r.son_generic, r.divisor
                )));
            }
        }
        Ok(())
    }

    /// Index of the first rule matching a father–son pair.
    pub fn rule_for(&self, father: (&str, &str), son: (&str, &str)) -> Option<usize> {
        self.rules.iter().position(|r| r.matches_names(father, son, self.level))
    }

    /// Generic names that rules refer to.
    pub fn generics(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .flat_map(|r| [normalize_name(&r.father_generic), normalize_name(&r.son_generic)])
            .collect()
    }
}

/// Result of matching an inscription against a list.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Match {
    Entry(CandidateEntry),
    Other,
}

/// Most specific match: a listed rendition beats its listed generic; a
/// demoted name is Other even if its generic is listed.
pub fn match_candidate(insc: &Inscription, list: &CandidateList) -> Match {
    debug_assert_eq!(insc.gender, list.gender, "inscription and list genders differ");
    if insc.gender != list.gender {
        return Match::Other;
    }
    if let Some(r) = &insc.rendition {
        let specific = CandidateEntry::new(&insc.generic, Some(r));
        if list.is_demoted(&specific) {
            return Match::Other;
        }
        if list.contains(&specific) {
            return Match::Entry(specific);
        }
    }
    let generic = CandidateEntry::new(&insc.generic, None);
    if list.is_demoted(&generic) {
        return Match::Other;
    }
    if list.contains(&generic) {
        return Match::Entry(generic);
    }
    Match::Other
}

/// RR factor of a matched entry.
pub fn entry_rr(gender: Gender, entry: &CandidateEntry, lexicon: &Lexicon) -> Result<Exact, RrError> {
    Ok(match entry {
        CandidateEntry::Generic(g) => lexicon.generic_frequency(gender, g)?,
        CandidateEntry::Rendition { generic, rendition } => {
            lexicon.generic_frequency(gender, generic)?
                * lexicon.rendition_frequency(gender, generic, rendition)?
        }
    })
}

pub fn rr_value(insc: &Inscription, list: &CandidateList, lexicon: &Lexicon) -> Result<Exact, RrError> {
    match match_candidate(insc, list) {
        Match::Entry(e) => entry_rr(insc.gender, &e, lexicon),
        Match::Other => Ok(list.other_rr.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "entry")]
pub enum SlotOutcome {
    Matched(CandidateEntry),
    Other,
    Discarded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFactor {
    pub index: usize,
    pub inscription: Inscription,
    pub outcome: SlotOutcome,
    pub factor: Option<Exact>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedBonus {
    pub rule: BonusRule,
    pub edge: Edge,
    pub divisor: Exact,
}

/// Every factor behind a cluster RR.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrBreakdown {
    pub per_slot: Vec<SlotFactor>,
    pub bonus_factors: Vec<AppliedBonus>,
    pub pre_bonus_rr: Exact,
    pub cluster_rr: Exact,
}

impl RrBreakdown {
    /// Recomputes the cluster RR from the listed factors.
    pub fn recompute(&self) -> Exact {
        let product = Exact::product(self.per_slot.iter().filter_map(|s| s.factor.as_ref()));
        let divisors = Exact::product(self.bonus_factors.iter().map(|b| &b.divisor));
        product / divisors
    }
}

pub fn cluster_rr(
    config: &TombConfiguration,
    lists: &CandidateLists,
    lexicon: &Lexicon,
    bonuses: &BonusPolicy,
) -> Result<RrBreakdown, RrError> {
    config.validate()?;
    lists.validate()?;
    bonuses.validate()?;

    let mut per_slot = Vec::with_capacity(config.inscriptions.len());
    for (index, insc) in config.inscriptions.iter().enumerate() {
        let (outcome, factor) = if insc.discarded {
            (SlotOutcome::Discarded, None)
        } else {
            let list = lists.get(insc.gender);
            match match_candidate(insc, list) {
                Match::Entry(e) => {
                    let f = entry_rr(insc.gender, &e, lexicon)?;
                    (SlotOutcome::Matched(e), Some(f))
                }
                Match::Other => (SlotOutcome::Other, Some(list.other_rr.clone())),
            }
        };
        per_slot.push(SlotFactor { index, inscription: insc.clone(), outcome, factor });
    }

    // Bonuses reward listed pairs only; an edge touching an Other slot stays neutral.
    let matched = |i: usize| matches!(per_slot[i].outcome, SlotOutcome::Matched(_));
    let mut bonus_factors = Vec::new();
    for edge in config.active_edges().filter(|e| matched(e.father) && matched(e.son)) {
        let father = &config.inscriptions[edge.father];
        let son = &config.inscriptions[edge.son];
        if let Some(i) = bonuses.rule_for(
            (&father.generic, father.specific_name()),
            (&son.generic, son.specific_name()),
        ) {
            let rule = bonuses.rules[i].clone();
            bonus_factors.push(AppliedBonus { divisor: rule.divisor.clone(), rule, edge: *edge });
        }
    }

    let pre_bonus_rr = Exact::product(per_slot.iter().filter_map(|s| s.factor.as_ref()));
    let divisors = Exact::product(bonus_factors.iter().map(|b| &b.divisor));
    let cluster_rr = &pre_bonus_rr / &divisors;
    Ok(RrBreakdown { per_slot, bonus_factors, pre_bonus_rr, cluster_rr })
}
