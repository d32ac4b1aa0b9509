//! Name-frequency lexicon: ingestion, validation and frequency queries.
//!
//! Data are kept as integer counts. Frequencies are computed on demand as
//! exact ratios, so rounded table values never enter a computation.
//!
//! CSV layout (header required):
//!
//! ```text
//! gender,generic,rendition,source,count
//! male,__TOTAL__,,all_sources,2509
//! male,Yoseph,,all_sources,221
//! male,Yoseph,__TOTAL__,ossuary,46
//! male,Yoseph,Yoseh,ossuary,7
//! ```
//!
//! A `__TOTAL__` generic is the person total for a `(gender, source)`; a
//! `__TOTAL__` rendition is the ossuary-source denominator for a generic's
//! renditions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::numeric::Exact;

pub const TOTAL_MARKER: &str = "__TOTAL__";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "male" | "m" | "M" => Ok(Gender::Male),
            "female" | "f" | "F" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    AllSources,
    Ossuary,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::AllSources => "all_sources",
            Source::Ossuary => "ossuary",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all_sources" | "all" => Ok(Source::AllSources),
            "ossuary" => Ok(Source::Ossuary),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// NFC-normalizes and trims a name so that equality is by code points.
pub fn normalize_name(name: &str) -> String {
    name.trim().nfc().collect()
}

/// One count row of the lexicon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameRecord {
    pub gender: Gender,
    pub generic: String,
    pub rendition: Option<String>,
    pub source: Source,
    pub count: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnomasticonError {
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: u64, key: String },
    #[error("line {line}: negative count {value}")]
    NegativeCount { line: u64, value: i64 },
    #[error("missing total: {0}")]
    MissingTotal(String),
    #[error("invalid total for {gender}/{origin}: totals must be strictly positive")]
    NonPositiveTotal { gender: Gender, origin: Source },
    #[error("count {count} for {key} exceeds its total {total}")]
    CountExceedsTotal { key: String, count: u64, total: u64 },
    #[error("rendition counts for {gender} {generic} sum to {sum}, above the denominator {denominator}")]
    RenditionsExceedDenominator { gender: Gender, generic: String, sum: u64, denominator: u64 },
    #[error("name not found: {gender} {name}")]
    NameNotFound { gender: Gender, name: String },
    #[error("no rendition denominator for {gender} {generic}")]
    MissingDenominator { gender: Gender, generic: String },
    #[error("conflicting frequency for {gender} {name}: already present in the lexicon")]
    SupplementConflict { gender: Gender, name: String },
    #[error("supplemental frequency for {gender} {name} must lie in (0, 1], got {value}")]
    InvalidSupplement { gender: Gender, name: String, value: f64 },
    #[error("i/o: {0}")]
    Io(String),
}

type RecordKey = (Gender, String, Option<String>, Source);

/// Validated, immutable name-frequency lexicon.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Onomasticon {
    records: BTreeMap<RecordKey, u64>,
    totals: BTreeMap<(Gender, Source), u64>,
    rendition_denominators: BTreeMap<(Gender, String), u64>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    gender: String,
    generic: String,
    rendition: String,
    source: String,
    count: String,
}

fn describe_key(key: &RecordKey) -> String {
    let (g, generic, rendition, source) = key;
    match rendition {
        Some(r) => format!("{g}/{generic}/{r}/{source}"),
        None => format!("{g}/{generic}/{source}"),
    }
}

impl Onomasticon {
    /// Reads and validates a lexicon CSV stream.
    pub fn load<R: Read>(reader: R) -> Result<Self, OnomasticonError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut onom = Onomasticon::default();
        let mut seen_total_rows: BTreeMap<(Gender, Source), u64> = BTreeMap::new();

        for (idx, row) in csv.deserialize::<RawRow>().enumerate() {
            let line = idx as u64 + 2;
            let row = row.map_err(|e| OnomasticonError::MalformedRow {
                line: e.position().map(|p| p.line()).unwrap_or(line),
                message: e.to_string(),
            })?;
            onom.ingest_row(line, row, &mut seen_total_rows)?;
        }

        onom.validate()?;
        Ok(onom)
    }

    pub fn load_str(text: &str) -> Result<Self, OnomasticonError> {
        Self::load(text.as_bytes())
    }

    pub fn load_path(path: &std::path::Path) -> Result<Self, OnomasticonError> {
        let file = std::fs::File::open(path)
            .map_err(|e| OnomasticonError::Io(format!("{}: {e}", path.display())))?;
        Self::load(std::io::BufReader::new(file))
    }

    fn ingest_row(
        &mut self,
        line: u64,
        row: RawRow,
        seen_totals: &mut BTreeMap<(Gender, Source), u64>,
    ) -> Result<(), OnomasticonError> {
        let malformed = |message: String| OnomasticonError::MalformedRow { line, message };
        let gender: Gender = row.gender.parse().map_err(malformed)?;
        let source: Source = row.source.parse().map_err(malformed)?;
        let count: i64 = row
            .count
            .trim()
            .parse()
            .map_err(|_| malformed(format!("count {:?} is not an integer", row.count)))?;
        if count < 0 {
            return Err(OnomasticonError::NegativeCount { line, value: count });
        }
        let count = count as u64;
        let generic = normalize_name(&row.generic);
        let rendition = normalize_name(&row.rendition);
        if generic.is_empty() {
            return Err(malformed("empty generic name".into()));
        }

        if generic == TOTAL_MARKER {
            if !rendition.is_empty() {
                return Err(malformed("total rows must leave the rendition empty".into()));
            }
            if seen_totals.insert((gender, source), count).is_some() {
                return Err(OnomasticonError::DuplicateKey {
                    line,
                    key: format!("{gender}/{TOTAL_MARKER}/{source}"),
                });
            }
            self.totals.insert((gender, source), count);
            return Ok(());
        }

        if rendition == TOTAL_MARKER {
            if source != Source::Ossuary {
                return Err(malformed("rendition denominators must use source=ossuary".into()));
            }
            let key = (gender, generic.clone());
            if self.rendition_denominators.insert(key, count).is_some() {
                return Err(OnomasticonError::DuplicateKey {
                    line,
                    key: format!("{gender}/{generic}/{TOTAL_MARKER}/ossuary"),
                });
            }
            return Ok(());
        }

        let rendition = (!rendition.is_empty()).then_some(rendition);
        let key: RecordKey = (gender, generic, rendition, source);
        if self.records.contains_key(&key) {
            return Err(OnomasticonError::DuplicateKey { line, key: describe_key(&key) });
        }
        self.records.insert(key, count);
        Ok(())
    }

    fn validate(&self) -> Result<(), OnomasticonError> {
        if self.totals.is_empty() {
            return Err(OnomasticonError::MissingTotal("no total rows present".into()));
        }
        for (&(gender, source), &total) in &self.totals {
            if total == 0 {
                return Err(OnomasticonError::NonPositiveTotal { gender, origin: source });
            }
        }
        for &(gender, ref generic) in self.rendition_denominators.keys() {
            if self.rendition_denominators[&(gender, generic.clone())] == 0 {
                return Err(OnomasticonError::NonPositiveTotal { gender, origin: Source::Ossuary });
            }
        }

        let mut rendition_sums: BTreeMap<(Gender, String), u64> = BTreeMap::new();
        for (key, &count) in &self.records {
            let (gender, generic, rendition, source) = key;
            match (rendition, source) {
                (Some(_), Source::Ossuary) => {
                    let denom_key = (*gender, generic.clone());
                    let Some(&denominator) = self.rendition_denominators.get(&denom_key) else {
                        return Err(OnomasticonError::MissingTotal(format!(
                            "rendition {} has no {TOTAL_MARKER} denominator row",
                            describe_key(key)
                        )));
                    };
                    if count > denominator {
                        return Err(OnomasticonError::CountExceedsTotal {
                            key: describe_key(key),
                            count,
                            total: denominator,
                        });
                    }
                    *rendition_sums.entry(denom_key).or_default() += count;
                }
                _ => {
                    let Some(&total) = self.totals.get(&(*gender, *source)) else {
                        return Err(OnomasticonError::MissingTotal(format!(
                            "{gender}/{source} is referenced by {} but has no total row",
                            describe_key(key)
                        )));
                    };
                    if count > total {
                        return Err(OnomasticonError::CountExceedsTotal {
                            key: describe_key(key),
                            count,
                            total,
                        });
                    }
                }
            }
        }
        for ((gender, generic), sum) in rendition_sums {
            let denominator = self.rendition_denominators[&(gender, generic.clone())];
            if sum > denominator {
                return Err(OnomasticonError::RenditionsExceedDenominator {
                    gender,
                    generic,
                    sum,
                    denominator,
                });
            }
        }
        Ok(())
    }

    pub fn total(&self, gender: Gender, source: Source) -> Option<u64> {
        self.totals.get(&(gender, source)).copied()
    }

    pub fn rendition_denominator(&self, gender: Gender, generic: &str) -> Option<u64> {
        self.rendition_denominators
            .get(&(gender, normalize_name(generic)))
            .copied()
    }

    pub fn generic_count(&self, gender: Gender, generic: &str) -> Option<u64> {
        self.records
            .get(&(gender, normalize_name(generic), None, Source::AllSources))
            .copied()
    }

    /// `count(generic, all sources) / total(gender, all sources)`.
    pub fn generic_frequency(&self, gender: Gender, generic: &str) -> Result<Exact, OnomasticonError> {
        let count = self.generic_count(gender, generic).ok_or_else(|| {
            OnomasticonError::NameNotFound { gender, name: normalize_name(generic) }
        })?;
        let total = self.total(gender, Source::AllSources).ok_or_else(|| {
            OnomasticonError::MissingTotal(format!("{gender}/all_sources"))
        })?;
        Ok(Exact::ratio(count, total))
    }

    /// Ossuary-source count of a rendition over its generic's ossuary denominator.
    pub fn rendition_frequency(
        &self,
        gender: Gender,
        generic: &str,
        rendition: &str,
    ) -> Result<Exact, OnomasticonError> {
        let generic = normalize_name(generic);
        let rendition = normalize_name(rendition);
        let denominator = self.rendition_denominator(gender, &generic).ok_or_else(|| {
            OnomasticonError::MissingDenominator { gender, generic: generic.clone() }
        })?;
        let count = self
            .records
            .get(&(gender, generic.clone(), Some(rendition.clone()), Source::Ossuary))
            .copied()
            .ok_or_else(|| OnomasticonError::NameNotFound {
                gender,
                name: format!("{generic}/{rendition}"),
            })?;
        Ok(Exact::ratio(count, denominator))
    }

    /// Generic names with an all-sources count, in sorted order.
    pub fn generics(&self, gender: Gender) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.records.iter().filter_map(move |((g, generic, rendition, source), &count)| {
            (*g == gender && rendition.is_none() && *source == Source::AllSources)
                .then_some((generic.as_str(), count))
        })
    }

    /// Ossuary-source renditions recorded for a generic.
    pub fn renditions<'a>(
        &'a self,
        gender: Gender,
        generic: &str,
    ) -> impl Iterator<Item = (&'a str, u64)> + 'a {
        let generic = normalize_name(generic);
        self.records.iter().filter_map(move |((g, gen, rendition, source), &count)| {
            match rendition {
                Some(r) if *g == gender && *gen == generic && *source == Source::Ossuary => {
                    Some((r.as_str(), count))
                }
                _ => None,
            }
        })
    }

    pub fn genders(&self) -> Vec<Gender> {
        let mut out: Vec<Gender> = self.totals.keys().map(|(g, _)| *g).collect();
        out.dedup();
        out
    }

    pub fn records(&self) -> Vec<NameRecord> {
        self.records
            .iter()
            .map(|((gender, generic, rendition, source), &count)| NameRecord {
                gender: *gender,
                generic: generic.clone(),
                rendition: rendition.clone(),
                source: *source,
                count,
            })
            .collect()
    }

    /// Writes the lexicon in the canonical CSV layout (deterministic order).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), OnomasticonError> {
        let io = |e: csv::Error| OnomasticonError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["gender", "generic", "rendition", "source", "count"]).map_err(io)?;
        for gender in Gender::ALL {
            for (&(g, source), total) in &self.totals {
                if g == gender {
                    w.write_record([g.as_str(), TOTAL_MARKER, "", source.as_str(), &total.to_string()])
                        .map_err(io)?;
                }
            }
            for ((g, generic), denom) in &self.rendition_denominators {
                if *g == gender {
                    w.write_record([g.as_str(), generic, TOTAL_MARKER, "ossuary", &denom.to_string()])
                        .map_err(io)?;
                }
            }
            for ((g, generic, rendition, source), count) in &self.records {
                if *g == gender {
                    w.write_record([
                        g.as_str(),
                        generic,
                        rendition.as_deref().unwrap_or(""),
                        source.as_str(),
                        &count.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| OnomasticonError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

/// A frequency supplied outside the count tables, or a name declared
/// relevant whose frequency is unknown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementalFrequency {
    pub gender: Gender,
    pub generic: String,
    /// Conditional frequency of this rendition within the generic, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rendition: Option<String>,
    /// `None` declares the name unquantified: it carries no mass under random
    /// draws and cannot be scored if observed.
    pub frequency: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Onomasticon plus frequencies supplied by configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    onomasticon: Onomasticon,
    supplemental: BTreeMap<(Gender, String, Option<String>), Option<Exact>>,
    notes: Vec<SupplementalFrequency>,
}

impl Lexicon {
    pub fn new(onomasticon: Onomasticon) -> Self {
        Lexicon { onomasticon, ..Default::default() }
    }

    pub fn with_supplements(
        onomasticon: Onomasticon,
        supplements: &[SupplementalFrequency],
    ) -> Result<Self, OnomasticonError> {
        let mut lex = Lexicon::new(onomasticon);
        for s in supplements {
            lex.add_supplement(s.clone())?;
        }
        Ok(lex)
    }

    pub fn add_supplement(&mut self, s: SupplementalFrequency) -> Result<(), OnomasticonError> {
        let generic = normalize_name(&s.generic);
        let rendition = s.rendition.as_deref().map(normalize_name);
        let name = match &rendition {
            Some(r) => format!("{generic}/{r}"),
            None => generic.clone(),
        };
        let in_lexicon = match &rendition {
            None => self.onomasticon.generic_count(s.gender, &generic).is_some(),
            Some(r) => self.onomasticon.rendition_frequency(s.gender, &generic, r).is_ok(),
        };
        let key = (s.gender, generic, rendition);
        if in_lexicon || self.supplemental.contains_key(&key) {
            return Err(OnomasticonError::SupplementConflict { gender: s.gender, name });
        }
        if let Some(f) = &s.frequency {
            if !f.is_positive() || *f > Exact::one() {
                return Err(OnomasticonError::InvalidSupplement {
                    gender: s.gender,
                    name,
                    value: f.to_f64(),
                });
            }
        }
        self.supplemental.insert(key, s.frequency.clone());
        self.notes.push(s);
        Ok(())
    }

    pub fn onomasticon(&self) -> &Onomasticon {
        &self.onomasticon
    }

    pub fn supplements(&self) -> &[SupplementalFrequency] {
        &self.notes
    }

    fn supplement(&self, gender: Gender, generic: &str, rendition: Option<&str>) -> Option<&Option<Exact>> {
        self.supplemental.get(&(
            gender,
            normalize_name(generic),
            rendition.map(normalize_name),
        ))
    }

    /// True when the name is declared relevant but has no frequency.
    pub fn is_unquantified(&self, gender: Gender, generic: &str, rendition: Option<&str>) -> bool {
        matches!(self.supplement(gender, generic, rendition), Some(None))
    }

    pub fn generic_frequency(&self, gender: Gender, generic: &str) -> Result<Exact, OnomasticonError> {
        match self.onomasticon.generic_frequency(gender, generic) {
            Err(OnomasticonError::NameNotFound { .. }) => match self.supplement(gender, generic, None) {
                Some(Some(f)) => Ok(f.clone()),
                _ => Err(OnomasticonError::NameNotFound { gender, name: normalize_name(generic) }),
            },
            other => other,
        }
    }

    pub fn rendition_frequency(
        &self,
        gender: Gender,
        generic: &str,
        rendition: &str,
    ) -> Result<Exact, OnomasticonError> {
        match self.onomasticon.rendition_frequency(gender, generic, rendition) {
            Err(err @ (OnomasticonError::NameNotFound { .. } | OnomasticonError::MissingDenominator { .. })) => {
                match self.supplement(gender, generic, Some(rendition)) {
                    Some(Some(f)) => Ok(f.clone()),
                    _ => Err(err),
                }
            }
            other => other,
        }
    }

    /// Hash over the canonical CSV and the supplements.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.onomasticon.to_csv_string().as_bytes());
        for ((g, generic, rendition), f) in &self.supplemental {
            h.update(format!(
                "\n{g},{generic},{},{}",
                rendition.as_deref().unwrap_or(""),
                f.as_ref().map(|f| f.to_fraction_string()).unwrap_or_else(|| "none".into())
            ));
        }
        hex::encode(h.finalize())
    }
}
