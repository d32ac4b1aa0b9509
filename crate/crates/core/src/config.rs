//! The JSON analysis document: lexicon source, candidate lists, observed
//! configuration, bonus rules and per-command settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{subset_scenarios, Multiplicity, Scenario, ScenarioName, ScenarioPair};
use crate::numeric::Exact;
use crate::onomasticon::{Lexicon, Onomasticon, OnomasticonError, SupplementalFrequency};
use crate::rr_engine::{BonusPolicy, CandidateLists, RrError, TombConfiguration};
use crate::sensitivity::NamedModification;
use crate::tail_area::{FilterSpec, DEFAULT_BUDGET};
use crate::talpiot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error(transparent)]
    Lexicon(#[from] OnomasticonError),
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSection {
    /// CSV path, relative to the config file; absent means the shipped table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub supplemental: Vec<SupplementalFrequency>,
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}
fn default_mc_samples() -> u64 {
    1_000_000
}
fn default_seed() -> u64 {
    7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSection {
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for TailSection {
    fn default() -> Self {
        TailSection {
            filter: FilterSpec::default(),
            budget: DEFAULT_BUDGET,
            mc_samples: default_mc_samples(),
            seed: default_seed(),
        }
    }
}

/// A named tail proportion; without `value` it is the exact tail of the
/// configured analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaVariant {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Exact>,
}

pub const COMPUTED_ALPHA: &str = "exact_tail";

fn default_population_male() -> u64 {
    talpiot::POPULATION_MALE
}
fn default_population_female() -> u64 {
    talpiot::POPULATION_FEMALE
}
fn default_thetas() -> Vec<f64> {
    vec![1.0, 0.5, 0.1]
}
fn default_alpha_name() -> String {
    "quoted_reciprocal".into()
}
fn default_alpha_variants() -> Vec<AlphaVariant> {
    vec![
        AlphaVariant { name: "quoted_reciprocal".into(), value: Some(Exact::ratio(1, 1_821_000)) },
        AlphaVariant {
            name: "quoted_proportion".into(),
            value: Exact::from_decimal_f64(talpiot::QUOTED_TAIL_PROPORTION),
        },
        AlphaVariant { name: COMPUTED_ALPHA.into(), value: None },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    #[serde(default = "default_population_male")]
    pub population_male: u64,
    #[serde(default = "default_population_female")]
    pub population_female: u64,
    #[serde(default)]
    pub method: Multiplicity,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    /// Name of the variant used for the headline posterior.
    #[serde(default = "default_alpha_name")]
    pub alpha: String,
    #[serde(default = "default_alpha_variants")]
    pub alpha_variants: Vec<AlphaVariant>,
}

impl Default for InferenceSection {
    fn default() -> Self {
        InferenceSection {
            population_male: default_population_male(),
            population_female: default_population_female(),
            method: Multiplicity::default(),
            thetas: default_thetas(),
            alpha: default_alpha_name(),
            alpha_variants: default_alpha_variants(),
        }
    }
}

impl InferenceSection {
    pub fn variant(&self, name: &str) -> Option<&AlphaVariant> {
        self.alpha_variants.iter().find(|v| v.name == name)
    }
}

/// Every scenario holding `pair` plus a subset of `optional`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetScenarios {
    pub pair: ScenarioPair,
    pub optional: Vec<ScenarioName>,
}

fn default_prior() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_prior")]
    pub prior: f64,
    #[serde(default)]
    pub list: Vec<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<SubsetScenarios>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection { prior: default_prior(), list: Vec::new(), subsets: None }
    }
}

impl ScenarioSection {
    /// Explicit scenarios followed by generated subset scenarios.
    pub fn expanded(&self) -> Vec<Scenario> {
        let mut all = self.list.clone();
        if let Some(s) = &self.subsets {
            all.extend(subset_scenarios(&s.pair, &s.optional));
        }
        all
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    #[serde(default)]
    pub modifications: Vec<NamedModification>,
    /// Evaluate every variant's tail at the base cluster RR instead of its own.
    #[serde(default)]
    pub shared_threshold: bool,
}

fn default_n_tombs() -> u64 {
    1_000_000
}
fn default_true() -> bool {
    true
}
fn default_alpha_grid() -> Vec<f64> {
    vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_n_tombs")]
    pub n_tombs: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Names planted in H1 worlds; absent means the observed configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<TombConfiguration>,
    #[serde(default = "default_true")]
    pub rendition_sampling: bool,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    /// Also evaluate the scenario comparator on every simulated tomb.
    #[serde(default)]
    pub scenario_comparison: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            n_tombs: default_n_tombs(),
            seed: default_seed(),
            plant: None,
            rendition_sampling: true,
            alpha_grid: default_alpha_grid(),
            scenario_comparison: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub lexicon: LexiconSection,
    pub lists: CandidateLists,
    pub configuration: TombConfiguration,
    #[serde(default)]
    pub bonuses: BonusPolicy,
    #[serde(default)]
    pub tail: TailSection,
    #[serde(default)]
    pub inference: InferenceSection,
    #[serde(default)]
    pub scenarios: ScenarioSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: AnalysisConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// The shipped Talpiot analysis.
    pub fn talpiot() -> Self {
        Self::from_json(talpiot::CONFIG_JSON).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lists.validate()?;
        self.configuration.validate()?;
        self.bonuses.validate()?;
        let inf = &self.inference;
        if inf.variant(&inf.alpha).is_none() {
            return Err(ConfigError::Invalid(format!("inference.alpha names unknown variant {:?}", inf.alpha)));
        }
        for v in &inf.alpha_variants {
            if let Some(a) = &v.value {
                if a.is_negative() || *a > Exact::one() {
                    return Err(ConfigError::Invalid(format!("alpha variant {:?} outside [0, 1]", v.name)));
                }
            }
        }
        if inf.thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(ConfigError::Invalid("inference.thetas must lie in [0, 1]".into()));
        }
        if self.tail.mc_samples == 0 || self.simulation.n_tombs == 0 {
            return Err(ConfigError::Invalid("sample and tomb counts must be positive".into()));
        }
        if self.simulation.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(ConfigError::Invalid("simulation.alpha_grid must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A config document together with the file it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: AnalysisConfig,
    pub path: Option<PathBuf>,
    pub text: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(LoadedConfig { config: AnalysisConfig::from_json(&text)?, path: Some(path.to_path_buf()), text })
    }

    pub fn talpiot() -> Self {
        LoadedConfig { config: AnalysisConfig::talpiot(), path: None, text: talpiot::CONFIG_JSON.to_string() }
    }

    pub fn lexicon_path(&self) -> Option<PathBuf> {
        let rel = self.config.lexicon.path.as_ref()?;
        let base = self.path.as_ref().and_then(|p| p.parent()).unwrap_or(Path::new("."));
        Some(base.join(rel))
    }

    pub fn onomasticon(&self) -> Result<Onomasticon, ConfigError> {
        match self.lexicon_path() {
            None => Ok(talpiot::onomasticon()),
            Some(p) => Ok(Onomasticon::load_path(&p)?),
        }
    }
}

/// Lowercase hex SHA-256 of some bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Builds the lexicon a config describes on top of an onomasticon.
pub fn lexicon_for(config: &AnalysisConfig, onomasticon: &Onomasticon) -> Result<Lexicon, ConfigError> {
    Ok(Lexicon::with_supplements(onomasticon.clone(), &config.lexicon.supplemental)?)
}
