//! Re-running the analysis under modified provisos and measuring what moves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{lexicon_for, AnalysisConfig, ConfigError};
use crate::inference::{multiplicity_bound, posterior, scenario_name_of, trials_estimate, InferenceError, Multiplicity};
use crate::numeric::Exact;
use crate::onomasticon::{normalize_name, Gender, Onomasticon};
use crate::rr_engine::{cluster_rr, CandidateEntry, RrError};
use crate::tail_area::{ConfigurationShape, TailError, TailModel, ValidityFilter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),
    #[error("invalid modification: {0}")]
    InvalidModification(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// One change to the provisos.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modification {
    /// Drop a listed entry and score that name as Other.
    DemoteToOther { gender: Gender, entry: CandidateEntry },
    /// List an entry; `frequency` supplies a lexicon frequency for a name the
    /// table lacks (or replaces an unquantified declaration).
    AddEntry {
        gender: Gender,
        entry: CandidateEntry,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequency: Option<Exact>,
    },
    RemoveBonus { father: String, son: String },
    /// Restore a discarded slot, by index or by ossuary label.
    Undiscard {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slot: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ossuary: Option<String>,
    },
    /// Change the factor for Other; both genders when `gender` is absent.
    SetOtherRr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gender: Option<Gender>,
        value: Exact,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedModification {
    pub name: String,
    #[serde(default)]
    pub changes: Vec<Modification>,
}

pub fn apply_modification(base: &AnalysisConfig, m: &Modification) -> Result<AnalysisConfig, SensitivityError> {
    let mut c = base.clone();
    match m {
        Modification::DemoteToOther { gender, entry } => {
            let list = c.lists.get_mut(*gender);
            let pos = list
                .entries
                .iter()
                .position(|e| e == entry)
                .ok_or_else(|| SensitivityError::UnresolvedReference(format!("{gender} list has no {entry}")))?;
            let e = list.entries.remove(pos);
            if !list.demoted.contains(&e) {
                list.demoted.push(e);
            }
            let name = scenario_name_of(*gender, entry);
            for s in c.scenarios.list.iter_mut() {
                s.names.retain(|n| n != &name);
            }
            if let Some(sub) = c.scenarios.subsets.as_mut() {
                sub.optional.retain(|n| n != &name);
            }
        }
        Modification::AddEntry { gender, entry, frequency } => {
            let list = c.lists.get_mut(*gender);
            let listed = list.entries.contains(entry);
            if listed && frequency.is_none() {
                return Err(SensitivityError::InvalidModification(format!("{entry} is already listed")));
            }
            list.demoted.retain(|e| e != entry);
            if !listed {
                list.entries.push(entry.clone());
            }
            if let Some(f) = frequency {
                let key = (normalize_name(entry.generic()), entry.rendition().map(normalize_name));
                let existing = c.lexicon.supplemental.iter_mut().find(|s| {
                    s.gender == *gender
                        && (normalize_name(&s.generic), s.rendition.as_deref().map(normalize_name)) == key
                });
                match existing {
                    Some(s) if s.frequency.is_some() => {
                        return Err(SensitivityError::InvalidModification(format!(
                            "{entry} already has a supplemental frequency"
                        )))
                    }
                    Some(s) => s.frequency = Some(f.clone()),
                    None => c.lexicon.supplemental.push(crate::onomasticon::SupplementalFrequency {
                        gender: *gender,
                        generic: entry.generic().to_string(),
                        rendition: entry.rendition().map(str::to_string),
                        frequency: Some(f.clone()),
                        note: Some("added by sensitivity modification".into()),
                    }),
                }
            }
        }
        Modification::RemoveBonus { father, son } => {
            let (father, son) = (normalize_name(father), normalize_name(son));
            let before = c.bonuses.rules.len();
            c.bonuses.rules.retain(|r| !(r.father_generic == father && r.son_generic == son));
            if c.bonuses.rules.len() == before {
                return Err(SensitivityError::UnresolvedReference(format!("no bonus rule {father}->{son}")));
            }
        }
        Modification::Undiscard { slot, ossuary } => {
            let targets: Vec<usize> = match (slot, ossuary) {
                (Some(i), None) => vec![*i],
                (None, Some(label)) => c
                    .configuration
                    .inscriptions
                    .iter()
                    .enumerate()
                    .filter(|(_, insc)| insc.ossuary.as_deref() == Some(label.as_str()))
                    .map(|(i, _)| i)
                    .collect(),
                _ => {
                    return Err(SensitivityError::InvalidModification(
                        "undiscard takes exactly one of slot or ossuary".into(),
                    ))
                }
            };
            let mut restored = 0;
            for i in targets {
                let insc = c.configuration.inscriptions.get_mut(i).ok_or_else(|| {
                    SensitivityError::UnresolvedReference(format!("slot {i} does not exist"))
                })?;
                if insc.discarded {
                    insc.discarded = false;
                    restored += 1;
                }
            }
            if restored == 0 {
                return Err(SensitivityError::UnresolvedReference(format!(
                    "no discarded slot matches {}",
                    slot.map(|s| s.to_string()).or(ossuary.clone()).unwrap_or_default()
                )));
            }
        }
        Modification::SetOtherRr { gender, value } => {
            if !value.is_positive() {
                return Err(SensitivityError::InvalidModification("other_rr must be positive".into()));
            }
            let genders = match gender {
                Some(g) => vec![*g],
                None => Gender::ALL.to_vec(),
            };
            for g in genders {
                c.lists.get_mut(g).other_rr = value.clone();
            }
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn apply_all(base: &AnalysisConfig, changes: &[Modification]) -> Result<AnalysisConfig, SensitivityError> {
    changes.iter().try_fold(base.clone(), |c, m| apply_modification(&c, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPosterior {
    pub theta: f64,
    pub posterior: f64,
}

/// Headline numbers of one analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub cluster_rr: f64,
    pub cluster_rr_exact: String,
    pub pre_bonus_rr: f64,
    pub threshold: f64,
    pub shape: String,
    pub alpha: f64,
    pub beta: f64,
    pub n_trials: u64,
    pub q: f64,
    pub posteriors: Vec<ThetaPosterior>,
}

/// Cluster RR, exact tail (at `threshold`, or at the cluster's own RR),
/// multiplicity bound and posteriors.
pub fn summarize(
    config: &AnalysisConfig,
    onomasticon: &Onomasticon,
    threshold: Option<&Exact>,
) -> Result<(AnalysisSummary, Exact), SensitivityError> {
    let lexicon = lexicon_for(config, onomasticon)?;
    let breakdown = cluster_rr(&config.configuration, &config.lists, &lexicon, &config.bonuses)?;
    let shape = ConfigurationShape::of(&config.configuration);
    let model = TailModel::new(shape.clone(), &config.lists, &lexicon, &config.bonuses)?;
    let t = threshold.unwrap_or(&breakdown.cluster_rr);
    let filter = ValidityFilter::from(&config.tail.filter);
    let tail = model.exact_tail(t, &filter, config.tail.budget)?;
    let inf = &config.inference;
    let n = trials_estimate(inf.population_male, inf.population_female, &shape)?;
    let q = multiplicity_bound(tail.alpha, n, inf.method);
    let posteriors = inf
        .thetas
        .iter()
        .map(|&theta| Ok(ThetaPosterior { theta, posterior: posterior(theta, q)? }))
        .collect::<Result<_, InferenceError>>()?;
    Ok((
        AnalysisSummary {
            cluster_rr: breakdown.cluster_rr.to_f64(),
            cluster_rr_exact: breakdown.cluster_rr.to_fraction_string(),
            pre_bonus_rr: breakdown.pre_bonus_rr.to_f64(),
            threshold: t.to_f64(),
            shape: shape.to_string(),
            alpha: tail.alpha,
            beta: tail.beta,
            n_trials: n,
            q,
            posteriors,
        },
        breakdown.cluster_rr,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Own,
    Shared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub name: String,
    pub changes: Vec<Modification>,
    pub threshold_mode: ThresholdMode,
    pub base: AnalysisSummary,
    pub modified: AnalysisSummary,
    pub rr_ratio: f64,
    pub rr_ratio_exact: String,
    pub alpha_ratio: Option<f64>,
    pub q_ratio: Option<f64>,
    pub narrative: String,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

fn build_report(
    name: &str,
    changes: &[Modification],
    mode: ThresholdMode,
    base: &(AnalysisSummary, Exact),
    modified: (AnalysisSummary, Exact),
) -> SensitivityReport {
    let rr_ratio = &modified.1 / &base.1;
    let alpha_ratio = ratio(modified.0.alpha, base.0.alpha);
    let fmt_ratio = |r: Option<f64>| r.map_or("undefined".to_string(), |r| format!("x{r:.4}"));
    let narrative = format!(
        "cluster RR x{:.4} ({:.4e} -> {:.4e}); alpha {} ({:.4e} -> {:.4e}); q {:.4e} -> {:.4e}",
        rr_ratio.to_f64(),
        base.0.cluster_rr,
        modified.0.cluster_rr,
        fmt_ratio(alpha_ratio),
        base.0.alpha,
        modified.0.alpha,
        base.0.q,
        modified.0.q,
    );
    SensitivityReport {
        name: name.to_string(),
        changes: changes.to_vec(),
        threshold_mode: mode,
        rr_ratio: rr_ratio.to_f64(),
        rr_ratio_exact: rr_ratio.to_fraction_string(),
        alpha_ratio,
        q_ratio: ratio(modified.0.q, base.0.q),
        base: base.0.clone(),
        modified: modified.0,
        narrative,
    }
}

/// Compares the base analysis with one modified by `changes`.
pub fn compare(
    base: &AnalysisConfig,
    onomasticon: &Onomasticon,
    name: &str,
    changes: &[Modification],
    shared_threshold: bool,
) -> Result<SensitivityReport, SensitivityError> {
    let base_summary = summarize(base, onomasticon, None)?;
    compare_with(base, &base_summary, onomasticon, name, changes, shared_threshold)
}

fn compare_with(
    base: &AnalysisConfig,
    base_summary: &(AnalysisSummary, Exact),
    onomasticon: &Onomasticon,
    name: &str,
    changes: &[Modification],
    shared_threshold: bool,
) -> Result<SensitivityReport, SensitivityError> {
    let modified = apply_all(base, changes)?;
    let (mode, threshold) = if shared_threshold {
        (ThresholdMode::Shared, Some(&base_summary.1))
    } else {
        (ThresholdMode::Own, None)
    };
    let mut summary = summarize(&modified, onomasticon, threshold)?;
    if shared_threshold {
        // The modified cluster's own RR is still what the ratio compares.
        let lexicon = lexicon_for(&modified, onomasticon)?;
        summary.1 = cluster_rr(&modified.configuration, &modified.lists, &lexicon, &modified.bonuses)?.cluster_rr;
    }
    Ok(build_report(name, changes, mode, base_summary, summary))
}

/// Evaluates every named modification against the base, in declared order.
pub fn compare_all(
    base: &AnalysisConfig,
    onomasticon: &Onomasticon,
    modifications: &[NamedModification],
    shared_threshold: bool,
) -> Result<Vec<SensitivityReport>, SensitivityError> {
    let base_summary = summarize(base, onomasticon, None)?;
    modifications
        .par_iter()
        .map(|m| compare_with(base, &base_summary, onomasticon, &m.name, &m.changes, shared_threshold))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub alpha: f64,
    pub theta: f64,
    pub n_trials: u64,
    pub q: f64,
    pub posterior: f64,
}

/// Posterior for every (alpha variant, theta) pair, variants outermost.
pub fn sweep(
    thetas: &[f64],
    alphas: &[(String, f64)],
    n_trials: u64,
    method: Multiplicity,
) -> Result<Vec<SweepRow>, SensitivityError> {
    if thetas.is_empty() || alphas.is_empty() {
        return Err(SensitivityError::InvalidModification("sweep grids must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(thetas.len() * alphas.len());
    for (variant, alpha) in alphas {
        if !(0.0..=1.0).contains(alpha) {
            return Err(InferenceError::InvalidInput(format!("alpha {alpha} outside [0, 1]")).into());
        }
        let q = multiplicity_bound(*alpha, n_trials, method);
        for &theta in thetas {
            rows.push(SweepRow {
                variant: variant.clone(),
                alpha: *alpha,
                theta,
                n_trials,
                q,
                posterior: posterior(theta, q)?,
            });
        }
    }
    Ok(rows)
}

/// Alpha variants of a config with the computed one filled in.
pub fn resolve_alphas(config: &AnalysisConfig, computed: f64) -> Vec<(String, f64)> {
    config
        .inference
        .alpha_variants
        .iter()
        .map(|v| (v.name.clone(), v.value.as_ref().map_or(computed, Exact::to_f64)))
        .collect()
}

pub fn reports_csv(reports: &[SensitivityReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "threshold_mode",
        "base_rr",
        "modified_rr",
        "rr_ratio",
        "rr_ratio_exact",
        "base_alpha",
        "modified_alpha",
        "alpha_ratio",
        "base_q",
        "modified_q",
        "modified_shape",
    ])
    .expect("in-memory write");
    for r in reports {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        w.write_record([
            r.name.clone(),
            format!("{:?}", r.threshold_mode).to_lowercase(),
            format!("{:e}", r.base.cluster_rr),
            format!("{:e}", r.modified.cluster_rr),
            format!("{:e}", r.rr_ratio),
            r.rr_ratio_exact.clone(),
            format!("{:e}", r.base.alpha),
            format!("{:e}", r.modified.alpha),
            opt(r.alpha_ratio),
            format!("{:e}", r.base.q),
            format!("{:e}", r.modified.q),
            r.modified.shape.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
