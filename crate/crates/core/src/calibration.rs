//! Simulated worlds with known ground truth and the operating
//! characteristics of flagging a tomb by its exact tail value.

use std::collections::{BTreeSet, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{scenario_posterior, InferenceError, Scenario};
use crate::numeric::binomial_std_error;
use crate::onomasticon::{Gender, Lexicon};
use crate::rr_engine::{BonusPolicy, CandidateLists, Edge, Inscription, RrError, TombConfiguration};
use crate::tail_area::{
    AtomLabel, ConfigurationShape, RrDistribution, SlotDistribution, TailError, TailModel, ValidityFilter,
    MC_BATCH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("planted configuration does not fit the shape: {0}")]
    InconsistentPlant(String),
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WorldMode {
    H0Random,
    H1Planted { plant: TombConfiguration, rendition_sampling: bool },
}

impl WorldMode {
    fn stream_tag(&self) -> u64 {
        match self {
            WorldMode::H0Random => 0,
            WorldMode::H1Planted { .. } => 1 << 40,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WorldMode::H0Random => "h0_random",
            WorldMode::H1Planted { .. } => "h1_planted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(flatten)]
    pub mode: WorldMode,
    pub shape: ConfigurationShape,
    pub n_tombs: u64,
    pub seed: u64,
}

/// Null model and exact RR distribution for one shape, shared by runs.
pub struct Calibrator {
    pub model: TailModel,
    pub distribution: RrDistribution,
    lists: CandidateLists,
    lexicon: Lexicon,
}

/// Simulated tombs: per-slot atom indices (male slots, then female), cluster
/// RR and exact tail value.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRun {
    pub mode: String,
    pub seed: u64,
    pub n_tombs: u64,
    slots_per_tomb: usize,
    atoms: Vec<u16>,
    pub rr: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl SimulationRun {
    pub fn tomb_atoms(&self, i: usize) -> &[u16] {
        &self.atoms[i * self.slots_per_tomb..(i + 1) * self.slots_per_tomb]
    }

    /// Fraction of tombs whose tail value is at most `a`, as a count.
    pub fn flagged(&self, a: f64) -> u64 {
        self.alpha.iter().filter(|&&x| x <= a).count() as u64
    }
}

/// A sampled tomb rebuilt as a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTomb {
    pub configuration: TombConfiguration,
    pub cluster_rr: f64,
    pub alpha: f64,
}

const OTHER_NAME: &str = "(other)";

impl Calibrator {
    pub fn new(
        shape: ConfigurationShape,
        lists: &CandidateLists,
        lexicon: &Lexicon,
        bonuses: &BonusPolicy,
        filter: &ValidityFilter,
        budget: u64,
    ) -> Result<Self, CalibrationError> {
        let model = TailModel::new(shape, lists, lexicon, bonuses)?;
        let distribution = model.enumerate(filter, budget)?;
        Ok(Calibrator { model, distribution, lists: lists.clone(), lexicon: lexicon.clone() })
    }

    fn dist(&self, gender: Gender) -> &SlotDistribution {
        self.model.distribution(gender)
    }

    /// Slot assignment for a plant: its edges onto the shape's edges in
    /// order, then remaining persons onto free slots of their gender in order.
    fn plant_slots(&self, plant: &TombConfiguration) -> Result<Vec<Option<Inscription>>, CalibrationError> {
        plant.validate()?;
        let plant = plant.without_discarded();
        let shape = &self.model.shape;
        let mut slots: Vec<Option<Inscription>> = vec![None; shape.total_slots()];
        let mut used = vec![false; plant.inscriptions.len()];
        if plant.edges.len() > shape.edges.len() {
            return Err(CalibrationError::InconsistentPlant(format!(
                "{} father-son pairs but the shape has {}",
                plant.edges.len(),
                shape.edges.len()
            )));
        }
        for (Edge { father, son }, &(sf, ss)) in plant.edges.iter().zip(&shape.edges) {
            if slots[sf].is_some() || slots[ss].is_some() || used[*father] || used[*son] {
                return Err(CalibrationError::InconsistentPlant("planted pairs overlap".into()));
            }
            slots[sf] = Some(plant.inscriptions[*father].clone());
            slots[ss] = Some(plant.inscriptions[*son].clone());
            used[*father] = true;
            used[*son] = true;
        }
        for (i, insc) in plant.inscriptions.iter().enumerate() {
            if used[i] {
                continue;
            }
            let range = match insc.gender {
                Gender::Male => 0..shape.male_slots,
                Gender::Female => shape.male_slots..shape.total_slots(),
            };
            let free = range.into_iter().find(|&s| slots[s].is_none()).ok_or_else(|| {
                CalibrationError::InconsistentPlant(format!("no free {} slot for {insc}", insc.gender))
            })?;
            slots[free] = Some(insc.clone());
        }
        Ok(slots)
    }

    fn atom_of(&self, insc: &Inscription) -> Result<usize, CalibrationError> {
        self.dist(insc.gender).atom_for(insc, self.lists.get(insc.gender)).ok_or_else(|| {
            CalibrationError::InconsistentPlant(format!("{insc} has no frequency under the null model"))
        })
    }

    /// Atom distribution of one planted person.
    fn planted_sampler(&self, insc: &Inscription, rendition_sampling: bool) -> Result<(Vec<usize>, Vec<f64>), CalibrationError> {
        let onom = self.lexicon.onomasticon();
        let denominator = onom.rendition_denominator(insc.gender, &insc.generic);
        match denominator {
            Some(den) if rendition_sampling => {
                let mut atoms = Vec::new();
                let mut weights = Vec::new();
                let mut named = 0;
                for (r, count) in onom.renditions(insc.gender, &insc.generic) {
                    let person = Inscription::new(insc.gender, &insc.generic, Some(r));
                    atoms.push(self.atom_of(&person)?);
                    weights.push(count as f64 / den as f64);
                    named += count;
                }
                atoms.push(self.atom_of(&Inscription::new(insc.gender, &insc.generic, None))?);
                weights.push((den - named) as f64 / den as f64);
                Ok((atoms, weights))
            }
            _ => Ok((vec![self.atom_of(insc)?], vec![1.0])),
        }
    }

    pub fn simulate(&self, spec: &WorldSpec) -> Result<SimulationRun, CalibrationError> {
        if spec.n_tombs == 0 {
            return Err(CalibrationError::InvalidSpec("n_tombs must be at least 1".into()));
        }
        if spec.shape != self.model.shape {
            return Err(CalibrationError::InvalidSpec(format!(
                "spec shape {} differs from the calibrated shape {}",
                spec.shape, self.model.shape
            )));
        }
        let n_slots = self.model.shape.total_slots();
        let planted: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>> = match &spec.mode {
            WorldMode::H0Random => vec![None; n_slots],
            WorldMode::H1Planted { plant, rendition_sampling } => self
                .plant_slots(plant)?
                .into_iter()
                .map(|slot| {
                    slot.map(|insc| {
                        let (atoms, w) = self.planted_sampler(&insc, *rendition_sampling)?;
                        let sampler = WeightedIndex::new(w)
                            .map_err(|e| CalibrationError::InconsistentPlant(e.to_string()))?;
                        Ok((atoms, sampler))
                    })
                    .transpose()
                })
                .collect::<Result<_, CalibrationError>>()?,
        };
        let samplers = self.model.samplers();
        let batches = spec.n_tombs.div_ceil(MC_BATCH);
        let parts: Vec<(Vec<u16>, Vec<f64>, Vec<f64>)> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(spec.mode.stream_tag() | b);
                let n = MC_BATCH.min(spec.n_tombs - b * MC_BATCH) as usize;
                let mut slots = vec![0usize; n_slots];
                let mut key = Vec::new();
                let (mut atoms, mut rr, mut alpha) =
                    (Vec::with_capacity(n * n_slots), Vec::with_capacity(n), Vec::with_capacity(n));
                for _ in 0..n {
                    self.model.draw_into(&mut rng, &samplers, &mut slots);
                    for (s, p) in slots.iter_mut().zip(&planted) {
                        if let Some((choices, sampler)) = p {
                            *s = choices[sampler.sample(&mut rng)];
                        }
                    }
                    self.model.key_of(&slots, &mut key);
                    let idx = self.distribution.support_index_of_key(&key).expect("every key is enumerated");
                    atoms.extend(slots.iter().map(|&s| s as u16));
                    rr.push(self.distribution.support[idx].rr.to_f64());
                    alpha.push(self.distribution.alpha_at(idx));
                }
                (atoms, rr, alpha)
            })
            .collect();
        let mut run = SimulationRun {
            mode: spec.mode.name().into(),
            seed: spec.seed,
            n_tombs: spec.n_tombs,
            slots_per_tomb: n_slots,
            atoms: Vec::with_capacity(spec.n_tombs as usize * n_slots),
            rr: Vec::with_capacity(spec.n_tombs as usize),
            alpha: Vec::with_capacity(spec.n_tombs as usize),
        };
        for (a, r, al) in parts {
            run.atoms.extend(a);
            run.rr.extend(r);
            run.alpha.extend(al);
        }
        Ok(run)
    }

    fn person(&self, gender: Gender, atom: usize) -> Inscription {
        let d = self.dist(gender);
        match &d.atoms[atom].label {
            AtomLabel::Entry(e) => Inscription::new(gender, e.generic(), e.rendition()),
            AtomLabel::Other { generic: Some(g) } => {
                // Mass split from a listed generic belongs to its demoted renditions.
                let list = self.lists.get(gender);
                let demoted = list.demoted.iter().find(|e| e.generic() == g).and_then(|e| e.rendition());
                let generic_listed = list.entries.iter().any(|e| e.generic() == g && e.rendition().is_none());
                match (generic_listed, demoted) {
                    (true, Some(r)) => Inscription::new(gender, g, Some(r)),
                    (true, None) => Inscription::new(gender, g, Some(OTHER_NAME)),
                    _ => Inscription::new(gender, g, None),
                }
            }
            AtomLabel::Other { generic: None } => Inscription::new(gender, OTHER_NAME, None),
        }
    }

    /// Rebuilds slot atoms as a configuration (males first).
    pub fn configuration_of(&self, atoms: &[u16]) -> TombConfiguration {
        let m = self.model.shape.male_slots;
        let inscriptions = atoms
            .iter()
            .enumerate()
            .map(|(i, &a)| self.person(if i < m { Gender::Male } else { Gender::Female }, a as usize))
            .collect();
        let edges = self.model.shape.edges.iter().map(|&(f, s)| Edge { father: f, son: s }).collect();
        TombConfiguration { inscriptions, edges }
    }

    pub fn tomb(&self, run: &SimulationRun, i: usize) -> SimulatedTomb {
        SimulatedTomb { configuration: self.configuration_of(run.tomb_atoms(i)), cluster_rr: run.rr[i], alpha: run.alpha[i] }
    }

    /// Scenario posterior of every tomb, computed once per distinct atom vector.
    pub fn scenario_posteriors(
        &self,
        run: &SimulationRun,
        scenarios: &[Scenario],
        prior: f64,
    ) -> Result<Vec<f64>, CalibrationError> {
        let distinct: BTreeSet<&[u16]> = (0..run.n_tombs as usize).map(|i| run.tomb_atoms(i)).collect();
        let distinct: Vec<&[u16]> = distinct.into_iter().collect();
        let values: Vec<f64> = distinct
            .par_iter()
            .map(|atoms| {
                let config = self.configuration_of(atoms);
                match scenario_posterior(scenarios, &config, &self.lexicon, &self.lists, prior) {
                    Ok(p) => Ok(p.posterior),
                    Err(InferenceError::DegenerateInputs) => Ok(0.0),
                    Err(e) => Err(CalibrationError::from(e)),
                }
            })
            .collect::<Result<_, _>>()?;
        let cache: HashMap<&[u16], f64> = distinct.into_iter().zip(values).collect();
        Ok((0..run.n_tombs as usize).map(|i| cache[run.tomb_atoms(i)]).collect())
    }
}

pub fn simulate_worlds(
    spec: &WorldSpec,
    lists: &CandidateLists,
    lexicon: &Lexicon,
    bonuses: &BonusPolicy,
) -> Result<SimulationRun, CalibrationError> {
    Calibrator::new(spec.shape.clone(), lists, lexicon, bonuses, &ValidityFilter::AcceptAll, crate::tail_area::DEFAULT_BUDGET)?
        .simulate(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcRow {
    pub threshold: f64,
    pub h0_tombs: u64,
    pub h0_flagged: u64,
    pub false_positive_rate: f64,
    pub fpr_std_error: f64,
    /// `P(alpha <= threshold)` under the null, from exact enumeration.
    pub exact_fpr: f64,
    pub h1_tombs: u64,
    pub h1_flagged: u64,
    pub detection_rate: f64,
    pub detection_std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioComparison {
    pub prior: f64,
    pub h0_mean_posterior: f64,
    pub h1_mean_posterior: f64,
    /// Share of tombs whose scenario posterior exceeds one half.
    pub h0_above_half: f64,
    pub h1_above_half: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub rows: Vec<OcRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioComparison>,
}

pub fn operating_characteristics(
    h0: &SimulationRun,
    h1: &SimulationRun,
    alpha_grid: &[f64],
    exact: &RrDistribution,
) -> Result<OperatingCharacteristics, CalibrationError> {
    if h0.n_tombs == 0 || h1.n_tombs == 0 {
        return Err(CalibrationError::InvalidSpec("runs must be nonempty".into()));
    }
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (a0, a1) = (sorted(&h0.alpha), sorted(&h1.alpha));
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rows = grid
        .iter()
        .map(|&a| {
            let f0 = a0.partition_point(|&x| x <= a) as u64;
            let f1 = a1.partition_point(|&x| x <= a) as u64;
            let fpr = f0 as f64 / h0.n_tombs as f64;
            let det = f1 as f64 / h1.n_tombs as f64;
            OcRow {
                threshold: a,
                h0_tombs: h0.n_tombs,
                h0_flagged: f0,
                false_positive_rate: fpr,
                fpr_std_error: binomial_std_error(fpr, h0.n_tombs),
                exact_fpr: exact.tail_statistic_cdf(a),
                h1_tombs: h1.n_tombs,
                h1_flagged: f1,
                detection_rate: det,
                detection_std_error: binomial_std_error(det, h1.n_tombs),
            }
        })
        .collect();
    Ok(OperatingCharacteristics { rows, scenario: None })
}

pub fn scenario_comparison(prior: f64, h0: &[f64], h1: &[f64]) -> ScenarioComparison {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let above = |v: &[f64]| v.iter().filter(|&&p| p > 0.5).count() as f64 / v.len().max(1) as f64;
    ScenarioComparison {
        prior,
        h0_mean_posterior: mean(h0),
        h1_mean_posterior: mean(h1),
        h0_above_half: above(h0),
        h1_above_half: above(h1),
    }
}

pub fn oc_csv(rows: &[OcRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rr_engine::cluster_rr;
    use crate::talpiot;

    fn calibrator() -> Calibrator {
        Calibrator::new(
            ConfigurationShape::of(&talpiot::configuration()),
            &talpiot::lists(),
            &talpiot::lexicon(),
            &talpiot::bonuses(),
            &ValidityFilter::AcceptAll,
            crate::tail_area::DEFAULT_BUDGET,
        )
        .unwrap()
    }

    fn spec(mode: WorldMode, n: u64) -> WorldSpec {
        WorldSpec { mode, shape: ConfigurationShape::of(&talpiot::configuration()), n_tombs: n, seed: 3 }
    }

    #[test]
    fn fixed_plant_reproduces_cluster_rr() {
        let c = calibrator();
        let plant = talpiot::configuration();
        let run = c
            .simulate(&spec(WorldMode::H1Planted { plant: plant.clone(), rendition_sampling: false }, 1000))
            .unwrap();
        let want = cluster_rr(&plant, &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses()).unwrap().cluster_rr;
        let want_alpha = c.distribution.tail(&want);
        assert!(run.rr.iter().all(|&r| r == want.to_f64()));
        assert!(run.alpha.iter().all(|&a| a == want_alpha));
        let tomb = c.tomb(&run, 0);
        let again = cluster_rr(&tomb.configuration, &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses()).unwrap();
        assert_eq!(again.cluster_rr, want);
    }

    #[test]
    fn rendition_sampling_varies_planted_names() {
        let c = calibrator();
        let run = c
            .simulate(&spec(WorldMode::H1Planted { plant: talpiot::configuration(), rendition_sampling: true }, 5000))
            .unwrap();
        let distinct: BTreeSet<u64> = run.rr.iter().map(|r| r.to_bits()).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn oversized_plant_is_rejected() {
        let c = calibrator();
        let mut plant = talpiot::configuration();
        for i in plant.inscriptions.iter_mut() {
            i.discarded = false;
        }
        let err = c.simulate(&spec(WorldMode::H1Planted { plant, rendition_sampling: false }, 10)).unwrap_err();
        assert!(matches!(err, CalibrationError::InconsistentPlant(_)));
    }

    #[test]
    fn point_mass_world() {
        let shape = ConfigurationShape::new(2, 1, vec![]).unwrap();
        let c = Calibrator::new(shape.clone(), &CandidateLists::empty(), &talpiot::lexicon(), &BonusPolicy::none(), &ValidityFilter::AcceptAll, 1000).unwrap();
        let run = c.simulate(&WorldSpec { mode: WorldMode::H0Random, shape, n_tombs: 100, seed: 1 }).unwrap();
        assert!(run.alpha.iter().all(|&a| a == 1.0));
        assert!(run.rr.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn oc_extremes() {
        let c = calibrator();
        let h0 = c.simulate(&spec(WorldMode::H0Random, 20_000)).unwrap();
        let h1 = c.simulate(&spec(WorldMode::H1Planted { plant: talpiot::configuration(), rendition_sampling: true }, 2_000)).unwrap();
        let oc = operating_characteristics(&h0, &h1, &[0.0, 1e-3, 1.0], &c.distribution).unwrap();
        assert_eq!(oc.rows[0].false_positive_rate, 0.0);
        assert_eq!((oc.rows[2].false_positive_rate, oc.rows[2].detection_rate), (1.0, 1.0));
        for r in &oc.rows {
            assert!(r.exact_fpr <= r.threshold + 1e-12);
        }
    }

    #[test]
    fn deterministic_across_pools() {
        let c = calibrator();
        let s = spec(WorldMode::H0Random, 100_000);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| c.simulate(&s).unwrap());
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| c.simulate(&s).unwrap());
        assert_eq!(one, four);
    }
}
