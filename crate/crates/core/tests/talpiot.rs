use rrvalue_core::calibration::{operating_characteristics, Calibrator, WorldMode, WorldSpec};
use rrvalue_core::config::{AnalysisConfig, LoadedConfig};
use rrvalue_core::inference::{
    multiplicity_bound, posterior, scenario_posterior, trials_estimate, Multiplicity, Scenario, ScenarioName, ScenarioPair,
};
use rrvalue_core::numeric::Exact;
use rrvalue_core::onomasticon::{Gender, Onomasticon, OnomasticonError};
use rrvalue_core::rr_engine::{cluster_rr, BonusPolicy, CandidateEntry, SlotOutcome};
use rrvalue_core::sensitivity::{compare, compare_all, Modification};
use rrvalue_core::tail_area::{ConfigurationShape, TailModel, ValidityFilter, DEFAULT_BUDGET};
use rrvalue_core::talpiot;

fn r(n: u64, d: u64) -> Exact {
    Exact::ratio(n, d)
}

fn per_slot_oracle() -> Vec<Option<Exact>> {
    vec![
        Some(r(74, 317) * r(1, 44)),
        Some(r(74, 317) * r(13, 44)),
        Some(r(101, 2509)),
        Some(r(221, 2509)),
        Some(r(221, 2509) * r(7, 46)),
        Some(Exact::one()),
        None,
        None,
    ]
}

#[test]
fn per_slot_values_from_counts() {
    let b = cluster_rr(&talpiot::configuration(), &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses())
        .unwrap();
    let got: Vec<Option<Exact>> = b.per_slot.iter().map(|s| s.factor.clone()).collect();
    assert_eq!(got, per_slot_oracle());
    let shown: Vec<String> = b.per_slot.iter().filter_map(|s| s.factor.as_ref()).map(|f| format!("{:.4}", f.to_f64())).collect();
    assert_eq!(shown, ["0.0053", "0.0690", "0.0403", "0.0881", "0.0134", "1.0000"]);
    assert_eq!(b.per_slot[5].outcome, SlotOutcome::Other);
    assert_eq!(b.per_slot[6].outcome, SlotOutcome::Discarded);
}

#[test]
fn cluster_value_from_counts() {
    let b = cluster_rr(&talpiot::configuration(), &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses())
        .unwrap();
    let pre = Exact::product(per_slot_oracle().iter().flatten());
    assert_eq!(b.pre_bonus_rr, pre);
    assert_eq!(b.cluster_rr, pre.clone() * r(5, 6));
    assert_eq!(b.recompute(), b.cluster_rr);
    assert!((b.pre_bonus_rr.to_f64() / 1.74e-8 - 1.0).abs() < 0.01);
    assert!((b.cluster_rr.to_f64() / 1.45e-8 - 1.0).abs() < 0.01);
    let plain = cluster_rr(&talpiot::configuration(), &talpiot::lists(), &talpiot::lexicon(), &BonusPolicy::none())
        .unwrap();
    assert_eq!(plain.cluster_rr, pre);
}

/// Slot law written out from the counts, independent of the engine's atom
/// construction: (rr, probability, generic).
fn male_law() -> Vec<(Exact, Exact, &'static str)> {
    let yoseph = r(221, 2509);
    let yeshua = r(101, 2509);
    vec![
        (yoseph.clone(), yoseph.clone() * r(39, 46), "Yoseph"),
        (yoseph.clone() * r(7, 46), yoseph.clone() * r(7, 46), "Yoseph"),
        (yeshua.clone(), yeshua.clone(), "Yeshua"),
        (Exact::one(), Exact::one() - r(322, 2509), "other"),
    ]
}

fn female_law() -> Vec<(Exact, Exact)> {
    let mariam = r(74, 317);
    vec![
        (mariam.clone() * r(1, 44), mariam.clone() * r(1, 44)),
        (mariam.clone() * r(13, 44), mariam.clone() * r(13, 44)),
        (mariam.clone(), mariam.clone() * r(30, 44)),
        (Exact::one(), Exact::one() - mariam),
    ]
}

#[test]
fn exact_tail_matches_hand_enumeration() {
    let t = cluster_rr(&talpiot::configuration(), &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses())
        .unwrap()
        .cluster_rr;
    let (m, f) = (male_law(), female_law());
    let mut want = Exact::zero();
    let mut mass = Exact::zero();
    for a in &m {
        for b in &m {
            for c in &m {
                for d in &m {
                    for x in &f {
                        for y in &f {
                            let mut rr = Exact::product([&a.0, &b.0, &c.0, &d.0, &x.0, &y.0]);
                            if b.2 == "Yoseph" && a.2 == "Yeshua" {
                                rr = rr / r(6, 5);
                            }
                            let p = Exact::product([&a.1, &b.1, &c.1, &d.1, &x.1, &y.1]);
                            mass = mass + p.clone();
                            if rr <= t {
                                want = want + p;
                            }
                        }
                    }
                }
            }
        }
    }
    assert_eq!(mass, Exact::one());
    let model = TailModel::new(
        ConfigurationShape::of(&talpiot::configuration()),
        &talpiot::lists(),
        &talpiot::lexicon(),
        &talpiot::bonuses(),
    )
    .unwrap();
    let got = model.exact_tail(&t, &ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
    assert!((got.alpha / want.to_f64() - 1.0).abs() < 1e-12, "{} vs {}", got.alpha, want.to_f64());
    let ratio = got.alpha / talpiot::QUOTED_TAIL_PROPORTION;
    assert!((0.1..=10.0).contains(&ratio));
}

#[test]
fn posterior_chain_with_quoted_alpha() {
    let shape = ConfigurationShape::of(&talpiot::configuration());
    let n = trials_estimate(talpiot::POPULATION_MALE, talpiot::POPULATION_FEMALE, &shape).unwrap();
    assert_eq!(n, 1100);
    let q = multiplicity_bound(1.0 / 1_821_000.0, n, Multiplicity::UnionBound);
    assert!(((1.0 / q) / 1655.0 - 1.0).abs() < 0.005);
    for (theta, want) in [(1.0, 0.9994), (0.5, 0.9988), (0.1, 0.9940)] {
        assert!((posterior(theta, q).unwrap() - want).abs() <= 5e-4);
    }
}

#[test]
fn demoting_mariamene_and_dropping_the_bonus() {
    let base = AnalysisConfig::talpiot();
    let onom = talpiot::onomasticon();
    let demote = compare(
        &base,
        &onom,
        "m",
        &[Modification::DemoteToOther { gender: Gender::Female, entry: CandidateEntry::new("Mariam", Some("Mariamene")) }],
        false,
    )
    .unwrap();
    assert_eq!(demote.rr_ratio_exact, "6974/37");
    assert!((188.0..=189.0).contains(&demote.rr_ratio));
    let bonus = compare(
        &base,
        &onom,
        "b",
        &[Modification::RemoveBonus { father: "Yoseph".into(), son: "Yeshua".into() }],
        false,
    )
    .unwrap();
    assert_eq!(bonus.rr_ratio_exact, "6/5");
    let id = compare(&base, &onom, "id", &[], false).unwrap();
    assert_eq!(id.rr_ratio, 1.0);
    assert_eq!(id.alpha_ratio, Some(1.0));
}

#[test]
fn shipped_modifications_run_in_order() {
    let base = AnalysisConfig::talpiot();
    let reports =
        compare_all(&base, &talpiot::onomasticon(), &base.sensitivity.modifications, false).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["identity", "mariamene_as_other", "no_bonus", "ossuary_2_restored", "james_quantified"]);
    for rep in &reports[1..3] {
        assert!(rep.rr_ratio >= 1.0);
    }
}

#[test]
fn scenario_set_favours_the_observed_family() {
    let c = AnalysisConfig::talpiot();
    let s = scenario_posterior(&c.scenarios.expanded(), &c.configuration, &talpiot::lexicon(), &c.lists, 0.5)
        .unwrap();
    assert_eq!(s.scenarios.len(), 32);
    assert!(s.posterior > 0.5);
    let mut no_pair = c.configuration.clone();
    no_pair.edges.retain(|e| e.father != 3);
    let none = scenario_posterior(
        &[Scenario { name: "pair".into(), names: vec![], pairs: vec![ScenarioPair { father: ScenarioName::new(Gender::Male, "Yoseph", None), son: ScenarioName::new(Gender::Male, "Yeshua", None) }] }],
        &no_pair,
        &talpiot::lexicon(),
        &c.lists,
        0.5,
    )
    .unwrap();
    assert_eq!(none.posterior, 0.0);
}

#[test]
fn null_world_stays_below_nominal_rates() {
    let c = AnalysisConfig::talpiot();
    let shape = ConfigurationShape::of(&c.configuration);
    let cal = Calibrator::new(shape.clone(), &c.lists, &talpiot::lexicon(), &c.bonuses, &ValidityFilter::AcceptAll, DEFAULT_BUDGET)
        .unwrap();
    let h0 = cal.simulate(&WorldSpec { mode: WorldMode::H0Random, shape: shape.clone(), n_tombs: 50_000, seed: 5 }).unwrap();
    let h1 = cal
        .simulate(&WorldSpec {
            mode: WorldMode::H1Planted { plant: c.configuration.clone(), rendition_sampling: false },
            shape,
            n_tombs: 1000,
            seed: 5,
        })
        .unwrap();
    let grid = [1e-4, 1e-3, 1e-2, 0.1];
    let oc = operating_characteristics(&h0, &h1, &grid, &cal.distribution).unwrap();
    for row in &oc.rows {
        assert!(row.exact_fpr <= row.threshold);
        assert!(row.false_positive_rate <= row.threshold + 3.0 * row.fpr_std_error.max(1.0 / 50_000.0));
    }
    assert_eq!(oc.rows[1].detection_rate, 1.0);
}

#[test]
fn shipped_config_file_matches_defaults() {
    let loaded = LoadedConfig::talpiot();
    assert_eq!(loaded.config, AnalysisConfig::talpiot());
    assert_eq!(AnalysisConfig::from_json(&loaded.config.to_json()).unwrap(), loaded.config);
}

#[test]
fn malformed_lexicons_are_rejected() {
    let head = "gender,generic,rendition,source,count\n";
    let cases = [
        format!("{head}male,X,,all_sources,5\n"),
        format!("{head}male,__TOTAL__,,all_sources,10\nmale,X,,all_sources,-1\n"),
        format!("{head}male,__TOTAL__,,all_sources,10\nmale,X,,all_sources,11\n"),
        format!("{head}male,__TOTAL__,,all_sources,10\nmale,X,,all_sources,2\nmale,X,,all_sources,3\n"),
        format!("{head}male,__TOTAL__,,all_sources,10\nmale,X,Y,ossuary,3\n"),
        format!("{head}male,__TOTAL__,,all_sources,10\nmale,X,__TOTAL__,ossuary,4\nmale,X,Y,ossuary,3\nmale,X,Z,ossuary,3\n"),
        format!("{head}male,__TOTAL__,,all_sources,0\n"),
        format!("{head}person,X,,all_sources,1\n"),
    ];
    for text in &cases {
        let err: OnomasticonError = Onomasticon::load_str(text).unwrap_err();
        assert!(!err.to_string().is_empty());
    }
}

#[test]
fn all_other_cluster_is_one() {
    use rrvalue_core::rr_engine::{CandidateList, CandidateLists};
    let lists = CandidateLists { male: CandidateList::empty(Gender::Male), female: CandidateList::empty(Gender::Female) };
    let b = cluster_rr(&talpiot::configuration(), &lists, &talpiot::lexicon(), &talpiot::bonuses()).unwrap();
    assert_eq!(b.cluster_rr, Exact::one());
    assert!(b.bonus_factors.is_empty());
}
