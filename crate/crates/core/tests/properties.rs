mod common;

use common::{generic_name, rendition_name, world, World};
use proptest::prelude::*;

use rrvalue_core::inference::{multiplicity_bound, posterior, Multiplicity};
use rrvalue_core::numeric::Exact;
use rrvalue_core::onomasticon::{Gender, Lexicon, Onomasticon, SupplementalFrequency};
use rrvalue_core::rr_engine::{cluster_rr, Edge, Inscription, TombConfiguration};
use rrvalue_core::sensitivity::sweep;
use rrvalue_core::tail_area::{
    slot_distribution, ConfigurationShape, TailModel, ValidityFilter, DEFAULT_BUDGET,
};
use rrvalue_core::talpiot;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() }
}

/// A slot draw in a generated world: a generic, a rendition of the first
/// generic, or a name absent from the lexicon.
#[derive(Clone, Debug)]
enum Pick {
    Generic(usize),
    Rendition(usize),
    Stranger,
}

fn pick() -> impl Strategy<Value = Pick> {
    prop_oneof![
        (0usize..4).prop_map(Pick::Generic),
        (0usize..2).prop_map(Pick::Rendition),
        Just(Pick::Stranger),
    ]
}

fn inscription(w: &World, g: Gender, p: &Pick) -> Inscription {
    let c = w.counts(g);
    match p {
        Pick::Generic(i) if *i < c.generics.len() => Inscription::new(g, &generic_name(g, *i), None),
        Pick::Rendition(i) if *i < c.renditions.len() => {
            Inscription::new(g, &generic_name(g, 0), Some(&rendition_name(g, *i)))
        }
        _ => Inscription::new(g, "Stranger", None),
    }
}

/// Observed configuration of males then females with an optional 1 -> 0 edge.
fn observed(w: &World, males: &[Pick], females: &[Pick], edge: bool) -> TombConfiguration {
    let mut ins: Vec<Inscription> = males.iter().map(|p| inscription(w, Gender::Male, p)).collect();
    ins.extend(females.iter().map(|p| inscription(w, Gender::Female, p)));
    let edges = if edge && males.len() >= 2 { vec![Edge { father: 1, son: 0 }] } else { vec![] };
    TombConfiguration::new(ins, edges).unwrap()
}

fn rr_of(w: &World, c: &TombConfiguration) -> Exact {
    cluster_rr(c, &w.lists(), &w.lexicon(1), &w.bonuses()).unwrap().cluster_rr
}

fn shape_of(males: usize, females: usize, edge: bool) -> ConfigurationShape {
    let edges = if edge && males >= 2 { vec![(1, 0)] } else { vec![] };
    ConfigurationShape::new(males, females, edges).unwrap()
}

fn model(w: &World, shape: ConfigurationShape) -> TailModel {
    TailModel::new(shape, &w.lists(), &w.lexicon(1), &w.bonuses()).unwrap()
}

/// Brute-force exact tail over every slot assignment, in rational arithmetic.
fn oracle_tail(m: &TailModel, t: &Exact) -> Exact {
    let mut dists = vec![&m.male; m.shape.male_slots];
    dists.extend(vec![&m.female; m.shape.female_slots]);
    let mut idx = vec![0usize; dists.len()];
    let mut total = Exact::zero();
    loop {
        let atoms: Vec<_> = idx.iter().zip(&dists).map(|(&i, d)| &d.atoms[i]).collect();
        let mut rr = Exact::product(atoms.iter().map(|a| &a.rr));
        for &(f, s) in &m.shape.edges {
            if atoms[f].generic() == Some("M0") && atoms[s].generic() == Some("M1") && !m.bonuses.rules.is_empty() {
                rr = rr / Exact::ratio(6, 5);
            }
        }
        if &rr <= t {
            total = total + Exact::product(atoms.iter().map(|a| &a.probability));
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return total;
            }
            idx[k] += 1;
            if idx[k] < dists[k].atoms.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn slot_distribution_is_normalized(w in world()) {
        for g in Gender::ALL {
            let d = slot_distribution(g, &w.list(g), &w.lexicon(1)).unwrap();
            prop_assert_eq!(d.total_probability(), Exact::one());
            let approx: f64 = d.atoms.iter().map(|a| a.probability.to_f64()).sum();
            prop_assert!((approx - 1.0).abs() <= 1e-12);
            prop_assert!(d.atoms.iter().all(|a| !a.probability.is_negative()));
        }
    }

    #[test]
    fn exact_tail_matches_brute_force(
        w in world(), males in 1usize..=3, females in 0usize..=2, edge in any::<bool>(), pos in 0.0f64..1.0,
    ) {
        let m = model(&w, shape_of(males, females, edge));
        let dist = m.enumerate(&ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        let i = ((dist.support.len() - 1) as f64 * pos) as usize;
        let t = dist.support[i].rr.clone();
        let want = oracle_tail(&m, &t).to_f64();
        prop_assert!(close(dist.tail(&t), want, 1e-12), "{} vs {}", dist.tail(&t), want);
    }

    #[test]
    fn tail_is_monotone_in_threshold(
        w in world(), males in 1usize..=3, females in 0usize..=2, edge in any::<bool>(),
        a in 0.0f64..1.0, b in 0.0f64..1.0, jitter in 1u64..1000,
    ) {
        let m = model(&w, shape_of(males, females, edge));
        let dist = m.enumerate(&ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        let at = |x: f64| dist.support[((dist.support.len() - 1) as f64 * x) as usize].rr.clone();
        let (lo, hi) = if a <= b { (at(a), at(b)) } else { (at(b), at(a)) };
        let between = lo.clone() * Exact::ratio(1000 + jitter, 1000);
        prop_assert!(dist.tail(&lo) <= dist.tail(&hi));
        prop_assert!(dist.tail(&lo) <= dist.tail(&between));
        prop_assert!(dist.tail(&Exact::zero()) == 0.0);
        prop_assert!(dist.tail(&dist.support.last().unwrap().rr) == 1.0);
    }

    #[test]
    fn alpha_ignores_atom_order(
        w in world(), males in 1usize..=3, females in 0usize..=2, edge in any::<bool>(),
        seed in any::<u64>(), pos in 0.0f64..1.0,
    ) {
        let m = model(&w, shape_of(males, females, edge));
        let dist = m.enumerate(&ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        let t = dist.support[((dist.support.len() - 1) as f64 * pos) as usize].rr.clone();
        let shuffle = |mut atoms: Vec<_>, s: u64| {
            let n = atoms.len();
            let mut state = s | 1;
            for i in (1..n).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                atoms.swap(i, (state % (i as u64 + 1)) as usize);
            }
            atoms
        };
        let mut male = m.male.clone();
        let mut female = m.female.clone();
        male.atoms = shuffle(male.atoms, seed);
        female.atoms = shuffle(female.atoms, seed.rotate_left(17));
        let permuted = TailModel::from_distributions(m.shape.clone(), male, female, m.bonuses.clone()).unwrap();
        let other = permuted.enumerate(&ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        prop_assert!(close(dist.tail(&t), other.tail(&t), 1e-12));
        prop_assert_eq!(dist.support.len(), other.support.len());
    }

    #[test]
    fn count_scaling_changes_nothing(
        w in world(), k in 2u64..50, males in 1usize..=3, females in 0usize..=2, edge in any::<bool>(),
        mp in prop::collection::vec(pick(), 1..=3), fp in prop::collection::vec(pick(), 0..=2),
    ) {
        for g in Gender::ALL {
            let a = slot_distribution(g, &w.list(g), &w.lexicon(1)).unwrap();
            let b = slot_distribution(g, &w.list(g), &w.lexicon(k)).unwrap();
            prop_assert_eq!(a, b);
        }
        let obs = observed(&w, &mp, &fp, edge);
        let scaled = cluster_rr(&obs, &w.lists(), &w.lexicon(k), &w.bonuses()).unwrap().cluster_rr;
        prop_assert_eq!(rr_of(&w, &obs), scaled);

        let shape = shape_of(males, females, edge);
        let base = model(&w, shape.clone());
        let big = TailModel::new(shape, &w.lists(), &w.lexicon(k), &w.bonuses()).unwrap();
        prop_assert_eq!(base.model_hash(), big.model_hash());
        let t = base.enumerate(&ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap().support[0].rr.clone();
        let ra = base.exact_tail(&t, &ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        let rb = big.exact_tail(&t, &ValidityFilter::AcceptAll, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(ra.alpha, rb.alpha);
        let ma = base.mc_tail(&t, &ValidityFilter::AcceptAll, 2000, 11).unwrap();
        let mb = big.mc_tail(&t, &ValidityFilter::AcceptAll, 2000, 11).unwrap();
        prop_assert_eq!(ma.hits, mb.hits);
    }

    #[test]
    fn other_names_are_neutral(
        w in world(), mp in prop::collection::vec(pick(), 1..=3), fp in prop::collection::vec(pick(), 0..=2),
        edge in any::<bool>(), female in any::<bool>(), name in "[A-Z][a-z]{2,6}",
    ) {
        let obs = observed(&w, &mp, &fp, edge);
        let mut more = obs.clone();
        let g = if female { Gender::Female } else { Gender::Male };
        more.inscriptions.push(Inscription::new(g, &format!("X{name}"), None));
        prop_assert_eq!(rr_of(&w, &obs), rr_of(&w, &more));
    }

    #[test]
    fn discarding_equals_deleting(
        w in world(), mp in prop::collection::vec(pick(), 1..=3), fp in prop::collection::vec(pick(), 0..=2),
        edge in any::<bool>(), which in any::<prop::sample::Index>(),
    ) {
        let obs = observed(&w, &mp, &fp, edge);
        let i = which.index(obs.inscriptions.len());
        let mut discarded = obs.clone();
        discarded.inscriptions[i].discarded = true;
        let mut deleted = obs.clone();
        deleted.inscriptions.remove(i);
        deleted.edges = obs
            .edges
            .iter()
            .filter(|e| e.father != i && e.son != i)
            .map(|e| Edge {
                father: e.father - usize::from(e.father > i),
                son: e.son - usize::from(e.son > i),
            })
            .collect();
        prop_assert_eq!(rr_of(&w, &discarded), rr_of(&w, &deleted));
    }

    #[test]
    fn reordering_preserving_edges_keeps_rr(
        w in world(), mp in prop::collection::vec(pick(), 1..=3), fp in prop::collection::vec(pick(), 0..=2),
        edge in any::<bool>(), order in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let obs = observed(&w, &mp, &fp, edge);
        let n = obs.inscriptions.len();
        let order: Vec<usize> = order.into_iter().filter(|&i| i < n).collect();
        let mut new_pos = vec![0; n];
        for (p, &old) in order.iter().enumerate() {
            new_pos[old] = p;
        }
        let permuted = TombConfiguration::new(
            order.iter().map(|&i| obs.inscriptions[i].clone()).collect(),
            obs.edges.iter().map(|e| Edge { father: new_pos[e.father], son: new_pos[e.son] }).collect(),
        )
        .unwrap();
        prop_assert_eq!(rr_of(&w, &obs), rr_of(&w, &permuted));
    }

    #[test]
    fn talpiot_permutations_keep_rr(order in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
        let base = talpiot::configuration();
        let mut new_pos = [0; 8];
        for (p, &old) in order.iter().enumerate() {
            new_pos[old] = p;
        }
        let permuted = TombConfiguration::new(
            order.iter().map(|&i| base.inscriptions[i].clone()).collect(),
            base.edges.iter().map(|e| Edge { father: new_pos[e.father], son: new_pos[e.son] }).collect(),
        )
        .unwrap();
        let rr = |c: &TombConfiguration| {
            cluster_rr(c, &talpiot::lists(), &talpiot::lexicon(), &talpiot::bonuses()).unwrap().cluster_rr
        };
        prop_assert_eq!(rr(&base), rr(&permuted));
    }

    #[test]
    fn posterior_is_monotone(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, q1 in 1e-12f64..1.0, q2 in 1e-12f64..1.0) {
        let (tlo, thi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let (qlo, qhi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(posterior(tlo, q1).unwrap() <= posterior(thi, q1).unwrap());
        prop_assert!(posterior(t1, qlo).unwrap() >= posterior(t1, qhi).unwrap());
        prop_assert!((posterior(1.0, q1).unwrap() * (1.0 + q1) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn union_bound_dominates_complement(alpha in 0.0f64..=1.0, n in 1u64..10_000_000) {
        let union = multiplicity_bound(alpha, n, Multiplicity::UnionBound);
        let exact = multiplicity_bound(alpha, n, Multiplicity::ExactComplement);
        prop_assert!(union >= exact);
        prop_assert!((0.0..=1.0).contains(&exact));
    }

    #[test]
    fn sweep_is_monotone(
        thetas in prop::collection::vec(0.0f64..=1.0, 1..6), alphas in prop::collection::vec(1e-10f64..1e-3, 1..5),
        n in 1u64..5000,
    ) {
        let mut thetas = thetas;
        thetas.sort_by(f64::total_cmp);
        let mut alphas = alphas;
        alphas.sort_by(f64::total_cmp);
        let named: Vec<(String, f64)> = alphas.iter().enumerate().map(|(i, &a)| (format!("a{i}"), a)).collect();
        let rows = sweep(&thetas, &named, n, Multiplicity::UnionBound).unwrap();
        prop_assert_eq!(rows.len(), thetas.len() * alphas.len());
        for a in 0..alphas.len() {
            for t in 1..thetas.len() {
                let k = a * thetas.len() + t;
                prop_assert!(rows[k - 1].posterior <= rows[k].posterior);
            }
        }
        for t in 0..thetas.len() {
            for a in 1..alphas.len() {
                let k = a * thetas.len() + t;
                prop_assert!(rows[k - thetas.len()].posterior >= rows[k].posterior);
            }
        }
    }

    #[test]
    fn csv_round_trips(w in world(), k in 1u64..5) {
        let onom = w.onomasticon(k);
        let again = Onomasticon::load_str(&onom.to_csv_string()).unwrap();
        prop_assert_eq!(onom.content_hash(), again.content_hash());
        prop_assert_eq!(onom, again);
    }

    #[test]
    fn exact_values_round_trip_through_json(n in 0u64..u64::MAX, d in 1u64..u64::MAX) {
        let x = Exact::ratio(n, d);
        let text = serde_json::to_string(&x).unwrap();
        let back: Exact = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn swapped_trio_is_rarer(num in 1u64..505_000, scale in 1u64..4) {
        // The crossover sits at f_J = f(Yeshua) / 1.2 = 505/15054.
        let f = Exact::ratio(num, 15_054_000) * Exact::ratio(scale, scale);
        let (orig, swapped) = male_sides(f);
        prop_assert!(swapped < orig);
    }
}

fn male_sides(james: Exact) -> (Exact, Exact) {
    let lexicon = Lexicon::with_supplements(
        talpiot::onomasticon(),
        &[SupplementalFrequency {
            gender: Gender::Male,
            generic: "James".into(),
            rendition: None,
            frequency: Some(james),
            note: None,
        }],
    )
    .unwrap();
    let rr = |c: &TombConfiguration| {
        cluster_rr(c, &talpiot::lists(), &lexicon, &talpiot::bonuses()).unwrap().cluster_rr
    };
    (rr(&talpiot::male_configuration()), rr(&talpiot::swapped_male_configuration()))
}

#[test]
fn swapped_trio_example_value() {
    let (orig, swapped) = male_sides(Exact::ratio(18, 1000));
    // 0.013404 * 1 * 0.018 * 0.088083 and 0.040255 * 0.088083 * 0.013404 / 1.2
    assert!((swapped.to_f64() - 2.1252e-5).abs() < 1e-8);
    assert!((orig.to_f64() - 3.9607e-5).abs() < 1e-8);
}

#[test]
fn swapped_trio_crossover() {
    let crossover = Exact::ratio(101, 2509) / Exact::ratio(6, 5);
    assert_eq!(crossover, Exact::ratio(505, 15054));
    let (orig, swapped) = male_sides(crossover.clone());
    assert_eq!(orig, swapped);
    let (orig, swapped) = male_sides(Exact::ratio(335, 10_000));
    assert!(swapped < orig);
    let (orig, swapped) = male_sides(Exact::ratio(3359, 100_000));
    assert!(swapped > orig);
}

/// The invariant suites by name, for runners that report them one by one.
#[allow(dead_code)]
pub fn suites() -> Vec<(&'static str, fn())> {
    vec![
        ("slot-distribution normalization", slot_distribution_is_normalized),
        ("exact tail vs brute force", exact_tail_matches_brute_force),
        ("tail monotone in threshold", tail_is_monotone_in_threshold),
        ("alpha independent of atom order", alpha_ignores_atom_order),
        ("count-scaling invariance", count_scaling_changes_nothing),
        ("Other-neutrality", other_names_are_neutral),
        ("discard-neutrality", discarding_equals_deleting),
        ("permutation invariance", reordering_preserving_edges_keeps_rr),
        ("permutation invariance (Talpiot)", talpiot_permutations_keep_rr),
        ("posterior monotone in theta and q", posterior_is_monotone),
        ("union bound >= exact complement", union_bound_dominates_complement),
        ("sweep monotone", sweep_is_monotone),
        ("lexicon CSV round trip", csv_round_trips),
        ("exact JSON round trip", exact_values_round_trip_through_json),
    ]
}
