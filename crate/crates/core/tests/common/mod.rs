#![allow(dead_code)]

use proptest::prelude::*;

use rrvalue_core::numeric::Exact;
use rrvalue_core::onomasticon::{Gender, Lexicon, Onomasticon};
use rrvalue_core::rr_engine::{BonusPolicy, BonusRule, CandidateEntry, CandidateList, CandidateLists};

/// Counts for one gender: generic counts, spare mass, and renditions of the
/// first generic with their denominator.
#[derive(Clone, Debug)]
pub struct GenderCounts {
    pub generics: Vec<u64>,
    pub spare: u64,
    pub denominator: u64,
    pub renditions: Vec<u64>,
    pub listed: Vec<bool>,
    pub listed_renditions: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct World {
    pub male: GenderCounts,
    pub female: GenderCounts,
    pub bonus: bool,
}

pub fn generic_name(g: Gender, i: usize) -> String {
    match g {
        Gender::Male => format!("M{i}"),
        Gender::Female => format!("F{i}"),
    }
}

pub fn rendition_name(g: Gender, i: usize) -> String {
    format!("{}r{i}", generic_name(g, 0))
}

fn gender_counts(max_generics: usize) -> impl Strategy<Value = GenderCounts> {
    (
        prop::collection::vec(1u64..200, 1..=max_generics),
        0u64..300,
        1u64..60,
        prop::collection::vec(0u64..20, 0..=2),
        prop::collection::vec(any::<bool>(), max_generics),
        prop::collection::vec(any::<bool>(), 2),
    )
        .prop_map(|(generics, spare, denominator, renditions, listed, listed_renditions)| {
            let denominator = denominator.max(renditions.iter().sum());
            GenderCounts { generics, spare, denominator, renditions, listed, listed_renditions }
        })
}

pub fn world() -> impl Strategy<Value = World> {
    (gender_counts(4), gender_counts(3), any::<bool>()).prop_map(|(male, female, bonus)| World { male, female, bonus })
}

impl World {
    pub fn counts(&self, g: Gender) -> &GenderCounts {
        match g {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        }
    }

    /// Lexicon CSV with every count multiplied by `scale`.
    pub fn csv(&self, scale: u64) -> String {
        let mut out = String::from("gender,generic,rendition,source,count\n");
        for g in Gender::ALL {
            let c = self.counts(g);
            let total = c.generics.iter().sum::<u64>() + c.spare;
            out += &format!("{g},__TOTAL__,,all_sources,{}\n", total * scale);
            for (i, n) in c.generics.iter().enumerate() {
                out += &format!("{g},{},,all_sources,{}\n", generic_name(g, i), n * scale);
            }
            if !c.renditions.is_empty() {
                out += &format!("{g},{},__TOTAL__,ossuary,{}\n", generic_name(g, 0), c.denominator * scale);
                for (i, n) in c.renditions.iter().enumerate() {
                    out += &format!("{g},{},{},ossuary,{}\n", generic_name(g, 0), rendition_name(g, i), n * scale);
                }
            }
        }
        out
    }

    pub fn onomasticon(&self, scale: u64) -> Onomasticon {
        Onomasticon::load_str(&self.csv(scale)).expect("generated lexicon is valid")
    }

    pub fn lexicon(&self, scale: u64) -> Lexicon {
        Lexicon::new(self.onomasticon(scale))
    }

    pub fn list(&self, g: Gender) -> CandidateList {
        let c = self.counts(g);
        let mut entries = Vec::new();
        for i in 0..c.renditions.len() {
            if c.listed_renditions[i] {
                entries.push(CandidateEntry::new(&generic_name(g, 0), Some(&rendition_name(g, i))));
            }
        }
        for i in 0..c.generics.len() {
            if c.listed[i] {
                entries.push(CandidateEntry::new(&generic_name(g, i), None));
            }
        }
        CandidateList::new(g, entries).expect("generated list is valid")
    }

    pub fn lists(&self) -> CandidateLists {
        CandidateLists { male: self.list(Gender::Male), female: self.list(Gender::Female) }
    }

    pub fn bonuses(&self) -> BonusPolicy {
        if self.bonus && self.male.generics.len() >= 2 {
            BonusPolicy { rules: vec![BonusRule::new("M0", "M1", Exact::ratio(6, 5))], ..Default::default() }
        } else {
            BonusPolicy::none()
        }
    }
}
