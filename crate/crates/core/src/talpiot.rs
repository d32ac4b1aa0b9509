//! The East Talpiot cluster and its stated provisos, as shipped defaults.
//!
//! James and Salome are listed candidates for whom the count table gives no
//! frequency; they are declared unquantified (no mass under random draws).
//! Supply a frequency through the config's `lexicon.supplemental` section to
//! change that.

use crate::numeric::Exact;
use crate::onomasticon::{Gender, Lexicon, Onomasticon, SupplementalFrequency};
use crate::rr_engine::{
    BonusPolicy, BonusRule, CandidateEntry, CandidateList, CandidateLists, Edge, Inscription,
    TombConfiguration,
};

pub const LEXICON_CSV: &str = include_str!("../data/talpiot_lexicon.csv");
pub const CONFIG_JSON: &str = include_str!("../data/talpiot.json");

/// Tail proportion quoted for the cluster, and its reciprocal form.
pub const QUOTED_TAIL_PROPORTION: f64 = 5.89e-7;
pub const QUOTED_TAIL_RECIPROCAL: f64 = 1.0 / 1_821_000.0;
/// Quoted valid-sample count `beta * n1^4 * n2^2`.
pub const QUOTED_VALID_SAMPLES: f64 = 1.981e12;
pub const QUOTED_BETA: f64 = 0.906;
pub const POPULATION_MALE: u64 = 4400;
pub const POPULATION_FEMALE: u64 = 2200;

pub fn onomasticon() -> Onomasticon {
    Onomasticon::load_str(LEXICON_CSV).expect("shipped lexicon is valid")
}

pub fn supplements() -> Vec<SupplementalFrequency> {
    vec![
        SupplementalFrequency {
            gender: Gender::Male,
            generic: "James".into(),
            rendition: None,
            frequency: None,
            note: Some("listed candidate; no count in the shipped table".into()),
        },
        SupplementalFrequency {
            gender: Gender::Female,
            generic: "Salome".into(),
            rendition: None,
            frequency: None,
            note: Some("listed candidate; no count in the shipped table".into()),
        },
    ]
}

pub fn lexicon() -> Lexicon {
    Lexicon::with_supplements(onomasticon(), &supplements()).expect("shipped supplements are valid")
}

pub fn lists() -> CandidateLists {
    CandidateLists {
        male: CandidateList::new(
            Gender::Male,
            vec![
                CandidateEntry::new("Yoseph", None),
                CandidateEntry::new("Yeshua", None),
                CandidateEntry::new("Yoseph", Some("Yoseh")),
                CandidateEntry::new("James", None),
            ],
        )
        .expect("valid list"),
        female: CandidateList::new(
            Gender::Female,
            vec![
                CandidateEntry::new("Mariam", Some("Mariamene")),
                CandidateEntry::new("Mariam", Some("Marya")),
                CandidateEntry::new("Mariam", None),
                CandidateEntry::new("Salome", None),
            ],
        )
        .expect("valid list"),
    }
}

pub fn bonuses() -> BonusPolicy {
    BonusPolicy {
        rules: vec![BonusRule::new("Yoseph", "Yeshua", Exact::ratio(6, 5))],
        ..Default::default()
    }
}

/// Slot order: #1 Mariamene, #6 Marya, #4 Yeshua son of Yoseph (two
/// persons), #5 Yoseh, #3 Matya, #2 Yehuda son of Yeshua (discarded).
pub fn configuration() -> TombConfiguration {
    let ins = |i: Inscription, ossuary: &str, text: &str| {
        let mut i = i.on_ossuary(ossuary);
        i.text = Some(text.to_string());
        i
    };
    TombConfiguration::new(
        vec![
            ins(Inscription::female("Mariam").with_rendition("Mariamene"), "#1", "Mariamene [η] Mara"),
            ins(Inscription::female("Mariam").with_rendition("Marya"), "#6", "Marya"),
            ins(Inscription::male("Yeshua"), "#4", "Yeshua son of Yoseph"),
            ins(Inscription::male("Yoseph"), "#4", "Yeshua son of Yoseph"),
            ins(Inscription::male("Yoseph").with_rendition("Yoseh"), "#5", "Yoseh"),
            ins(Inscription::male("Matya"), "#3", "Matya"),
            ins(Inscription::male("Yehuda").discarded(), "#2", "Yehuda son of Yeshua"),
            ins(Inscription::male("Yeshua").discarded(), "#2", "Yehuda son of Yeshua"),
        ],
        vec![Edge { father: 3, son: 2 }, Edge { father: 7, son: 6 }],
    )
    .expect("valid configuration")
}

/// The male slots of [`configuration`] on their own (Yeshua son of Yoseph,
/// Yoseh, Matya).
pub fn male_configuration() -> TombConfiguration {
    TombConfiguration::new(
        vec![
            Inscription::male("Yeshua"),
            Inscription::male("Yoseph"),
            Inscription::male("Yoseph").with_rendition("Yoseh"),
            Inscription::male("Matya"),
        ],
        vec![Edge { father: 1, son: 0 }],
    )
    .expect("valid configuration")
}

/// The male trio rearranged as Yoseh son of Matya, James and Yoseph.
pub fn swapped_male_configuration() -> TombConfiguration {
    TombConfiguration::new(
        vec![
            Inscription::male("Yoseph").with_rendition("Yoseh"),
            Inscription::male("Matya"),
            Inscription::male("James"),
            Inscription::male("Yoseph"),
        ],
        vec![Edge { father: 1, son: 0 }],
    )
    .expect("valid configuration")
}
