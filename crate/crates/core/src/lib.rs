//! RR-value analysis of name clusters: lexicon ingestion, cluster RR, exact
//! and Monte Carlo null tail areas, multiplicity-corrected posteriors,
//! sensitivity to the a priori provisos, and calibration by simulation.

pub mod calibration;
pub mod config;
pub mod inference;
pub mod numeric;
pub mod onomasticon;
pub mod rr_engine;
pub mod sensitivity;
pub mod tail_area;
pub mod talpiot;
