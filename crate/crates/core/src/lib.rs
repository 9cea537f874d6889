//! Predicting Myers-Briggs dichotomies from account footprints.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! * [`corpus`] ingests, labels, deduplicates and filters account records.
//! * [`textprep`] cleans and tokenizes text, counts emoji and estimates the
//!   English share of an account's posts.
//! * [`features`] turns records into a named, grouped feature matrix and
//!   reduces it with PCA.
//! * [`balance`] implements the class-imbalance treatments.
//! * [`learn`] holds the four binary classifiers.
//! * [`eval`] runs stratified cross-validation and computes joint accuracy
//!   and micro/macro AUC.
//! * [`inference`] is the feature-importance layer: Wald statistics,
//!   stepwise selection, Cramér's V, chi-squared group tests and Wilson
//!   intervals.
//! * [`pipeline`] wires the stages together and renders reports;
//!   [`synth`] generates seeded corpora with planted signal.

pub mod balance;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod inference;
pub mod learn;
pub mod mbti;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
pub use features::{FeatureGroup, FeatureMatrix};
pub use mbti::{Dichotomy, MbtiType};
