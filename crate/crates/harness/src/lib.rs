//! Experiment driver: correlated-source generators, end-to-end
//! protocol runs, lemma-checker batteries and CSV reporting.

pub mod config;
pub mod experiment;
pub mod lemmas;
pub mod model;
