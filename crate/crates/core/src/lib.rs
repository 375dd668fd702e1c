//! Building and auditing admissible machine-learning models.
//!
//! The crate estimates conditional mutual information with a boosted-tree
//! plug-in classifier, draws infograms that separate core and admissible
//! features from irrelevant, redundant or bias-carrying ones, runs ALFA
//! fairness tests, and fits compact models on the selected features.

pub mod error;
pub mod fairness;
pub mod fine;
pub mod infogram;
pub mod infotheory;
pub mod learner;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
pub use table::{Column, ColumnKind, Table, TaskSpec};
