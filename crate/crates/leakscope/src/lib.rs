//! Measure structural overlap ("leakage") between the training and test
//! sections of dependency treebanks.
//!
//! A dependency tree leaks from train into test when an isomorphic tree —
//! under a configurable label granularity — already occurs in the training
//! data. This crate provides:
//!
//! - [`conllu`]: CoNLL-U parsing, validation, serialization, and conversion
//!   of sentences into rooted dependency trees.
//! - [`graphcore`]: label-mode reductions, canonical forms for rooted labeled
//!   trees, and a brute-force isomorphism oracle.
//! - [`leakage`]: whole-tree and per-token subtree leakage between tree sets.
//! - [`stats`]: the size+leakage linear regression with cross-validated
//!   explained variance, MAE, and Spearman's rank correlation.
//! - [`sampling`]: leaky/non-leaky/random/diverse treebank samples,
//!   size control, and corpus statistics.
//! - [`surgery`]: counterfactual removal of modifier subtrees and
//!   construction counting.
//!
//! All randomized operations take an explicit seed and are deterministic
//! given identical inputs.

pub mod conllu;
pub mod graphcore;
pub mod leakage;
mod rng;
pub mod sampling;
pub mod stats;
pub mod surgery;

pub use conllu::{DepEdge, DepTree, Sentence, Token, Treebank};
pub use graphcore::{CanonicalForm, EquivalenceClass, LabelMode, ReducedTree};
pub use leakage::{LeakageReport, Level, SubtreeStyle, Weighting};
pub use sampling::{LeakageSplit, SampleSet, SampleSize, SplitSpec, TreebankStats};
pub use stats::{ManifestEntry, ManifestSeries, OlsOptions, RegressionResult};
pub use surgery::{SurgeryReport, SurgerySpec};
