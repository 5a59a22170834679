//! Multi-label emotion classification for short social-media texts.
//!
//! The crate covers the whole experimental pipeline:
//!
//! * [`corpus`]: datasets, tweet-style preprocessing, fold plans and
//!   synthetic corpora.
//! * [`features`]: binary bag-of-words and averaged word-embedding vectors.
//! * [`labelsets`]: labelset enumeration, pruning, misclassification costs
//!   and imbalance statistics.
//! * [`nb`], [`ranksvm`], [`lstm`]: the three model families.
//! * [`metrics`]: Macro/Micro F-measures, confusion matrices and comparison
//!   statistics.
//! * [`harness`]: k-fold experiment orchestration and reporting.

pub mod corpus;
pub mod error;
pub mod features;
pub mod harness;
pub mod labelsets;
pub mod lstm;
pub mod metrics;
pub mod nb;
pub mod ranksvm;
pub mod rng;

pub use corpus::{Dataset, Document, FoldPlan, LabelLexicon, LabelVocabulary, Preprocessor};
pub use error::{Error, Result};
pub use features::{EmbeddingTable, FeatureVector, MinMaxNormalizer, Vocabulary};
pub use labelsets::{Labelset, LabelsetStats};
pub use metrics::EvalResult;

/// Index of a label inside a [`LabelVocabulary`].
pub type LabelId = usize;

/// The set of labels attached to one document, kept sorted.
pub type LabelSet = std::collections::BTreeSet<LabelId>;

/// Version string recorded in reports and serialized models.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
