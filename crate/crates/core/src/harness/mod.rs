//! k-fold experiment orchestration, configuration and reporting.
//!
//! A run loads and validates every input first, then for each dataset and
//! fold fits the vocabulary and embedding normalizer on the training split,
//! tunes each model on the validation split and scores it on the test split.

mod config;
mod report;
mod run;

pub use config::{
    Comparison, DatasetSource, EmbeddingSource, Experiment, ExperimentConfig, FeatureKind,
    LstmParamsConfig, ModelKind, NbParams, PreprocessPaths, RankSvmParams, VocabularyParams,
};
pub use report::{
    claims, derived_report, derived_statistics, emit_report, published_derived_report,
    published_rows, Claim, DatasetSummary, DerivedReport, DerivedStats, ExperimentReport,
    ExperimentResult, HistogramRow, Measure, Provenance, ReportFormat, ScoreRow, Summary, Tuning,
    PUBLISHED_CLAIMS, PUBLISHED_RESULTS,
};
pub use run::{
    experiment_seed, load_inputs, run_experiment, run_loaded, summarize_dataset, train_fold,
    Checkpoint, FeatureSpace, LoadedDataset, TrainedModel, CHECKPOINT_VERSION,
};
