use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthSpec;
use crate::features::{DEFAULT_EMBEDDING_DIM, DEFAULT_MAX_TERMS, DEFAULT_MIN_DF};
use crate::labelsets::DEFAULT_PPT_MIN_COUNT;
use crate::lstm::{default_threshold_grid, AdamConfig, LstmConfig, DEFAULT_THRESHOLD};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Nb,
    RankSvmLp,
    RankSvmPpt,
    LstmAtt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Nb,
        ModelKind::RankSvmLp,
        ModelKind::RankSvmPpt,
        ModelKind::LstmAtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "NB",
            ModelKind::RankSvmLp => "RankSVM-LP",
            ModelKind::RankSvmPpt => "RankSVM-PPT",
            ModelKind::LstmAtt => "LSTM-Att",
        }
    }

    pub fn is_ranksvm(self) -> bool {
        matches!(self, ModelKind::RankSvmLp | ModelKind::RankSvmPpt)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model `{s}` (expected NB, RankSVM-LP, RankSVM-PPT or LSTM-Att)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureKind {
    Bow,
    We,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 2] = [FeatureKind::Bow, FeatureKind::We];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Bow => "BOW",
            FeatureKind::We => "WE",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!("unknown feature kind `{s}` (expected BOW or WE)"))
            })
    }
}

macro_rules! string_conversions {
    ($t:ty) => {
        impl TryFrom<String> for $t {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }

        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.name().to_string()
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

string_conversions!(ModelKind);
string_conversions!(FeatureKind);

/// A model trained on one feature kind, named like `RankSVM-LP-BOW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Experiment {
    pub model: ModelKind,
    pub feature: FeatureKind,
}

impl Experiment {
    pub fn new(model: ModelKind, feature: FeatureKind) -> Self {
        Experiment { model, feature }
    }

    pub fn name(self) -> String {
        format!("{}-{}", self.model.name(), self.feature.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (model, feature) = s.rsplit_once('-').ok_or_else(|| {
            Error::Config(format!("experiment `{s}` is not of the form MODEL-FEATURE"))
        })?;
        Ok(Experiment::new(model.parse()?, feature.parse()?))
    }
}

impl TryFrom<String> for Experiment {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> String {
        e.name()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Where a dataset comes from. Exactly one of `path`, `synthetic` and
/// `synthetic_path` must be set; file datasets also name their label
/// vocabulary, either a built-in one (`emotions9`, `emotions16`) or a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_path: Option<PathBuf>,
    /// Generator seed for synthetic datasets; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_embedding_dim")]
    pub dim: usize,
    /// Generate embeddings from each synthetic dataset's lexicons instead of
    /// reading a file; the value is the keyword spread around label centers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_spread: Option<f64>,
}

fn default_embedding_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyParams {
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
}

fn default_max_terms() -> usize {
    DEFAULT_MAX_TERMS
}

fn default_min_df() -> usize {
    DEFAULT_MIN_DF
}

impl Default for VocabularyParams {
    fn default() -> Self {
        VocabularyParams {
            max_terms: DEFAULT_MAX_TERMS,
            min_df: DEFAULT_MIN_DF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbParams {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub balanced: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            alpha: 1.0,
            balanced: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSvmParams {
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_ranksvm_epochs")]
    pub epochs: usize,
    #[serde(default = "default_ppt_min_count")]
    pub ppt_min_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_decay: Option<f64>,
}

fn default_c_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn default_ranksvm_epochs() -> usize {
    50
}

fn default_ppt_min_count() -> usize {
    DEFAULT_PPT_MIN_COUNT
}

impl Default for RankSvmParams {
    fn default() -> Self {
        RankSvmParams {
            c_grid: default_c_grid(),
            epochs: default_ranksvm_epochs(),
            ppt_min_count: DEFAULT_PPT_MIN_COUNT,
            t_decay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmParamsConfig {
    #[serde(default = "d64")]
    pub embedding_dim: usize,
    #[serde(default = "d64")]
    pub hidden: usize,
    #[serde(default = "d64")]
    pub attention_dim: usize,
    #[serde(default = "d4")]
    pub hops: usize,
    #[serde(default = "d32")]
    pub batch_size: usize,
    #[serde(default = "d30")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "d50")]
    pub max_len: usize,
    /// Prediction threshold used when tuning is off.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "yes")]
    pub tune_threshold: bool,
    #[serde(default = "default_threshold_grid")]
    pub threshold_grid: Vec<f64>,
}

fn d4() -> usize {
    4
}
fn d30() -> usize {
    30
}
fn d32() -> usize {
    32
}
fn d50() -> usize {
    50
}
fn d64() -> usize {
    64
}
fn default_lr() -> f64 {
    AdamConfig::default().learning_rate
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for LstmParamsConfig {
    fn default() -> Self {
        let base = LstmConfig::default();
        LstmParamsConfig {
            embedding_dim: base.embedding_dim,
            hidden: base.hidden,
            attention_dim: base.attention_dim,
            hops: base.hops,
            batch_size: base.batch_size,
            epochs: base.epochs,
            learning_rate: base.adam.learning_rate,
            max_len: base.max_len,
            threshold: base.threshold,
            tune_threshold: true,
            threshold_grid: default_threshold_grid(),
        }
    }
}

impl LstmParamsConfig {
    pub fn network_config(&self, seed: u64) -> LstmConfig {
        LstmConfig {
            embedding_dim: self.embedding_dim,
            hidden: self.hidden,
            attention_dim: self.attention_dim,
            hops: self.hops,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            threshold: self.threshold,
            max_len: self.max_len,
            seed,
        }
    }
}

/// Which datasets play the less and the more imbalanced role when the
/// comparison statistics are computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub smaller: String,
    pub larger: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Model × feature grid; ignored when `experiments` is given.
    #[serde(default = "all_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "all_features")]
    pub features: Vec<FeatureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<Vec<Experiment>>,
    /// Run the folds of a dataset on separate threads.
    #[serde(default = "yes")]
    pub parallel: bool,
    pub datasets: Vec<DatasetSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EmbeddingSource>,
    #[serde(default)]
    pub preprocess: PreprocessPaths,
    #[serde(default)]
    pub vocabulary: VocabularyParams,
    #[serde(default)]
    pub nb: NbParams,
    #[serde(default)]
    pub ranksvm: RankSvmParams,
    #[serde(default)]
    pub lstm: LstmParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

fn default_k() -> usize {
    5
}

fn default_validation_fraction() -> f64 {
    0.1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn all_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn all_features() -> Vec<FeatureKind> {
    FeatureKind::ALL.to_vec()
}

impl ExperimentConfig {
    /// A config over `datasets` with every default in place.
    pub fn new(datasets: Vec<DatasetSource>) -> Self {
        ExperimentConfig {
            seed: 0,
            k: default_k(),
            validation_fraction: default_validation_fraction(),
            output_dir: default_output_dir(),
            models: all_models(),
            features: all_features(),
            experiments: None,
            parallel: true,
            datasets,
            embeddings: None,
            preprocess: PreprocessPaths::default(),
            vocabulary: VocabularyParams::default(),
            nb: NbParams::default(),
            ranksvm: RankSvmParams::default(),
            lstm: LstmParamsConfig::default(),
            comparison: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            d.path.iter_mut().for_each(fix);
            d.labels_path.iter_mut().for_each(fix);
            d.synthetic_path.iter_mut().for_each(fix);
        }
        if let Some(e) = &mut self.embeddings {
            e.path.iter_mut().for_each(fix);
        }
        self.preprocess.lexicon.iter_mut().for_each(fix);
        self.preprocess.stopwords.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    /// Experiments to run, in report order.
    pub fn experiment_list(&self) -> Vec<Experiment> {
        match &self.experiments {
            Some(list) => list.clone(),
            None => self
                .models
                .iter()
                .flat_map(|&m| self.features.iter().map(move |&f| Experiment::new(m, f)))
                .collect(),
        }
    }

    pub fn needs_embeddings(&self) -> bool {
        self.experiment_list()
            .iter()
            .any(|e| e.feature == FeatureKind::We)
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            ));
        }
        let experiments = self.experiment_list();
        if experiments.is_empty() {
            return bad("no experiments requested".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &experiments {
            if !seen.insert(*e) {
                return bad(format!("experiment {e} listed twice"));
            }
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return bad(format!("dataset name `{}` used twice", d.name));
            }
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                return bad(format!("invalid dataset name `{}`", d.name));
            }
            let sources = [
                d.path.is_some(),
                d.synthetic.is_some(),
                d.synthetic_path.is_some(),
            ];
            if sources.iter().filter(|&&s| s).count() != 1 {
                return bad(format!(
                    "dataset `{}` needs exactly one of path, synthetic, synthetic_path",
                    d.name
                ));
            }
            if d.path.is_some() && d.labels.is_some() == d.labels_path.is_some() {
                return bad(format!(
                    "dataset `{}` needs exactly one of labels, labels_path",
                    d.name
                ));
            }
            if let Some(l) = &d.labels {
                if l != "emotions9" && l != "emotions16" {
                    return bad(format!("unknown built-in label set `{l}`"));
                }
            }
        }
        if let Some(c) = &self.comparison {
            for n in [&c.smaller, &c.larger] {
                if !names.contains(n.as_str()) {
                    return bad(format!("comparison names unknown dataset `{n}`"));
                }
            }
            if c.smaller == c.larger {
                return bad("comparison needs two different datasets".into());
            }
        }
        if self.needs_embeddings() {
            match &self.embeddings {
                None => {
                    return bad(
                        "word-embedding experiments requested but no [embeddings] given".into(),
                    )
                }
                Some(e) => {
                    if e.dim == 0 {
                        return bad("embedding dim must be positive".into());
                    }
                    if e.path.is_some() == e.synthetic_spread.is_some() {
                        return bad("embeddings need exactly one of path, synthetic_spread".into());
                    }
                    if e.synthetic_spread.is_some()
                        && self.datasets.iter().any(|d| d.path.is_some())
                    {
                        return bad("synthetic embeddings only work with synthetic datasets".into());
                    }
                }
            }
        }
        if self.vocabulary.max_terms == 0 || self.vocabulary.min_df == 0 {
            return bad("vocabulary max_terms and min_df must be positive".into());
        }
        if !(self.nb.alpha > 0.0) {
            return bad(format!("nb alpha must be positive, got {}", self.nb.alpha));
        }
        let r = &self.ranksvm;
        if r.c_grid.is_empty() || r.c_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("ranksvm c_grid must be non-empty and positive".into());
        }
        if r.epochs == 0 || r.ppt_min_count == 0 {
            return bad("ranksvm epochs and ppt_min_count must be positive".into());
        }
        let l = &self.lstm;
        if [
            l.embedding_dim,
            l.hidden,
            l.attention_dim,
            l.hops,
            l.batch_size,
            l.epochs,
            l.max_len,
        ]
        .contains(&0)
        {
            return bad("lstm sizes must be positive".into());
        }
        if !(l.learning_rate > 0.0) {
            return bad("lstm learning_rate must be positive".into());
        }
        let in_unit = |t: f64| t > 0.0 && t < 1.0;
        if !in_unit(l.threshold) || l.threshold_grid.iter().any(|&t| !in_unit(t)) {
            return bad("lstm thresholds must lie in (0, 1)".into());
        }
        if l.tune_threshold && l.threshold_grid.is_empty() {
            return bad("lstm threshold_grid is empty".into());
        }
        Ok(())
    }
}
