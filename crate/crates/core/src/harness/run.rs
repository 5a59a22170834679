use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, Experiment, ExperimentConfig, FeatureKind, ModelKind};
use super::report::{
    derived_report, DatasetSummary, ExperimentReport, ExperimentResult, HistogramRow, Provenance,
    ScoreRow, Summary, Tuning,
};
use crate::corpus::{
    generate_synthetic, split_folds, synthetic_embeddings, CleanReport, FoldSplit, SynthSpec,
};
use crate::labelsets::{enumerate_labelsets, label_imbalance, labelset_imbalance};
use crate::lstm::{
    pretrained_embedding, token_ids, train_lstm, tune_threshold, EmbeddingInit, LstmAttModel,
    Sequence,
};
use crate::metrics::{average_matrices, micro_fm, EvalResult};
use crate::nb::{train_nb_ova, NbConfig, NbModel};
use crate::ranksvm::{derive_costs, train_ranksvm, CostMode, RankSvmConfig, RankSvmModel};
use crate::{
    rng, Dataset, Document, EmbeddingTable, Error, FeatureVector, LabelLexicon, LabelSet,
    LabelVocabulary, MinMaxNormalizer, Preprocessor, Result, Vocabulary, TOOLKIT_VERSION,
};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A dataset ready for cross validation.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub cleaning: Option<CleanReport>,
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub synthetic_seed: Option<u64>,
}

impl ExperimentConfig {
    /// Built-in lexicon and stop words unless the config points elsewhere.
    pub fn preprocessor(&self) -> Result<Preprocessor> {
        let mut pre = Preprocessor::default();
        if let Some(p) = &self.preprocess.lexicon {
            pre.lexicon = LabelLexicon::load(p)?;
        }
        if let Some(p) = &self.preprocess.stopwords {
            pre.stopwords = crate::corpus::StopWords::load(p)?;
        }
        Ok(pre)
    }
}

fn synth_spec(source: &DatasetSource) -> Result<Option<SynthSpec>> {
    if let Some(spec) = &source.synthetic {
        return Ok(Some(spec.clone()));
    }
    match &source.synthetic_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(Some(SynthSpec::from_toml(&text)?))
        }
        None => Ok(None),
    }
}

fn label_vocabulary(source: &DatasetSource) -> Result<LabelVocabulary> {
    match (&source.labels, &source.labels_path) {
        (Some(name), _) if name == "emotions9" => Ok(LabelVocabulary::emotions9()),
        (Some(name), _) if name == "emotions16" => Ok(LabelVocabulary::emotions16()),
        (_, Some(path)) => LabelVocabulary::load(path),
        _ => Err(Error::Config(format!(
            "dataset `{}` has no label vocabulary",
            source.name
        ))),
    }
}

/// Validates the config and loads every dataset and embedding table, so that
/// missing or malformed inputs surface before any training starts.
pub fn load_inputs(config: &ExperimentConfig) -> Result<Vec<LoadedDataset>> {
    config.validate()?;
    let pre = config.preprocessor()?;
    let shared_table = match &config.embeddings {
        Some(e) if config.needs_embeddings() => match &e.path {
            Some(p) => Some(Arc::new(EmbeddingTable::load(p, e.dim)?)),
            None => None,
        },
        _ => None,
    };

    let mut loaded = Vec::with_capacity(config.datasets.len());
    for source in &config.datasets {
        let (mut dataset, cleaning, synthetic_seed, table) = match synth_spec(source)? {
            Some(spec) => {
                let seed = source.synthetic_seed.unwrap_or(config.seed);
                let data = generate_synthetic(&spec, seed)?;
                let table = match (&config.embeddings, config.needs_embeddings()) {
                    (Some(e), true) => match e.synthetic_spread {
                        Some(spread) => {
                            Some(Arc::new(synthetic_embeddings(&spec, e.dim, spread, seed)?))
                        }
                        None => shared_table.clone(),
                    },
                    _ => None,
                };
                (data, None, Some(seed), table)
            }
            None => {
                let path = source.path.as_ref().expect("validated");
                let data = Dataset::load(path, label_vocabulary(source)?)?;
                let (data, cleaning) = if data.is_preprocessed() {
                    (data, None)
                } else {
                    let (clean, report) = data.clean(&pre);
                    (clean, Some(report))
                };
                (data, cleaning, None, shared_table.clone())
            }
        };
        dataset.name = source.name.clone();
        if dataset.len() < config.k {
            return Err(Error::Config(format!(
                "dataset `{}` has {} documents, fewer than k = {}",
                source.name,
                dataset.len(),
                config.k
            )));
        }
        loaded.push(LoadedDataset {
            dataset,
            cleaning,
            embeddings: table,
            synthetic_seed,
        });
    }
    Ok(loaded)
}

/// Vocabulary and embedding normalizer fitted on one fold's training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub vocabulary: Vocabulary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<MinMaxNormalizer>,
}

impl FeatureSpace {
    pub fn fit(
        train: &[&Document],
        max_terms: usize,
        min_df: usize,
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<Self> {
        let vocabulary =
            Vocabulary::build(train.iter().map(|d| d.tokens.iter()), max_terms, min_df)?;
        if vocabulary.is_empty() {
            return Err(Error::Config(format!(
                "no term occurs in {min_df} or more training documents"
            )));
        }
        let normalizer = match embeddings {
            Some(table) => {
                let raw: Vec<FeatureVector> =
                    train.iter().map(|d| table.average(&d.tokens)).collect();
                Some(MinMaxNormalizer::fit(&raw)?)
            }
            None => None,
        };
        Ok(FeatureSpace {
            vocabulary,
            normalizer,
        })
    }

    pub fn vector(
        &self,
        doc: &Document,
        kind: FeatureKind,
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<FeatureVector> {
        match kind {
            FeatureKind::Bow => Ok(self.vocabulary.vectorize(&doc.tokens)),
            FeatureKind::We => {
                let table =
                    embeddings.ok_or_else(|| Error::Config("no embedding table loaded".into()))?;
                let normalizer = self.normalizer.as_ref().ok_or_else(|| {
                    Error::Config("feature space has no embedding normalizer".into())
                })?;
                normalizer.apply(&table.average(&doc.tokens))
            }
        }
    }

    pub fn token_ids(&self, doc: &Document, max_len: usize) -> Vec<usize> {
        token_ids(&doc.tokens, &self.vocabulary, max_len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model")]
pub enum TrainedModel {
    Nb(NbModel),
    RankSvm(RankSvmModel),
    Lstm(LstmAttModel),
}

/// Everything needed to score new documents with a model trained on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub toolkit_version: String,
    pub dataset: String,
    pub experiment: Experiment,
    pub fold: usize,
    pub label_names: Vec<String>,
    pub features: FeatureSpace,
    pub model: TrainedModel,
    pub tuning: Tuning,
}

impl Checkpoint {
    pub fn predict(&self, doc: &Document, embeddings: Option<&EmbeddingTable>) -> Result<LabelSet> {
        match &self.model {
            TrainedModel::Nb(m) => m.predict(&self.features.vector(
                doc,
                self.experiment.feature,
                embeddings,
            )?),
            TrainedModel::RankSvm(m) => m.predict(&self.features.vector(
                doc,
                self.experiment.feature,
                embeddings,
            )?),
            TrainedModel::Lstm(m) => m.predict(&self.features.token_ids(doc, m.config.max_len)),
        }
    }

    pub fn evaluate(
        &self,
        docs: &[&Document],
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<EvalResult> {
        let truth: Vec<LabelSet> = docs.iter().map(|d| d.labels.clone()).collect();
        let pred = docs
            .iter()
            .map(|d| self.predict(d, embeddings))
            .collect::<Result<Vec<_>>>()?;
        EvalResult::compute(&truth, &pred, self.label_names.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: c.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Seed of one experiment on one fold, derived from the run seed.
pub fn experiment_seed(seed: u64, fold: usize, experiment: Experiment) -> u64 {
    rng::stream_id(&[
        seed,
        fold as u64,
        experiment.model as u64,
        experiment.feature as u64,
    ])
}

struct FoldData<'a> {
    train: Vec<&'a Document>,
    validation: Vec<&'a Document>,
}

impl<'a> FoldData<'a> {
    fn new(dataset: &'a Dataset, split: &FoldSplit) -> Self {
        FoldData {
            train: dataset.subset(&split.train),
            validation: dataset.subset(&split.validation),
        }
    }
}

fn vectors(
    docs: &[&Document],
    space: &FeatureSpace,
    kind: FeatureKind,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<(FeatureVector, LabelSet)>> {
    docs.iter()
        .map(|d| Ok((space.vector(d, kind, embeddings)?, d.labels.clone())))
        .collect()
}

fn train_ranksvm_tuned(
    train: &[(FeatureVector, LabelSet)],
    train_docs: &[&Document],
    validation: &[(FeatureVector, LabelSet)],
    mode: CostMode,
    n_labels: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(RankSvmModel, Tuning)> {
    let ids: Vec<&str> = train_docs.iter().map(|d| d.id.as_str()).collect();
    let labels: Vec<&LabelSet> = train_docs.iter().map(|d| &d.labels).collect();
    let costs = derive_costs(&ids, &labels, mode)?;
    let kept: Vec<(FeatureVector, LabelSet)> =
        costs.kept.iter().map(|&i| train[i].clone()).collect();
    let truth: Vec<LabelSet> = validation.iter().map(|(_, l)| l.clone()).collect();

    let mut grid = config.ranksvm.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64, RankSvmModel)> = None;
    for c in grid {
        let svm_config = RankSvmConfig {
            c,
            epochs: config.ranksvm.epochs,
            seed,
            t_decay: config.ranksvm.t_decay,
        };
        let (mut model, _) = train_ranksvm(&kept, Some(&costs.costs), n_labels, svm_config)?;
        model.cost_mode = Some(mode);
        let pred = validation
            .iter()
            .map(|(x, _)| model.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let fm = micro_fm(&truth, &pred, n_labels)?;
        if best.as_ref().is_none_or(|(b, _, _)| fm > *b) {
            best = Some((fm, c, model));
        }
    }
    let (fm, c, model) = best.expect("non-empty grid");
    Ok((
        model,
        Tuning {
            c: Some(c),
            validation_micro_fm: Some(fm),
            ..Tuning::default()
        },
    ))
}

/// Trains one experiment on one fold of `dataset`. Only the fold's training
/// and validation documents are read.
pub fn train_fold(
    dataset: &Dataset,
    split: &FoldSplit,
    fold: usize,
    experiment: Experiment,
    config: &ExperimentConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Checkpoint> {
    let data = FoldData::new(dataset, split);
    let space = FeatureSpace::fit(
        &data.train,
        config.vocabulary.max_terms,
        config.vocabulary.min_df,
        if experiment.feature == FeatureKind::We {
            embeddings
        } else {
            None
        },
    )?;
    train_in_space(dataset, &data, space, fold, experiment, config, embeddings)
}

fn train_in_space(
    dataset: &Dataset,
    data: &FoldData<'_>,
    space: FeatureSpace,
    fold: usize,
    experiment: Experiment,
    config: &ExperimentConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Checkpoint> {
    let n_labels = dataset.vocabulary.len();
    let seed = experiment_seed(config.seed, fold, experiment);
    let (model, tuning) = match experiment.model {
        ModelKind::Nb => {
            let train = vectors(&data.train, &space, experiment.feature, embeddings)?;
            let nb_config = NbConfig {
                alpha: config.nb.alpha,
                balanced: config.nb.balanced,
                seed,
            };
            (
                TrainedModel::Nb(train_nb_ova(&train, n_labels, nb_config)?),
                Tuning::default(),
            )
        }
        ModelKind::RankSvmLp | ModelKind::RankSvmPpt => {
            let train = vectors(&data.train, &space, experiment.feature, embeddings)?;
            let validation = vectors(&data.validation, &space, experiment.feature, embeddings)?;
            let mode = if experiment.model == ModelKind::RankSvmLp {
                CostMode::Lp
            } else {
                CostMode::Ppt {
                    min_count: config.ranksvm.ppt_min_count,
                }
            };
            let (m, t) = train_ranksvm_tuned(
                &train,
                &data.train,
                &validation,
                mode,
                n_labels,
                config,
                seed,
            )?;
            (TrainedModel::RankSvm(m), t)
        }
        ModelKind::LstmAtt => {
            let lstm = &config.lstm;
            let seqs = |docs: &[&Document]| -> Vec<Sequence> {
                docs.iter()
                    .map(|d| (space.token_ids(d, lstm.max_len), d.labels.clone()))
                    .collect()
            };
            let (train, validation) = (seqs(&data.train), seqs(&data.validation));
            let init = match experiment.feature {
                FeatureKind::Bow => EmbeddingInit::Learned {
                    vocab_size: space.vocabulary.len() + 1,
                },
                FeatureKind::We => {
                    let table = embeddings
                        .ok_or_else(|| Error::Config("no embedding table loaded".into()))?;
                    EmbeddingInit::Frozen(pretrained_embedding(table, &space.vocabulary))
                }
            };
            let (mut model, curve) = train_lstm(
                &train,
                &validation,
                n_labels,
                init,
                lstm.network_config(seed),
            )?;
            if lstm.tune_threshold {
                model.threshold = tune_threshold(&model, &validation, &lstm.threshold_grid)?;
            }
            let fm = model.micro_fm_at(&validation, model.threshold)?;
            let tuning = Tuning {
                threshold: Some(model.threshold),
                epoch: Some(curve.chosen_epoch),
                validation_micro_fm: Some(fm),
                ..Tuning::default()
            };
            (TrainedModel::Lstm(model), tuning)
        }
    };
    Ok(Checkpoint {
        format_version: CHECKPOINT_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        dataset: dataset.name.clone(),
        experiment,
        fold,
        label_names: dataset.vocabulary.names().to_vec(),
        features: space,
        model,
        tuning,
    })
}

/// Trains every experiment on one fold and scores it on the fold's test split.
fn run_fold(
    loaded: &LoadedDataset,
    split: &FoldSplit,
    fold: usize,
    experiments: &[Experiment],
    config: &ExperimentConfig,
) -> Result<Vec<(EvalResult, Tuning)>> {
    let dataset = &loaded.dataset;
    let table = loaded.embeddings.as_deref();
    let data = FoldData::new(dataset, split);
    let space = FeatureSpace::fit(
        &data.train,
        config.vocabulary.max_terms,
        config.vocabulary.min_df,
        if experiments.iter().any(|e| e.feature == FeatureKind::We) {
            table
        } else {
            None
        },
    )?;
    let test = dataset.subset(&split.test);
    let mut out = Vec::with_capacity(experiments.len());
    for &experiment in experiments {
        log::info!("{} fold {fold}: {experiment}", dataset.name);
        let checkpoint = train_in_space(
            dataset,
            &data,
            space.clone(),
            fold,
            experiment,
            config,
            table,
        )?;
        out.push((checkpoint.evaluate(&test, table)?, checkpoint.tuning));
    }
    Ok(out)
}

/// Size, label and labelset statistics of a loaded dataset.
pub fn summarize_dataset(loaded: &LoadedDataset) -> Result<DatasetSummary> {
    let d = &loaded.dataset;
    let stats = enumerate_labelsets(d.documents.iter().map(|doc| (doc.id.as_str(), &doc.labels)))?;
    let names = d.vocabulary.names();
    let label_counts = d.label_counts();
    Ok(DatasetSummary {
        name: d.name.clone(),
        n_documents: d.len(),
        label_names: names.to_vec(),
        cleaning: loaded.cleaning,
        label_imbalance: label_imbalance(&label_counts),
        label_counts,
        labelset_imbalance: labelset_imbalance(&stats),
        labelset_histogram: stats
            .histogram()
            .into_iter()
            .map(|(ls, count)| HistogramRow {
                labelset: ls
                    .labels()
                    .iter()
                    .map(|&l| names[l].as_str())
                    .collect::<Vec<_>>()
                    .join("+"),
                count,
            })
            .collect(),
    })
}

fn comparison_pair(
    config: &ExperimentConfig,
    datasets: &[DatasetSummary],
) -> Option<(String, String)> {
    if let Some(c) = &config.comparison {
        return Some((c.smaller.clone(), c.larger.clone()));
    }
    match datasets {
        [a, b] if a.label_names.len() != b.label_names.len() => {
            let (s, l) = if a.label_names.len() < b.label_names.len() {
                (a, b)
            } else {
                (b, a)
            };
            Some((s.name.clone(), l.name.clone()))
        }
        _ => None,
    }
}

/// Runs the configured model × feature grid over k folds of every dataset.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let inputs = load_inputs(config)?;
    run_loaded(config, &inputs)
}

/// [`run_experiment`] on inputs that are already loaded.
pub fn run_loaded(config: &ExperimentConfig, inputs: &[LoadedDataset]) -> Result<ExperimentReport> {
    config.validate()?;
    let experiments = config.experiment_list();
    let mut datasets = Vec::new();
    let mut results = Vec::new();
    for loaded in inputs {
        let plan = split_folds(
            &loaded.dataset,
            config.k,
            config.validation_fraction,
            config.seed,
        )?;
        let splits = (0..config.k)
            .map(|f| plan.split(f))
            .collect::<Result<Vec<_>>>()?;
        let per_fold: Vec<Result<Vec<(EvalResult, Tuning)>>> = if config.parallel {
            let experiments = &experiments;
            std::thread::scope(|s| {
                let handles: Vec<_> = splits
                    .iter()
                    .enumerate()
                    .map(|(f, split)| {
                        s.spawn(move || run_fold(loaded, split, f, experiments, config))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("fold thread panicked"))
                    .collect()
            })
        } else {
            splits
                .iter()
                .enumerate()
                .map(|(f, split)| run_fold(loaded, split, f, &experiments, config))
                .collect()
        };
        let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;

        let n_labels = loaded.dataset.vocabulary.len();
        for (i, &experiment) in experiments.iter().enumerate() {
            let evals: Vec<&EvalResult> = per_fold.iter().map(|f| &f[i].0).collect();
            let per_label_f = (0..n_labels)
                .map(|l| evals.iter().map(|e| e.per_label_f[l]).sum::<f64>() / evals.len() as f64)
                .collect();
            let confusions: Vec<Vec<Vec<f64>>> =
                evals.iter().map(|e| e.confusion.clone()).collect();
            results.push(ExperimentResult {
                dataset: loaded.dataset.name.clone(),
                experiment,
                macro_fm: Summary::of(evals.iter().map(|e| e.macro_fm).collect())?,
                micro_fm: Summary::of(evals.iter().map(|e| e.micro_fm).collect())?,
                per_label_f,
                confusion: average_matrices(&confusions)?,
                tuning: per_fold.iter().map(|f| f[i].1.clone()).collect(),
            });
        }
        datasets.push(summarize_dataset(loaded)?);
    }

    let derived = comparison_pair(config, &datasets).map(|(smaller, larger)| {
        let rows = |pick: fn(&ExperimentResult) -> f64| -> Vec<ScoreRow> {
            experiments
                .iter()
                .filter_map(|&e| {
                    let get = |name: &str| {
                        results
                            .iter()
                            .find(|r| r.dataset == name && r.experiment == e)
                    };
                    Some(ScoreRow {
                        experiment: e,
                        smaller: pick(get(&smaller)?),
                        larger: pick(get(&larger)?),
                    })
                })
                .collect()
        };
        derived_report(
            &smaller,
            &larger,
            &rows(|r| r.macro_fm.mean),
            &rows(|r| r.micro_fm.mean),
        )
    });

    Ok(ExperimentReport {
        provenance: Provenance {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            k: config.k,
            validation_fraction: config.validation_fraction,
            synthetic_seeds: inputs
                .iter()
                .filter_map(|l| l.synthetic_seed.map(|s| (l.dataset.name.clone(), s)))
                .collect(),
        },
        datasets,
        results,
        derived,
    })
}
