//! LSTM with structured self-attention for multi-label classification.
//!
//! Tokens are embedded and run through a unidirectional LSTM. `hops`
//! attention distributions over time steps pool the hidden states into a
//! fixed-size matrix, which a linear layer maps to one logit per label.
//!
//! Training minimizes binary cross-entropy over per-label sigmoids with Adam.
//! Prediction instead takes a softmax over the logits and returns every label
//! whose probability exceeds a threshold (0.3 by default), or the top label
//! if none does.

mod network;
mod params;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use network::softmax;
pub use params::{random_params, AdamConfig, Dims, LstmParams};

use crate::features::{EmbeddingTable, Vocabulary};
use crate::metrics::micro_fm;
use crate::{rng, Error, LabelSet, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Id reserved for out-of-vocabulary input.
pub const UNK_ID: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    /// Embedding width when embeddings are learned from scratch.
    pub embedding_dim: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub hops: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub threshold: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            embedding_dim: 64,
            hidden: 64,
            attention_dim: 64,
            hops: 4,
            batch_size: 32,
            epochs: 30,
            adam: AdamConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            max_len: 50,
            seed: 0,
        }
    }
}

/// Maps preprocessed tokens to embedding ids: vocabulary term `i` gets
/// `i + 1`, id 0 is the unknown token.
pub fn token_ids<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = tokens
        .iter()
        .filter_map(|t| vocab.get(t.as_ref()))
        .map(|i| i + 1)
        .take(max_len.max(1))
        .collect();
    if ids.is_empty() {
        ids.push(UNK_ID);
    }
    ids
}

/// Embedding matrix (`dim × (|vocab| + 1)`) filled from a pre-trained table;
/// the unknown token and words missing from the table get zero vectors.
pub fn pretrained_embedding(table: &EmbeddingTable, vocab: &Vocabulary) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(table.dim(), vocab.len() + 1);
    for (i, term) in vocab.terms().iter().enumerate() {
        if let Some(v) = table.get(term) {
            m.column_mut(i + 1).copy_from_slice(v);
        }
    }
    m
}

/// How the embedding layer starts out.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingInit {
    /// Randomly initialized and trained (bag-of-words mode).
    Learned { vocab_size: usize },
    /// Fixed pre-trained vectors, one column per token id.
    Frozen(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmAttModel {
    pub format_version: u32,
    pub config: LstmConfig,
    pub frozen_embedding: bool,
    pub threshold: f64,
    pub params: LstmParams,
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    /// Mean per-sample loss over the training set after each epoch.
    pub train_loss: Vec<f64>,
    pub validation_micro_fm: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub chosen_epoch: usize,
}

/// Output of [`LstmAttModel::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// `hops × steps`; each row sums to one.
    pub attention: Vec<Vec<f64>>,
}

pub type Sequence = (Vec<usize>, LabelSet);

fn targets(labels: &LabelSet, n_labels: usize) -> Vec<f64> {
    (0..n_labels)
        .map(|l| if labels.contains(&l) { 1.0 } else { 0.0 })
        .collect()
}

impl LstmAttModel {
    pub fn new(n_labels: usize, init: EmbeddingInit, config: LstmConfig) -> Result<Self> {
        if n_labels == 0 || config.hidden == 0 || config.attention_dim == 0 || config.hops == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        if !(config.threshold > 0.0 && config.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold {} outside (0, 1)",
                config.threshold
            )));
        }
        let (vocab, emb, matrix, frozen) = match init {
            EmbeddingInit::Learned { vocab_size } => {
                (vocab_size, config.embedding_dim, None, false)
            }
            EmbeddingInit::Frozen(m) => (m.ncols(), m.nrows(), Some(m), true),
        };
        if vocab == 0 || emb == 0 {
            return Err(Error::invalid("embedding must have positive size"));
        }
        let dims = Dims {
            vocab,
            emb,
            hidden: config.hidden,
            attention: config.attention_dim,
            hops: config.hops,
            labels: n_labels,
        };
        Ok(LstmAttModel {
            format_version: FORMAT_VERSION,
            config,
            frozen_embedding: frozen,
            threshold: config.threshold,
            params: LstmParams::init(dims, matrix, config.seed),
        })
    }

    pub fn n_labels(&self) -> usize {
        self.params.b_out.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.params.embedding.ncols()
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Empty("token sequence"));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.vocab_size()) {
            return Err(Error::invalid(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.vocab_size()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, ids: &[usize]) -> Result<ForwardOutput> {
        self.check_ids(ids)?;
        let cache = network::forward(&self.params, ids);
        Ok(ForwardOutput {
            logits: cache.logits.iter().copied().collect(),
            attention: cache
                .attention
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        })
    }

    pub fn probabilities(&self, ids: &[usize]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(ids)?.logits))
    }

    /// Labels with softmax probability above `threshold`, or the most
    /// probable label (lowest index on ties) when none is.
    pub fn predict_with(&self, ids: &[usize], threshold: f64) -> Result<LabelSet> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold {threshold} outside (0, 1)"
            )));
        }
        Ok(threshold_select(&self.probabilities(ids)?, threshold))
    }

    pub fn predict(&self, ids: &[usize]) -> Result<LabelSet> {
        self.predict_with(ids, self.threshold)
    }

    /// Mean BCE loss of a batch and its gradient with respect to all
    /// parameters (embedding gradient zero when frozen).
    pub fn loss_and_gradient(&self, batch: &[Sequence]) -> Result<(f64, LstmParams)> {
        let mut grads = self.params.zeros_like();
        let loss = self.accumulate(batch, &mut grads)?;
        Ok((loss, grads))
    }

    fn accumulate(&self, batch: &[Sequence], grads: &mut LstmParams) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n_labels = self.n_labels();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (ids, labels) in batch {
            self.check_ids(ids)?;
            let y = targets(labels, n_labels);
            let cache = network::forward(&self.params, ids);
            loss += network::bce_sum(&cache.logits, &y);
            let d_logits = network::bce_grad(&cache.logits, &y, scale);
            network::backward(
                &self.params,
                &cache,
                &d_logits,
                grads,
                !self.frozen_embedding,
            );
        }
        Ok(loss * scale)
    }

    /// Mean BCE loss without gradients.
    pub fn loss(&self, data: &[Sequence]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("loss data"));
        }
        let n_labels = self.n_labels();
        let mut total = 0.0;
        for (ids, labels) in data {
            self.check_ids(ids)?;
            let cache = network::forward(&self.params, ids);
            total += network::bce_sum(&cache.logits, &targets(labels, n_labels));
        }
        Ok(total / data.len() as f64)
    }

    pub fn micro_fm_at(&self, data: &[Sequence], threshold: f64) -> Result<f64> {
        let probs = data
            .iter()
            .map(|(ids, _)| self.probabilities(ids))
            .collect::<Result<Vec<_>>>()?;
        micro_fm_from_probs(&probs, data, threshold, self.n_labels())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LstmAttModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: model.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

pub fn threshold_select(probs: &[f64], threshold: f64) -> LabelSet {
    let above: LabelSet = (0..probs.len()).filter(|&l| probs[l] > threshold).collect();
    if above.is_empty() {
        LabelSet::from([crate::ranksvm::argmax(probs)])
    } else {
        above
    }
}

fn micro_fm_from_probs(
    probs: &[Vec<f64>],
    data: &[Sequence],
    threshold: f64,
    n_labels: usize,
) -> Result<f64> {
    let truth: Vec<LabelSet> = data.iter().map(|(_, l)| l.clone()).collect();
    let pred: Vec<LabelSet> = probs
        .iter()
        .map(|p| threshold_select(p, threshold))
        .collect();
    micro_fm(&truth, &pred, n_labels)
}

/// Mean binary cross-entropy over sigmoid outputs:
/// `−(1/n) Σ_i Σ_l [y ln σ(x) + (1 − y) ln(1 − σ(x))]`.
pub fn bce_loss(logits: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if logits.len() != targets.len() {
        return Err(Error::invalid("logits and targets differ in batch size"));
    }
    if logits.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = 0.0;
    for (x, y) in logits.iter().zip(targets) {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("target {bad} is not binary")));
        }
        total += network::bce_sum(&nalgebra::DVector::from_column_slice(x), y);
    }
    Ok(total / logits.len() as f64)
}

/// Trains with Adam on shuffled mini-batches and keeps the parameters of the
/// epoch with the best validation Micro-FM (earliest on ties).
pub fn train_lstm(
    train: &[Sequence],
    val: &[Sequence],
    n_labels: usize,
    init: EmbeddingInit,
    config: LstmConfig,
) -> Result<(LstmAttModel, TrainingCurve)> {
    if train.is_empty() {
        return Err(Error::Empty("LSTM training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("LSTM validation set"));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::invalid("batch size and epochs must be positive"));
    }
    let mut model = LstmAttModel::new(n_labels, init, config)?;
    for (ids, labels) in train.iter().chain(val) {
        model.check_ids(ids)?;
        if labels.iter().any(|&l| l >= n_labels) {
            return Err(Error::invalid("label out of range"));
        }
    }

    let frozen = if model.frozen_embedding {
        vec![0]
    } else {
        vec![]
    };
    let mut adam = params::Adam::new(config.adam, &model.params, frozen);
    let mut grads = model.params.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = TrainingCurve {
        train_loss: Vec::with_capacity(config.epochs),
        validation_micro_fm: Vec::with_capacity(config.epochs),
        chosen_epoch: 0,
    };
    let mut best: Option<(f64, LstmParams)> = None;
    let mut batch: Vec<Sequence> = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, 1 + epoch as u64));
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            grads.fill_zero();
            model.accumulate(&batch, &mut grads)?;
            adam.update(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::invalid(format!(
                "parameters diverged in epoch {}",
                epoch + 1
            )));
        }
        curve.train_loss.push(model.loss(train)?);
        let fm = model.micro_fm_at(val, config.threshold)?;
        curve.validation_micro_fm.push(fm);
        if best.as_ref().is_none_or(|(b, _)| fm > *b) {
            best = Some((fm, model.params.clone()));
            curve.chosen_epoch = epoch + 1;
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok((model, curve))
}

/// `0.05, 0.10, …, 0.50`.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 20.0).collect()
}

/// Threshold from `grid` with the best validation Micro-FM; ties go to the
/// smaller threshold.
pub fn tune_threshold(model: &LstmAttModel, val: &[Sequence], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let probs = val
        .iter()
        .map(|(ids, _)| model.probabilities(ids))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &t in &sorted {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("threshold {t} outside (0, 1)")));
        }
        let fm = micro_fm_from_probs(&probs, val, t, model.n_labels())?;
        if fm > best.0 {
            best = (fm, t);
        }
    }
    Ok(best.1)
}
