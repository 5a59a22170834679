//! One-vs-all multinomial Naïve Bayes.
//!
//! Each label gets a binary classifier trained with that label's documents
//! as positives and every other document as negatives, the negatives
//! optionally downsampled to the positive count. A document receives every
//! label whose classifier prefers the positive class.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::{rng, Error, LabelSet, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbConfig {
    /// Additive smoothing.
    pub alpha: f64,
    /// Downsample negatives to the number of positives.
    pub balanced: bool,
    pub seed: u64,
}

impl Default for NbConfig {
    fn default() -> Self {
        NbConfig {
            alpha: 1.0,
            balanced: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BinaryNb {
    Trained {
        /// `[negative, positive]`
        log_prior: [f64; 2],
        log_likelihood: [Vec<f64>; 2],
        n_positive: usize,
        n_negative: usize,
    },
    /// One class had no training documents; the classifier always answers
    /// with the other one.
    Constant(bool),
}

impl BinaryNb {
    /// Unnormalized log posteriors `[negative, positive]`.
    pub fn log_scores(&self, x: &FeatureVector) -> Option<[f64; 2]> {
        match self {
            BinaryNb::Trained {
                log_prior,
                log_likelihood,
                ..
            } => Some([
                log_prior[0] + x.dot(&log_likelihood[0]),
                log_prior[1] + x.dot(&log_likelihood[1]),
            ]),
            BinaryNb::Constant(_) => None,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> bool {
        match (self, self.log_scores(x)) {
            (BinaryNb::Constant(answer), _) => *answer,
            (_, Some([neg, pos])) => prefers_positive(neg, pos),
            _ => unreachable!(),
        }
    }
}

/// Positive wins only by a margin beyond floating-point noise; exact ties
/// go to the negative class.
pub fn prefers_positive(neg: f64, pos: f64) -> bool {
    pos - neg > 1e-12 * (1.0 + neg.abs().max(pos.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub format_version: u32,
    pub config: NbConfig,
    pub dim: usize,
    pub classifiers: Vec<BinaryNb>,
}

pub fn train_nb_ova(
    train: &[(FeatureVector, LabelSet)],
    n_labels: usize,
    config: NbConfig,
) -> Result<NbModel> {
    let (first, _) = train
        .first()
        .ok_or(Error::Empty("naive Bayes training set"))?;
    let dim = first.dim();
    if !(config.alpha > 0.0) {
        return Err(Error::invalid(format!(
            "smoothing must be positive, got {}",
            config.alpha
        )));
    }
    for (x, _) in train {
        if x.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.dim(),
            });
        }
        if x.entries().any(|(_, v)| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(
                "naive Bayes features must be finite and non-negative",
            ));
        }
    }

    let classifiers = (0..n_labels)
        .map(|label| train_binary(train, label, dim, &config))
        .collect();
    Ok(NbModel {
        format_version: FORMAT_VERSION,
        config,
        dim,
        classifiers,
    })
}

fn train_binary(
    train: &[(FeatureVector, LabelSet)],
    label: usize,
    dim: usize,
    config: &NbConfig,
) -> BinaryNb {
    let (positives, mut negatives): (Vec<usize>, Vec<usize>) =
        (0..train.len()).partition(|&i| train[i].1.contains(&label));
    if positives.is_empty() {
        log::warn!(
            "label {label} has no positive training documents; classifier always answers no"
        );
        return BinaryNb::Constant(false);
    }
    if negatives.is_empty() {
        log::warn!("label {label} is on every training document; classifier always answers yes");
        return BinaryNb::Constant(true);
    }
    if config.balanced && negatives.len() > positives.len() {
        negatives.shuffle(&mut rng::stream(config.seed, label as u64));
        negatives.truncate(positives.len());
        negatives.sort_unstable();
    }

    let class_log_likelihood = |docs: &[usize]| -> Vec<f64> {
        let mut mass = vec![0.0; dim];
        for &i in docs {
            train[i].0.add_scaled_to(&mut mass, 1.0);
        }
        let total: f64 = mass.iter().sum();
        let denom = (total + config.alpha * dim as f64).ln();
        mass.iter()
            .map(|m| (m + config.alpha).ln() - denom)
            .collect()
    };
    let n = (positives.len() + negatives.len()) as f64;
    BinaryNb::Trained {
        log_prior: [
            (negatives.len() as f64 / n).ln(),
            (positives.len() as f64 / n).ln(),
        ],
        log_likelihood: [
            class_log_likelihood(&negatives),
            class_log_likelihood(&positives),
        ],
        n_positive: positives.len(),
        n_negative: negatives.len(),
    }
}

impl NbModel {
    pub fn n_labels(&self) -> usize {
        self.classifiers.len()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<LabelSet> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(self
            .classifiers
            .iter()
            .enumerate()
            .filter(|(_, c)| c.predict(x))
            .map(|(l, _)| l)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: NbModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: model.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}
