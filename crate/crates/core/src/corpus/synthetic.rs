//! Keyword-driven synthetic corpora for desk-scale experiments.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, LabelVocabulary};
use crate::features::EmbeddingTable;
use crate::{rng, Error, LabelSet, Result};

const MAX_RESAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLabelset {
    pub labels: Vec<usize>,
    pub weight: f64,
}

/// Recipe for a synthetic corpus.
///
/// Every document draws a labelset by weight, then emits
/// `keywords_per_label` keywords from each of its labels' lexicons. The
/// remaining slots up to a length drawn from `doc_len` are noise words with
/// probability `noise_rate`, otherwise extra keywords of the document's own
/// labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_docs: usize,
    pub label_names: Vec<String>,
    pub labelset_weights: Vec<WeightedLabelset>,
    pub lexicons: Vec<Vec<String>>,
    #[serde(default = "default_keywords_per_label")]
    pub keywords_per_label: usize,
    /// Inclusive token-count range.
    pub doc_len: (usize, usize),
    pub noise_rate: f64,
    #[serde(default)]
    pub noise_vocabulary: Vec<String>,
}

fn default_name() -> String {
    "synthetic".into()
}

fn default_keywords_per_label() -> usize {
    1
}

impl SynthSpec {
    /// A corpus over `label_names` where label `i` owns keywords
    /// `k{i}w0 .. k{i}w{lexicon_size-1}` and noise comes from `n0 .. n{noise_size-1}`.
    pub fn keyword_corpus(
        label_names: &[&str],
        n_docs: usize,
        labelset_weights: Vec<WeightedLabelset>,
        lexicon_size: usize,
        noise_size: usize,
    ) -> Self {
        SynthSpec {
            name: default_name(),
            n_docs,
            label_names: label_names.iter().map(|s| s.to_string()).collect(),
            labelset_weights,
            lexicons: (0..label_names.len())
                .map(|i| (0..lexicon_size).map(|j| format!("k{i}w{j}")).collect())
                .collect(),
            keywords_per_label: 1,
            doc_len: (4, 10),
            noise_rate: 0.5,
            noise_vocabulary: (0..noise_size).map(|j| format!("n{j}")).collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("synthetic spec: {e}")))
    }

    fn validate(&self) -> Result<()> {
        let n = self.label_names.len();
        if self.lexicons.len() != n {
            return Err(Error::Config(format!(
                "{} lexicons for {n} labels",
                self.lexicons.len()
            )));
        }
        if self.labelset_weights.is_empty() || self.labelset_weights.iter().all(|w| w.weight <= 0.0)
        {
            return Err(Error::Config("no labelset has positive weight".into()));
        }
        for ws in &self.labelset_weights {
            if !(ws.weight >= 0.0 && ws.weight.is_finite()) {
                return Err(Error::Config(format!(
                    "invalid labelset weight {}",
                    ws.weight
                )));
            }
            if ws.labels.is_empty() {
                return Err(Error::Config("empty labelset".into()));
            }
            if let Some(&bad) = ws.labels.iter().find(|&&l| l >= n) {
                return Err(Error::Config(format!("label index {bad} out of range")));
            }
            if ws.weight > 0.0 {
                if let Some(&l) = ws.labels.iter().find(|&&l| self.lexicons[l].is_empty()) {
                    return Err(Error::Config(format!(
                        "label `{}` has weight but an empty lexicon",
                        self.label_names[l]
                    )));
                }
            }
        }
        if self.keywords_per_label == 0 {
            return Err(Error::Config("keywords_per_label must be positive".into()));
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return Err(Error::Config(format!(
                "invalid length range {:?}",
                self.doc_len
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!(
                "noise rate {} outside [0, 1]",
                self.noise_rate
            )));
        }
        if self.noise_rate > 0.0 && self.noise_vocabulary.is_empty() {
            return Err(Error::Config(
                "noise rate is positive but noise vocabulary is empty".into(),
            ));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let vocabulary = LabelVocabulary::new(spec.label_names.iter().cloned())?;
    let weights = WeightedIndex::new(spec.labelset_weights.iter().map(|w| w.weight))
        .map_err(|e| Error::Config(format!("labelset weights: {e}")))?;
    let mut rng = rng::seeded(seed);

    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut documents = Vec::with_capacity(spec.n_docs);
    for i in 0..spec.n_docs {
        let chosen = &spec.labelset_weights[weights.sample(&mut rng)].labels;
        let labels: LabelSet = chosen.iter().copied().collect();
        let mut attempt = 0;
        let tokens = loop {
            let tokens = sample_tokens(spec, &labels, &mut rng);
            if seen.insert(tokens.clone()) {
                break tokens;
            }
            attempt += 1;
            if attempt == MAX_RESAMPLES {
                return Err(Error::Config(format!(
                    "could not draw a distinct document after {MAX_RESAMPLES} attempts; \
                     enlarge the lexicons or the length range"
                )));
            }
        };
        documents.push(Document {
            id: format!("syn{i:06}"),
            raw_text: tokens.join(" "),
            tokens,
            labels,
        });
    }
    Ok(Dataset {
        name: spec.name.clone(),
        documents,
        vocabulary,
    })
}

fn sample_tokens(spec: &SynthSpec, labels: &LabelSet, rng: &mut rng::Rng) -> Vec<String> {
    let own: Vec<usize> = labels.iter().copied().collect();
    let mut tokens = Vec::new();
    for &l in &own {
        for _ in 0..spec.keywords_per_label {
            tokens.push(spec.lexicons[l].choose(rng).expect("validated").clone());
        }
    }
    let len = rng
        .gen_range(spec.doc_len.0..=spec.doc_len.1)
        .max(tokens.len());
    while tokens.len() < len {
        if rng.gen_bool(spec.noise_rate) {
            tokens.push(
                spec.noise_vocabulary
                    .choose(rng)
                    .expect("validated")
                    .clone(),
            );
        } else {
            let l = *own.choose(rng).expect("non-empty labelset");
            tokens.push(spec.lexicons[l].choose(rng).expect("validated").clone());
        }
    }
    tokens.shuffle(rng);
    tokens
}

/// Embeddings for a synthetic corpus: each label gets a random unit
/// direction, keywords sit near the mean direction of the labels whose
/// lexicon contains them, noise words are isotropic.
pub fn synthetic_embeddings(
    spec: &SynthSpec,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let mut rng = rng::stream(seed, 0xe3b);
    let gaussian = |rng: &mut rng::Rng| -> Vec<f64> {
        (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let centers: Vec<Vec<f64>> = (0..spec.label_names.len())
        .map(|_| {
            let v = gaussian(&mut rng);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();

    let mut owners: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (l, lex) in spec.lexicons.iter().enumerate() {
        for w in lex {
            owners.entry(w.as_str()).or_default().push(l);
        }
    }
    let scale = spread / (dim as f64).sqrt();
    let mut entries = Vec::new();
    for (word, labels) in owners {
        let noise = gaussian(&mut rng);
        let v = (0..dim)
            .map(|d| {
                let c = labels.iter().map(|&l| centers[l][d]).sum::<f64>() / labels.len() as f64;
                c + scale * noise[d]
            })
            .collect();
        entries.push((word.to_string(), v));
    }
    for word in &spec.noise_vocabulary {
        if entries.iter().any(|(w, _)| w == word) {
            continue;
        }
        let v = gaussian(&mut rng)
            .into_iter()
            .map(|x| x / (dim as f64).sqrt())
            .collect();
        entries.push((word.clone(), v));
    }
    EmbeddingTable::from_entries(dim, entries)
}
