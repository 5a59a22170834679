//! Shared fixtures for the criterion benches in `benches/`.

use emomine::corpus::{generate_synthetic, synthetic_embeddings, SynthSpec, WeightedLabelset};
use emomine::lstm::{token_ids, Sequence};
use emomine::{Dataset, EmbeddingTable, FeatureVector, LabelSet, Vocabulary};

pub const LABELS: [&str; 9] = [
    "anger", "disgust", "fear", "guilt", "interest", "joy", "sadness", "shame", "surprise",
];

pub struct Fixture {
    pub dataset: Dataset,
    pub vocabulary: Vocabulary,
    pub embeddings: EmbeddingTable,
    pub bow: Vec<(FeatureVector, LabelSet)>,
    pub sequences: Vec<Sequence>,
}

impl Fixture {
    pub fn n_labels(&self) -> usize {
        LABELS.len()
    }
}

/// Keyword corpus over nine labels with some two-label documents.
pub fn fixture(n_docs: usize) -> Fixture {
    let mut weights: Vec<WeightedLabelset> = (0..LABELS.len())
        .map(|i| WeightedLabelset {
            labels: vec![i],
            weight: 1.0,
        })
        .collect();
    weights.extend((0..LABELS.len() - 1).map(|i| WeightedLabelset {
        labels: vec![i, i + 1],
        weight: 0.1,
    }));
    let spec = SynthSpec::keyword_corpus(&LABELS, n_docs, weights, 20, 200);
    let dataset = generate_synthetic(&spec, 7).expect("valid spec");
    let embeddings = synthetic_embeddings(&spec, 100, 0.3, 7).expect("valid spec");
    let vocabulary =
        Vocabulary::build(dataset.documents.iter().map(|d| &d.tokens), 5000, 1).expect("non-empty");
    let bow = dataset
        .documents
        .iter()
        .map(|d| (vocabulary.vectorize(&d.tokens), d.labels.clone()))
        .collect();
    let sequences = dataset
        .documents
        .iter()
        .map(|d| (token_ids(&d.tokens, &vocabulary, 50), d.labels.clone()))
        .collect();
    Fixture {
        dataset,
        vocabulary,
        embeddings,
        bow,
        sequences,
    }
}

/// Raw tweet-like strings exercising every preprocessing rule.
pub fn raw_tweets(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            format!(
                "@friend{i} I am feeling so #GoodVibesOnly today http://t.co/x{i} what a \
                 #happy day!!! going to the park with #BestFriends and it makes me feel great"
            )
        })
        .collect()
}
