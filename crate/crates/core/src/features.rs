//! Document features: binary bag-of-words over a frequency-ranked vocabulary,
//! and averaged pre-trained word embeddings with min-max scaling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_TERMS: usize = 5000;
pub const DEFAULT_MIN_DF: usize = 3;
pub const DEFAULT_EMBEDDING_DIM: usize = 200;

/// Frequency-ranked term list built from training documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    frequencies: Vec<usize>,
    index: HashMap<String, usize>,
    max_size: usize,
    min_df: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    frequencies: Vec<usize>,
    max_size: usize,
    min_df: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms: r.terms,
            frequencies: r.frequencies,
            index,
            max_size: r.max_size,
            min_df: r.min_df,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            frequencies: v.frequencies,
            max_size: v.max_size,
            min_df: v.min_df,
        }
    }
}

impl Vocabulary {
    /// Keeps terms present in at least `min_df` documents, ranks them by total
    /// occurrences (ties lexicographic) and truncates to `max_size`.
    pub fn build<'a, I, T>(docs: I, max_size: usize, min_df: usize) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a String>,
    {
        let mut occurrences: HashMap<&str, usize> = HashMap::new();
        let mut doc_freq: HashMap<&str, usize> = HashMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let mut seen = HashSet::new();
            for tok in doc {
                *occurrences.entry(tok).or_default() += 1;
                if seen.insert(tok.as_str()) {
                    *doc_freq.entry(tok).or_default() += 1;
                }
            }
        }
        if n_docs == 0 {
            return Err(Error::Empty("vocabulary corpus"));
        }
        let mut ranked: Vec<(&str, usize)> = occurrences
            .into_iter()
            .filter(|(t, _)| doc_freq[t] >= min_df)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);

        let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            terms,
            frequencies: ranked.iter().map(|&(_, f)| f).collect(),
            index,
            max_size,
            min_df,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    /// `term<TAB>frequency`, one per line, in rank order.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, f) in self.terms.iter().zip(&self.frequencies) {
            writeln!(out, "{t}\t{f}")?;
        }
        Ok(())
    }

    /// Binary presence vector; out-of-vocabulary tokens are ignored.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let mut indices: Vec<u32> = tokens
            .iter()
            .filter_map(|t| self.get(t.as_ref()))
            .map(|i| i as u32)
            .collect();
        indices.sort_unstable();
        indices.dedup();
        FeatureVector::Bow {
            dim: self.len(),
            indices,
        }
    }
}

/// A document's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureVector {
    /// Sorted indices of the vocabulary terms present; each has value 1.
    Bow {
        dim: usize,
        indices: Vec<u32>,
    },
    Dense(Vec<f64>),
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Bow { dim, .. } => *dim,
            FeatureVector::Dense(v) => v.len(),
        }
    }

    /// `(index, value)` pairs of the non-zero entries of a BOW vector, or of
    /// every entry of a dense one.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            FeatureVector::Bow { indices, .. } => {
                Box::new(indices.iter().map(|&i| (i as usize, 1.0)))
            }
            FeatureVector::Dense(v) => Box::new(v.iter().copied().enumerate()),
        }
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.dim());
        match self {
            FeatureVector::Bow { indices, .. } => {
                indices.iter().map(|&i| weights[i as usize]).sum()
            }
            FeatureVector::Dense(v) => v.iter().zip(weights).map(|(x, w)| x * w).sum(),
        }
    }

    /// `target += scale * self`
    pub fn add_scaled_to(&self, target: &mut [f64], scale: f64) {
        match self {
            FeatureVector::Bow { indices, .. } => {
                for &i in indices {
                    target[i as usize] += scale;
                }
            }
            FeatureVector::Dense(v) => {
                for (t, x) in target.iter_mut().zip(v) {
                    *t += scale * x;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Bow { dim, indices } => {
                let mut v = vec![0.0; *dim];
                for &i in indices {
                    v[i as usize] = 1.0;
                }
                v
            }
            FeatureVector::Dense(v) => v.clone(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match self {
            FeatureVector::Bow { indices, .. } => indices.len() as f64,
            FeatureVector::Dense(v) => v.iter().map(|x| x * x).sum(),
        }
    }
}

/// Pre-trained word vectors of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut vectors = HashMap::new();
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            vectors.entry(word).or_insert(v);
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Parses `word v1 ... v_dim` lines; the first occurrence of a word wins.
    pub fn parse<R: BufRead>(reader: R, dim: usize) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().expect("non-empty line");
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", dim + 1, values.len() + 1),
                });
            }
            let parsed = values
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("non-numeric component `{v}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            vectors.entry(word.to_string()).or_insert(parsed);
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), dim)
    }

    /// Writes entries sorted by word so output is reproducible.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let sorted: BTreeMap<_, _> = self.vectors.iter().collect();
        for (word, v) in sorted {
            write!(out, "{word}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Mean vector of the tokens found in the table (duplicates count each
    /// time); the zero vector when none is found.
    pub fn average<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for v in tokens.iter().filter_map(|t| self.get(t.as_ref())) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            found += 1;
        }
        if found > 0 {
            let n = found as f64;
            sum.iter_mut().for_each(|s| *s /= n);
        }
        FeatureVector::Dense(sum)
    }
}

/// Per-dimension min-max scaler fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNormalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxNormalizer {
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or(Error::Empty("min-max fitting set"))?
            .to_dense();
        let (mut min, mut max) = (first.clone(), first);
        for v in iter {
            if v.dim() != min.len() {
                return Err(Error::DimensionMismatch {
                    expected: min.len(),
                    actual: v.dim(),
                });
            }
            for (d, x) in v.to_dense().into_iter().enumerate() {
                min[d] = min[d].min(x);
                max[d] = max[d].max(x);
            }
        }
        Ok(MinMaxNormalizer { min, max })
    }

    /// `(x - min) / (max - min)` clamped to `[0, 1]`; constant dimensions map to 0.
    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.dim() != self.min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                actual: v.dim(),
            });
        }
        let dense = v.to_dense();
        let out = dense
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    ((x - lo) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(FeatureVector::Dense(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn vocabulary_ranking_and_min_df() {
        let docs = vec![
            toks(&["a", "b"]),
            toks(&["a"]),
            toks(&["a", "b"]),
            toks(&["b", "c"]),
        ];
        let v = Vocabulary::build(&docs, 5000, 2).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
        let v = Vocabulary::build(&docs, 1, 2).unwrap();
        assert_eq!(v.terms(), ["a"]);
        let empty: Vec<Vec<String>> = vec![];
        assert!(Vocabulary::build(&empty, 10, 1).is_err());
    }

    #[test]
    fn frequency_counts_occurrences_not_documents() {
        // "z" is in 2 docs but occurs 5 times; "y" is in 3 docs, 3 times
        let docs = vec![
            toks(&["z", "z", "z", "y"]),
            toks(&["z", "z", "y"]),
            toks(&["y"]),
        ];
        let v = Vocabulary::build(&docs, 10, 1).unwrap();
        assert_eq!(v.terms(), ["z", "y"]);
        let mut dump = Vec::new();
        v.dump(&mut dump).unwrap();
        assert_eq!(String::from_utf8(dump).unwrap(), "z\t5\ny\t3\n");
    }

    #[test]
    fn bow_is_binary_presence() {
        let v = Vocabulary::build(&[toks(&["a", "b"])], 10, 1).unwrap();
        assert_eq!(
            v.vectorize(&toks(&["a", "a", "z"])),
            FeatureVector::Bow {
                dim: 2,
                indices: vec![0]
            }
        );
        assert_eq!(v.vectorize::<String>(&[]).to_dense(), vec![0.0, 0.0]);
        assert_eq!(v.vectorize(&toks(&["b", "a"])).to_dense(), vec![1.0, 1.0]);
    }

    #[test]
    fn embedding_file_parsing() {
        let t = EmbeddingTable::parse("hi 0.1 0.2\nhi 9 9\nyo 1 -1\n".as_bytes(), 2).unwrap();
        assert_eq!(t.get("hi"), Some(&[0.1, 0.2][..]));
        assert_eq!(t.len(), 2);
        let err = EmbeddingTable::parse("ok 1 2\nhi 0.1\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = EmbeddingTable::parse("hi 0.1 x\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn embedding_average() {
        let t = EmbeddingTable::from_entries(
            2,
            [
                ("a".to_string(), vec![0.0, 1.0]),
                ("b".to_string(), vec![1.0, 0.0]),
            ],
        )
        .unwrap();
        assert_eq!(
            t.average(&toks(&["a", "b"])),
            FeatureVector::Dense(vec![0.5, 0.5])
        );
        assert_eq!(
            t.average(&toks(&["z"])),
            FeatureVector::Dense(vec![0.0, 0.0])
        );
        assert_eq!(
            t.average(&toks(&["a", "a"])),
            FeatureVector::Dense(vec![0.0, 1.0])
        );
    }

    #[test]
    fn minmax_endpoints_midpoint_and_constant() {
        let fit = [
            FeatureVector::Dense(vec![0.0, 2.0]),
            FeatureVector::Dense(vec![1.0, 4.0]),
        ];
        let n = MinMaxNormalizer::fit(&fit).unwrap();
        assert_eq!(
            n.apply(&fit[0]).unwrap(),
            FeatureVector::Dense(vec![0.0, 0.0])
        );
        assert_eq!(
            n.apply(&fit[1]).unwrap(),
            FeatureVector::Dense(vec![1.0, 1.0])
        );
        assert_eq!(
            n.apply(&FeatureVector::Dense(vec![0.5, 3.0])).unwrap(),
            FeatureVector::Dense(vec![0.5, 0.5])
        );
        assert_eq!(
            n.apply(&FeatureVector::Dense(vec![-3.0, 9.0])).unwrap(),
            FeatureVector::Dense(vec![0.0, 1.0])
        );

        let constant = [
            FeatureVector::Dense(vec![7.0]),
            FeatureVector::Dense(vec![7.0]),
        ];
        let n = MinMaxNormalizer::fit(&constant).unwrap();
        assert_eq!(
            n.apply(&constant[0]).unwrap(),
            FeatureVector::Dense(vec![0.0])
        );
        assert!(MinMaxNormalizer::fit(&[] as &[FeatureVector]).is_err());
        assert!(n.apply(&FeatureVector::Dense(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn minmax_sees_implicit_zeros_of_sparse_vectors() {
        let fit = [
            FeatureVector::Bow {
                dim: 2,
                indices: vec![0],
            },
            FeatureVector::Bow {
                dim: 2,
                indices: vec![1],
            },
        ];
        let n = MinMaxNormalizer::fit(&fit).unwrap();
        assert_eq!(n.min, vec![0.0, 0.0]);
        assert_eq!(n.max, vec![1.0, 1.0]);
    }
}
