//! Datasets of labelled short texts.
//!
//! A dataset file is UTF-8 JSON lines, one record per line:
//!
//! ```text
//! {"text":"I hate myself","labels":["self loath"]}
//! ```
//!
//! `id` and `tokens` keys are optional on input. The writer always emits
//! `text`, `labels` and `id` in that order, followed by `tokens` once the
//! dataset has been preprocessed.

mod folds;
mod preprocess;
mod synthetic;

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use folds::{split_folds, FoldPlan, FoldSplit};
pub use preprocess::{
    decompose_hashtag, is_incomplete, preprocess, LabelLexicon, Preprocessor, StopWords,
};
pub use synthetic::{generate_synthetic, synthetic_embeddings, SynthSpec, WeightedLabelset};

use crate::{Error, LabelId, LabelSet, Result};

const DEFAULT_LABELS: &str = include_str!("../../data/labels.txt");

/// Number of basic emotions at the head of the default vocabulary.
pub const BASIC_EMOTIONS: usize = 9;

/// Ordered registry of label names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocabulary {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, LabelId>,
}

impl LabelVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = LabelVocabulary {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for name in names {
            let name = name.into().trim().to_lowercase();
            if name.is_empty() {
                return Err(Error::invalid("empty label name"));
            }
            if vocab.index.contains_key(&name) {
                return Err(Error::invalid(format!("duplicate label `{name}`")));
            }
            vocab.index.insert(name.clone(), vocab.names.len());
            vocab.names.push(name);
        }
        if vocab.names.is_empty() {
            return Err(Error::Empty("label vocabulary"));
        }
        Ok(vocab)
    }

    /// The nine basic emotions followed by the seven depression-related ones.
    pub fn emotions16() -> Self {
        Self::parse(DEFAULT_LABELS.as_bytes()).expect("shipped label list is valid")
    }

    /// The nine basic emotions only.
    pub fn emotions9() -> Self {
        Self::new(Self::emotions16().names.into_iter().take(BASIC_EMOTIONS)).expect("non-empty")
    }

    /// One label per line; blank lines and `#` comments are ignored.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut names = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            names.push(line.to_string());
        }
        Self::new(names)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl TryFrom<Vec<String>> for LabelVocabulary {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::new(names)
    }
}

impl From<LabelVocabulary> for Vec<String> {
    fn from(v: LabelVocabulary) -> Self {
        v.names
    }
}

/// One text sample and its emotion labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub documents: Vec<Document>,
    pub vocabulary: LabelVocabulary,
}

#[derive(Serialize, Deserialize)]
struct Record {
    text: String,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tokens: Vec<String>,
}

/// Counts of documents removed by [`Dataset::clean`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub incomplete: usize,
    pub empty: usize,
    pub duplicate: usize,
}

impl Dataset {
    /// Reads JSON-lines records. Blank lines are skipped; records without an
    /// `id` get their zero-based record index.
    pub fn parse<R: BufRead>(name: &str, reader: R, vocabulary: LabelVocabulary) -> Result<Self> {
        let mut documents = Vec::new();
        let mut seen_ids = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if record.labels.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty label array".into(),
                });
            }
            let mut labels = LabelSet::new();
            for label in &record.labels {
                let id = vocabulary
                    .id(&label.trim().to_lowercase())
                    .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
                labels.insert(id);
            }
            let id = record.id.unwrap_or_else(|| documents.len().to_string());
            if !seen_ids.insert(id.clone()) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate document id `{id}`"),
                });
            }
            documents.push(Document {
                id,
                raw_text: record.text,
                tokens: record.tokens,
                labels,
            });
        }
        Ok(Dataset {
            name: name.to_string(),
            documents,
            vocabulary,
        })
    }

    pub fn load(path: impl AsRef<Path>, vocabulary: LabelVocabulary) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&name, std::io::BufReader::new(file), vocabulary)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for doc in &self.documents {
            let record = Record {
                text: doc.raw_text.clone(),
                labels: doc
                    .labels
                    .iter()
                    .map(|&l| self.vocabulary.names[l].clone())
                    .collect(),
                id: Some(doc.id.clone()),
                tokens: doc.tokens.clone(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io("<dataset>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Preprocesses every document and applies the corpus filters: truncated
    /// texts, documents with no surviving tokens, and token-sequence
    /// duplicates (first occurrence kept) are dropped.
    pub fn clean(&self, pre: &Preprocessor) -> (Dataset, CleanReport) {
        let mut report = CleanReport::default();
        let mut seen: HashSet<Vec<String>> = HashSet::new();
        let mut documents = Vec::with_capacity(self.documents.len());
        for doc in &self.documents {
            if is_incomplete(&doc.raw_text) {
                report.incomplete += 1;
                continue;
            }
            let tokens = pre.preprocess(&doc.raw_text);
            if tokens.is_empty() {
                report.empty += 1;
                continue;
            }
            if !seen.insert(tokens.clone()) {
                report.duplicate += 1;
                continue;
            }
            documents.push(Document {
                tokens,
                ..doc.clone()
            });
        }
        let cleaned = Dataset {
            name: self.name.clone(),
            documents,
            vocabulary: self.vocabulary.clone(),
        };
        (cleaned, report)
    }

    /// Whether every document already carries tokens.
    pub fn is_preprocessed(&self) -> bool {
        self.documents.iter().all(|d| !d.tokens.is_empty())
    }

    /// Per-label document counts; a document with two labels counts for both.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocabulary.len()];
        for doc in &self.documents {
            for &l in &doc.labels {
                counts[l] += 1;
            }
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&Document> {
        indices.iter().map(|&i| &self.documents[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::parse("t", text.as_bytes(), LabelVocabulary::emotions16())
    }

    #[test]
    fn default_vocabulary_has_sixteen_emotions() {
        let v = LabelVocabulary::emotions16();
        assert_eq!(v.len(), 16);
        assert_eq!(v.id("anger"), Some(0));
        assert_eq!(v.id("self loath"), Some(15));
        assert_eq!(LabelVocabulary::emotions9().len(), 9);
        for extra in [
            "betrayed",
            "frustrated",
            "hopeless",
            "loneliness",
            "rejected",
            "schadenfreude",
        ] {
            assert!(v.id(extra).unwrap() >= BASIC_EMOTIONS);
        }
    }

    #[test]
    fn parses_record() {
        let ds = parse(r#"{"text":"I hate myself","labels":["self loath"]}"#).unwrap();
        let doc = &ds.documents[0];
        assert_eq!(doc.raw_text, "I hate myself");
        assert_eq!(doc.labels, LabelSet::from([15]));
        assert!(doc.tokens.is_empty());
        assert_eq!(doc.id, "0");
    }

    #[test]
    fn duplicate_labels_collapse() {
        let ds = parse(r#"{"text":"x","labels":["joy","joy"]}"#).unwrap();
        assert_eq!(ds.documents[0].labels.len(), 1);
    }

    #[test]
    fn rejects_unknown_label() {
        let err = parse(r#"{"text":"x","labels":["serenity"]}"#).unwrap_err();
        assert!(
            matches!(err, Error::UnknownLabel(ref l) if l == "serenity"),
            "{err}"
        );
    }

    #[test]
    fn rejects_empty_labels_and_malformed_lines() {
        let err = parse("{\"text\":\"a\",\"labels\":[\"joy\"]}\n{\"text\":\"x\",\"labels\":[]}")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("\n\nnot json").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn write_emits_keys_in_order() {
        let ds = parse(r#"{"text":"hi","labels":["love","joy"]}"#).unwrap();
        let mut out = Vec::new();
        ds.write(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"text\":\"hi\",\"labels\":[\"joy\",\"love\"],\"id\":\"0\"}\n"
        );
    }

    #[test]
    fn clean_drops_incomplete_empty_and_duplicates() {
        let ds = parse(
            r#"{"text":"Great day at the beach","labels":["joy"]}
{"text":"great DAY at the beach!!","labels":["joy"]}
{"text":"I was going to say...","labels":["anger"]}
{"text":"the and of","labels":["fear"]}
{"text":"Spiders everywhere","labels":["fear"]}"#,
        )
        .unwrap();
        let (clean, report) = ds.clean(&Preprocessor::default());
        assert_eq!(
            report,
            CleanReport {
                incomplete: 1,
                empty: 1,
                duplicate: 1
            }
        );
        let ids: Vec<_> = clean.documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["0", "4"]);
        assert_eq!(clean.documents[0].tokens, ["great", "day", "beach"]);
    }
}
