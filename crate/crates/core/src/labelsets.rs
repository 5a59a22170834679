//! Labelset statistics: the label-powerset view of a multi-label corpus.
//!
//! Each distinct combination of labels is one class. Rare labelsets can be
//! pruned (PPT), and every training instance gets a misclassification cost
//! that grows as its labelset gets rarer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, LabelId, LabelSet, Result};

pub const DEFAULT_PPT_MIN_COUNT: usize = 5;

/// Canonical (sorted, non-empty) label combination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Labelset(Vec<LabelId>);

impl Labelset {
    pub fn new(labels: impl IntoIterator<Item = LabelId>) -> Result<Self> {
        let mut v: Vec<LabelId> = labels.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::invalid("labelset must not be empty"));
        }
        Ok(Labelset(v))
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_proper_subset_of(&self, other: &Labelset) -> bool {
        self.len() < other.len() && self.0.iter().all(|l| other.0.binary_search(l).is_ok())
    }

    pub fn to_label_set(&self) -> LabelSet {
        self.0.iter().copied().collect()
    }
}

impl TryFrom<&LabelSet> for Labelset {
    type Error = Error;

    fn try_from(set: &LabelSet) -> Result<Self> {
        Labelset::new(set.iter().copied())
    }
}

impl fmt::Display for Labelset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Labelset counts over a training set, plus each document's labelset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelsetStats {
    pub counts: BTreeMap<Labelset, usize>,
    /// `(document id, labelset)` in input order.
    pub assignments: Vec<(String, Labelset)>,
}

impl LabelsetStats {
    /// Number of distinct labelsets.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Count of the most populated labelset.
    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.assignments.len()
    }

    /// Per-label counts implied by the assignments (a document counts once
    /// for each of its labels).
    pub fn label_counts(&self, n_labels: usize) -> Vec<usize> {
        let mut counts = vec![0; n_labels];
        for (_, ls) in &self.assignments {
            for &l in ls.labels() {
                if l < n_labels {
                    counts[l] += 1;
                }
            }
        }
        counts
    }

    /// Histogram rows `(labelset, count)`, most populated first, ties by labelset.
    pub fn histogram(&self) -> Vec<(Labelset, usize)> {
        let mut rows: Vec<_> = self.counts.iter().map(|(k, &v)| (k.clone(), v)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows
    }
}

pub fn enumerate_labelsets<'a, I>(docs: I) -> Result<LabelsetStats>
where
    I: IntoIterator<Item = (&'a str, &'a LabelSet)>,
{
    let mut counts = BTreeMap::new();
    let mut assignments = Vec::new();
    for (id, labels) in docs {
        let ls = Labelset::try_from(labels)?;
        *counts.entry(ls.clone()).or_insert(0) += 1;
        assignments.push((id.to_string(), ls));
    }
    if assignments.is_empty() {
        return Err(Error::Empty("labelset enumeration"));
    }
    Ok(LabelsetStats {
        counts,
        assignments,
    })
}

/// Outcome of pruning for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reassignment {
    Kept,
    Moved(Labelset),
    Dropped,
}

/// Pruned stats plus, per document id, what happened to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pruned {
    pub stats: LabelsetStats,
    pub reassignments: BTreeMap<String, Reassignment>,
}

/// Removes labelsets seen fewer than `min_count` times.
///
/// A document of a removed labelset moves to its largest surviving proper
/// subset (ties: more frequent, then lexicographically smaller). Failing
/// that, it moves to the surviving singleton of its most frequent label, and
/// failing that it is dropped.
pub fn prune_labelsets(stats: &LabelsetStats, min_count: usize) -> Result<Pruned> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let surviving: Vec<(&Labelset, usize)> = stats
        .counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(k, &c)| (k, c))
        .collect();
    let max_label = stats
        .counts
        .keys()
        .flat_map(|ls| ls.labels().iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let label_freq = stats.label_counts(max_label);

    let mut target_of: BTreeMap<&Labelset, Option<Labelset>> = BTreeMap::new();
    for (ls, &count) in &stats.counts {
        if count >= min_count {
            continue;
        }
        let by_subset = surviving
            .iter()
            .filter(|(s, _)| s.is_proper_subset_of(ls))
            .max_by(|a, b| {
                a.0.len()
                    .cmp(&b.0.len())
                    .then(a.1.cmp(&b.1))
                    .then_with(|| b.0.cmp(a.0))
            })
            .map(|(s, _)| (*s).clone());
        let target = by_subset.or_else(|| {
            let top = ls
                .labels()
                .iter()
                .copied()
                .max_by(|&a, &b| label_freq[a].cmp(&label_freq[b]).then(b.cmp(&a)))?;
            let singleton = Labelset(vec![top]);
            surviving
                .iter()
                .any(|(s, _)| **s == singleton)
                .then_some(singleton)
        });
        target_of.insert(ls, target);
    }

    let mut reassignments = BTreeMap::new();
    let mut kept = Vec::with_capacity(stats.assignments.len());
    for (id, ls) in &stats.assignments {
        match target_of.get(ls) {
            None => {
                reassignments.insert(id.clone(), Reassignment::Kept);
                kept.push((id.as_str(), ls.to_label_set()));
            }
            Some(Some(t)) => {
                reassignments.insert(id.clone(), Reassignment::Moved(t.clone()));
                kept.push((id.as_str(), t.to_label_set()));
            }
            Some(None) => {
                reassignments.insert(id.clone(), Reassignment::Dropped);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid(format!(
            "pruning with min_count={min_count} leaves no training documents"
        )));
    }
    let stats = enumerate_labelsets(kept.iter().map(|(id, ls)| (*id, ls)))?;
    Ok(Pruned {
        stats,
        reassignments,
    })
}

/// Per-document misclassification costs, aligned with the stats' assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCosts {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl InstanceCosts {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.values[i])
    }

    pub fn by_id(&self) -> BTreeMap<&str, f64> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `λ_i = L_max / L_{s(i)}`, rescaled to mean 1 over the training documents.
pub fn instance_costs(stats: &LabelsetStats) -> InstanceCosts {
    let l_max = stats.max_count() as f64;
    let raw: Vec<f64> = stats
        .assignments
        .iter()
        .map(|(_, ls)| l_max / stats.counts[ls] as f64)
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    InstanceCosts {
        ids: stats.assignments.iter().map(|(id, _)| id.clone()).collect(),
        values: raw.iter().map(|r| r / mean).collect(),
    }
}

/// Kurtosis-style peakedness of a count histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imbalance {
    pub value: f64,
    /// Set when there is a single bin or all counts are equal; `value` is 0.
    pub degenerate: bool,
}

/// `Σ (L_i − L_max)^4 / ((l − 1) s^4)` with `s² = (1/l) Σ (L_i − L_max)²`.
pub fn imbalance(counts: &[usize]) -> Imbalance {
    let degenerate = Imbalance {
        value: 0.0,
        degenerate: true,
    };
    let l = counts.len();
    if l < 2 {
        return degenerate;
    }
    let l_max = *counts.iter().max().expect("non-empty") as f64;
    let dev: Vec<f64> = counts.iter().map(|&c| c as f64 - l_max).collect();
    let s2 = dev.iter().map(|d| d * d).sum::<f64>() / l as f64;
    if s2 == 0.0 {
        return degenerate;
    }
    let fourth: f64 = dev.iter().map(|d| d.powi(4)).sum();
    Imbalance {
        value: fourth / ((l - 1) as f64 * s2 * s2),
        degenerate: false,
    }
}

pub fn labelset_imbalance(stats: &LabelsetStats) -> Imbalance {
    let counts: Vec<usize> = stats.counts.values().copied().collect();
    imbalance(&counts)
}

/// Same statistic over per-label counts.
pub fn label_imbalance(label_counts: &[usize]) -> Imbalance {
    imbalance(label_counts)
}
