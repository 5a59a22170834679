//! Multi-label evaluation: Macro/Micro F-measure, pair-product confusion
//! matrices, and the percentage comparisons used to summarize results
//! across two datasets.

use serde::{Deserialize, Serialize};

use crate::{Error, LabelSet, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub macro_fm: f64,
    pub micro_fm: f64,
    pub per_label_f: Vec<f64>,
    /// Row-normalized; rows of labels absent from the truth are zero.
    pub confusion: Vec<Vec<f64>>,
}

impl EvalResult {
    pub fn compute(truth: &[LabelSet], pred: &[LabelSet], n_labels: usize) -> Result<Self> {
        let counts = LabelCounts::tally(truth, pred, n_labels)?;
        Ok(EvalResult {
            macro_fm: counts.macro_fm(),
            micro_fm: counts.micro_fm(),
            per_label_f: counts.per_label_f(),
            confusion: confusion_matrix(truth, pred, n_labels)?,
        })
    }
}

/// Per label: |Y_i|, |Y'_i| and |Y_i ∩ Y'_i|.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LabelCounts {
    truth: Vec<usize>,
    pred: Vec<usize>,
    both: Vec<usize>,
}

impl LabelCounts {
    fn tally(truth: &[LabelSet], pred: &[LabelSet], n_labels: usize) -> Result<Self> {
        check_inputs(truth, pred, n_labels)?;
        let mut c = LabelCounts {
            truth: vec![0; n_labels],
            pred: vec![0; n_labels],
            both: vec![0; n_labels],
        };
        for (t, p) in truth.iter().zip(pred) {
            for &l in t {
                c.truth[l] += 1;
                if p.contains(&l) {
                    c.both[l] += 1;
                }
            }
            for &l in p {
                c.pred[l] += 1;
            }
        }
        Ok(c)
    }

    fn per_label_f(&self) -> Vec<f64> {
        (0..self.truth.len())
            .map(|i| {
                let denom = self.truth[i] + self.pred[i];
                if denom == 0 {
                    0.0
                } else {
                    2.0 * self.both[i] as f64 / denom as f64
                }
            })
            .collect()
    }

    fn macro_fm(&self) -> f64 {
        let f = self.per_label_f();
        f.iter().sum::<f64>() / f.len() as f64
    }

    fn micro_fm(&self) -> f64 {
        let denom: usize = self.truth.iter().sum::<usize>() + self.pred.iter().sum::<usize>();
        if denom == 0 {
            0.0
        } else {
            2.0 * self.both.iter().sum::<usize>() as f64 / denom as f64
        }
    }
}

fn check_inputs(truth: &[LabelSet], pred: &[LabelSet], n_labels: usize) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} true label sets but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if n_labels == 0 {
        return Err(Error::invalid("n_labels must be positive"));
    }
    if let Some(&bad) = truth.iter().chain(pred).flatten().find(|&&l| l >= n_labels) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {n_labels} labels"
        )));
    }
    Ok(())
}

/// Mean of per-label F-measures over all `n_labels`; labels never seen in
/// either truth or prediction contribute 0.
pub fn macro_fm(truth: &[LabelSet], pred: &[LabelSet], n_labels: usize) -> Result<f64> {
    Ok(LabelCounts::tally(truth, pred, n_labels)?.macro_fm())
}

pub fn micro_fm(truth: &[LabelSet], pred: &[LabelSet], n_labels: usize) -> Result<f64> {
    Ok(LabelCounts::tally(truth, pred, n_labels)?.micro_fm())
}

/// Every `(true, predicted)` label pair of a sample adds one to `C[true][pred]`;
/// rows are then divided by their sums.
pub fn confusion_matrix(
    truth: &[LabelSet],
    pred: &[LabelSet],
    n_labels: usize,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(truth, pred, n_labels)?;
    let mut c = vec![vec![0.0; n_labels]; n_labels];
    for (t, p) in truth.iter().zip(pred) {
        for &i in t {
            for &j in p {
                c[i][j] += 1.0;
            }
        }
    }
    for row in &mut c {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
        }
    }
    Ok(c)
}

/// Elementwise mean of equally sized matrices.
pub fn average_matrices(matrices: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let first = matrices.first().ok_or(Error::Empty("matrix list"))?;
    let mut out = vec![vec![0.0; first.first().map_or(0, Vec::len)]; first.len()];
    for m in matrices {
        if m.len() != out.len() || m.iter().any(|r| r.len() != out[0].len()) {
            return Err(Error::invalid("matrices differ in shape"));
        }
        for (o, r) in out.iter_mut().zip(m) {
            for (x, y) in o.iter_mut().zip(r) {
                *x += y;
            }
        }
    }
    let n = matrices.len() as f64;
    out.iter_mut().flatten().for_each(|x| *x /= n);
    Ok(out)
}

/// A score on the less imbalanced (9-emotion) and more imbalanced
/// (16-emotion) dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub smaller: f64,
    pub larger: f64,
}

impl DatasetPair {
    pub fn new(smaller: f64, larger: f64) -> Self {
        DatasetPair { smaller, larger }
    }
}

/// A percentage with its display rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentage {
    pub value: f64,
    pub rounded: i64,
}

impl Percentage {
    fn new(value: f64) -> Self {
        Percentage {
            value,
            rounded: value.round() as i64,
        }
    }
}

/// Mean relative gain of `best` over `reference` across both datasets, ×100.
pub fn fm_increase(best: DatasetPair, reference: DatasetPair) -> Result<Percentage> {
    for v in [
        best.smaller,
        best.larger,
        reference.smaller,
        reference.larger,
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!(
                "F-measure {v} is not a valid score"
            )));
        }
    }
    if reference.smaller == 0.0 || reference.larger == 0.0 {
        return Err(Error::invalid("reference F-measure is zero"));
    }
    let gain_larger = (best.larger - reference.larger) / reference.larger;
    let gain_smaller = (best.smaller - reference.smaller) / reference.smaller;
    Ok(Percentage::new((gain_larger + gain_smaller) / 2.0 * 100.0))
}

/// One model's F-measures with both feature kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub bow: f64,
    pub we: f64,
}

impl FeaturePair {
    pub fn new(bow: f64, we: f64) -> Self {
        FeaturePair { bow, we }
    }

    fn mean(&self) -> f64 {
        (self.bow + self.we) / 2.0
    }
}

/// Relative drop of the feature-averaged F-measure from the smaller to the
/// larger dataset, ×100.
pub fn performance_drop(
    smaller: Option<FeaturePair>,
    larger: Option<FeaturePair>,
) -> Result<Percentage> {
    let smaller =
        smaller.ok_or_else(|| Error::invalid("missing F-measures for the smaller dataset"))?;
    let larger =
        larger.ok_or_else(|| Error::invalid("missing F-measures for the larger dataset"))?;
    let base = smaller.mean();
    if base == 0.0 {
        return Err(Error::invalid("baseline F-measure average is zero"));
    }
    Ok(Percentage::new((base - larger.mean()) / base * 100.0))
}

/// Performance drop of a model family with several variants (e.g. both
/// RankSVM cost modes): the mean of the variants' drops.
pub fn family_performance_drop(
    variants: &[(Option<FeaturePair>, Option<FeaturePair>)],
) -> Result<Percentage> {
    if variants.is_empty() {
        return Err(Error::Empty("model variants"));
    }
    let drops = variants
        .iter()
        .map(|&(s, l)| performance_drop(s, l).map(|p| p.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Percentage::new(
        drops.iter().sum::<f64>() / drops.len() as f64,
    ))
}
