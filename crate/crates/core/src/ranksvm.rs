//! Cost-sensitive RankSVM for multi-label ranking.
//!
//! A linear scorer `s_k(x) = w_k·x + b_k` per label is trained so that every
//! relevant label outranks every irrelevant one by a margin. The objective is
//!
//! ```text
//! ½ Σ_k ‖w_k‖² + C Σ_i λ_i / (|Y_i| |Ȳ_i|) Σ_{p∈Y_i, q∈Ȳ_i} max(0, 1 − (s_p(x_i) − s_q(x_i)))
//! ```
//!
//! where `λ_i` is the instance's misclassification cost (biases are not
//! regularized). It is minimized by stochastic subgradient descent. A label
//! set is read off the ranking with a cutoff that is an affine function of
//! the sorted score vector, fitted by least squares on training scores.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::labelsets::{enumerate_labelsets, instance_costs, prune_labelsets, Reassignment};
use crate::{rng, Error, LabelSet, Result};

pub const FORMAT_VERSION: u32 = 1;

/// How per-instance costs are derived from the training labelsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Costs from the raw labelset distribution.
    Lp,
    /// Costs from the distribution after pruning labelsets rarer than `min_count`.
    Ppt { min_count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Step-size decay horizon; defaults to the number of training instances.
    pub t_decay: Option<f64>,
}

impl Default for RankSvmConfig {
    fn default() -> Self {
        RankSvmConfig {
            c: 1.0,
            epochs: 50,
            seed: 0,
            t_decay: None,
        }
    }
}

/// Label weight vectors and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl RankParams {
    pub fn zeros(n_labels: usize, dim: usize) -> Self {
        RankParams {
            weights: vec![vec![0.0; dim]; n_labels],
            biases: vec![0.0; n_labels],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.biases.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| x.dot(w) + b)
            .collect()
    }

    /// Flattened weights followed by biases.
    pub fn to_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .copied()
            .collect()
    }

    pub fn from_flat(flat: &[f64], n_labels: usize, dim: usize) -> Self {
        assert_eq!(flat.len(), n_labels * (dim + 1));
        RankParams {
            weights: flat[..n_labels * dim]
                .chunks(dim.max(1))
                .take(n_labels)
                .map(<[f64]>::to_vec)
                .collect(),
            biases: flat[n_labels * dim..].to_vec(),
        }
    }
}

/// Affine map from the descending-sorted score vector to a cutoff score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl ThresholdModel {
    pub fn cutoff(&self, scores: &[f64]) -> f64 {
        let sorted = sorted_desc(scores);
        self.intercept
            + sorted
                .iter()
                .zip(&self.coefficients)
                .map(|(s, c)| s * c)
                .sum::<f64>()
    }

    /// Labels scoring above the cutoff; the top label when none does.
    pub fn select(&self, scores: &[f64]) -> LabelSet {
        let cutoff = self.cutoff(scores);
        let tol = 1e-9 * (1.0 + cutoff.abs());
        let above: LabelSet = (0..scores.len())
            .filter(|&k| scores[k] > cutoff + tol)
            .collect();
        if above.is_empty() {
            LabelSet::from([argmax(scores)])
        } else {
            above
        }
    }
}

fn sorted_desc(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Least-squares cutoff regression.
///
/// The target for each document is the midpoint between its lowest relevant
/// and highest irrelevant score, clamped to the document's score range.
/// Documents whose labels are all relevant carry no target and are skipped.
pub fn fit_threshold(train_scores: &[(Vec<f64>, LabelSet)]) -> ThresholdModel {
    let n_labels = train_scores.first().map_or(0, |(s, _)| s.len());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets = Vec::new();
    for (scores, labels) in train_scores {
        let relevant = scores
            .iter()
            .enumerate()
            .filter(|(k, _)| labels.contains(k))
            .map(|(_, &s)| s);
        let irrelevant = scores
            .iter()
            .enumerate()
            .filter(|(k, _)| !labels.contains(k))
            .map(|(_, &s)| s);
        let (Some(min_rel), Some(max_irr)) =
            (relevant.reduce(f64::min), irrelevant.reduce(f64::max))
        else {
            continue;
        };
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        targets.push(((min_rel + max_irr) / 2.0).clamp(lo, hi));
        let mut row = sorted_desc(scores);
        row.push(1.0);
        rows.push(row);
    }
    if rows.is_empty() {
        return ThresholdModel {
            coefficients: vec![0.0; n_labels],
            intercept: 0.0,
        };
    }
    let x = DMatrix::from_fn(rows.len(), n_labels + 1, |i, j| rows[i][j]);
    let y = DVector::from_vec(targets);
    let beta = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .expect("SVD was computed with both singular vector sets");
    ThresholdModel {
        coefficients: beta.iter().take(n_labels).copied().collect(),
        intercept: beta[n_labels],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSvmModel {
    pub format_version: u32,
    pub params: RankParams,
    pub threshold: ThresholdModel,
    pub config: RankSvmConfig,
    pub cost_mode: Option<CostMode>,
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Objective before training, then after each epoch.
    pub objectives: Vec<f64>,
    /// Parameters after each epoch, when requested.
    pub snapshots: Vec<RankParams>,
    pub skipped: usize,
}

/// `(relevant, irrelevant)` label lists, or `None` when either is empty.
fn pairs(labels: &LabelSet, n_labels: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let (rel, irr): (Vec<usize>, Vec<usize>) = (0..n_labels).partition(|k| labels.contains(k));
    (!rel.is_empty() && !irr.is_empty()).then_some((rel, irr))
}

fn cost_weight(c: f64, costs: Option<&[f64]>, i: usize) -> f64 {
    match costs {
        Some(l) => c * l[i],
        None => c,
    }
}

/// Full objective over a training set.
pub fn objective(
    params: &RankParams,
    data: &[(FeatureVector, LabelSet)],
    costs: Option<&[f64]>,
    c: f64,
) -> f64 {
    let n_labels = params.n_labels();
    let reg: f64 = 0.5 * params.weights.iter().flatten().map(|w| w * w).sum::<f64>();
    let mut loss = 0.0;
    for (i, (x, labels)) in data.iter().enumerate() {
        let Some((rel, irr)) = pairs(labels, n_labels) else {
            continue;
        };
        let s = params.scores(x);
        let mut hinge = 0.0;
        for &p in &rel {
            for &q in &irr {
                hinge += (1.0 - (s[p] - s[q])).max(0.0);
            }
        }
        loss += cost_weight(c, costs, i) / (rel.len() * irr.len()) as f64 * hinge;
    }
    reg + loss
}

/// A subgradient of [`objective`]; the gradient wherever no margin sits
/// exactly on a hinge kink.
pub fn subgradient(
    params: &RankParams,
    data: &[(FeatureVector, LabelSet)],
    costs: Option<&[f64]>,
    c: f64,
) -> RankParams {
    let n_labels = params.n_labels();
    let mut g = RankParams {
        weights: params.weights.clone(),
        biases: vec![0.0; n_labels],
    };
    for (i, (x, labels)) in data.iter().enumerate() {
        let Some((rel, irr)) = pairs(labels, n_labels) else {
            continue;
        };
        let s = params.scores(x);
        let coef = cost_weight(c, costs, i) / (rel.len() * irr.len()) as f64;
        for (k, a) in pair_signs(&s, &rel, &irr).into_iter().enumerate() {
            if a != 0 {
                x.add_scaled_to(&mut g.weights[k], -coef * a as f64);
                g.biases[k] -= coef * a as f64;
            }
        }
    }
    g
}

/// Per label, (#violated pairs where it is the relevant side) minus
/// (#violated pairs where it is the irrelevant side).
fn pair_signs(s: &[f64], rel: &[usize], irr: &[usize]) -> Vec<i64> {
    let mut a = vec![0i64; s.len()];
    for &p in rel {
        for &q in irr {
            if 1.0 - (s[p] - s[q]) > 0.0 {
                a[p] += 1;
                a[q] -= 1;
            }
        }
    }
    a
}

/// Weights kept as `scale · V` so the per-step shrinkage of the
/// regularizer costs O(1).
struct ScaledParams {
    scale: f64,
    v: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl ScaledParams {
    fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| self.scale * x.dot(w) + b)
            .collect()
    }

    fn shrink(&mut self, factor: f64) {
        let next = self.scale * factor;
        if next < 1e-9 {
            for w in self.v.iter_mut().flatten() {
                *w *= next;
            }
            self.scale = 1.0;
        } else {
            self.scale = next;
        }
    }

    fn materialize(&self) -> RankParams {
        RankParams {
            weights: self
                .v
                .iter()
                .map(|w| w.iter().map(|x| x * self.scale).collect())
                .collect(),
            biases: self.biases.clone(),
        }
    }
}

pub fn train_ranksvm(
    train: &[(FeatureVector, LabelSet)],
    costs: Option<&[f64]>,
    n_labels: usize,
    config: RankSvmConfig,
) -> Result<(RankSvmModel, TrainTrace)> {
    train_with_trace(train, costs, n_labels, config, false)
}

pub fn train_with_trace(
    train: &[(FeatureVector, LabelSet)],
    costs: Option<&[f64]>,
    n_labels: usize,
    config: RankSvmConfig,
    keep_snapshots: bool,
) -> Result<(RankSvmModel, TrainTrace)> {
    if !(config.c > 0.0) {
        return Err(Error::invalid(format!(
            "C must be positive, got {}",
            config.c
        )));
    }
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be positive"));
    }
    let (first, _) = train.first().ok_or(Error::Empty("RankSVM training set"))?;
    let dim = first.dim();
    if let Some(costs) = costs {
        if costs.len() != train.len() {
            return Err(Error::invalid(format!(
                "{} costs for {} training instances",
                costs.len(),
                train.len()
            )));
        }
        if costs.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("costs must be positive and finite"));
        }
    }
    for (x, labels) in train {
        if x.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.dim(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_labels) {
            return Err(Error::invalid(format!("label {bad} out of range")));
        }
    }

    let usable: Vec<usize> = (0..train.len())
        .filter(|&i| pairs(&train[i].1, n_labels).is_some())
        .collect();
    let skipped = train.len() - usable.len();
    if skipped > 0 {
        log::warn!(
            "skipping {skipped} training documents whose labels are all relevant or all irrelevant"
        );
    }
    if usable.is_empty() {
        return Err(Error::Empty(
            "RankSVM training set after skipping unusable documents",
        ));
    }

    let n = usable.len() as f64;
    let t_decay = config.t_decay.unwrap_or(n);
    let mut state = ScaledParams {
        scale: 1.0,
        v: vec![vec![0.0; dim]; n_labels],
        biases: vec![0.0; n_labels],
    };
    let mut trace = TrainTrace {
        objectives: vec![objective(&state.materialize(), train, costs, config.c)],
        snapshots: Vec::new(),
        skipped,
    };
    let mut rng = rng::stream(config.seed, 0x5a);
    let mut order = usable.clone();
    let mut step = 0u64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, labels) = &train[i];
            let eta = 1.0 / (1.0 + step as f64 / t_decay);
            step += 1;
            let (rel, irr) = pairs(labels, n_labels).expect("usable");
            let s = state.scores(x);
            let coef = cost_weight(config.c, costs, i) / (rel.len() * irr.len()) as f64;
            let signs = pair_signs(&s, &rel, &irr);
            state.shrink(1.0 - eta / n);
            for (k, a) in signs.into_iter().enumerate() {
                if a != 0 {
                    let delta = eta * coef * a as f64;
                    x.add_scaled_to(&mut state.v[k], delta / state.scale);
                    state.biases[k] += delta;
                }
            }
        }
        let params = state.materialize();
        trace
            .objectives
            .push(objective(&params, train, costs, config.c));
        if keep_snapshots {
            trace.snapshots.push(params);
        }
    }

    let params = state.materialize();
    let train_scores: Vec<(Vec<f64>, LabelSet)> = train
        .iter()
        .map(|(x, l)| (params.scores(x), l.clone()))
        .collect();
    let threshold = fit_threshold(&train_scores);
    let model = RankSvmModel {
        format_version: FORMAT_VERSION,
        params,
        threshold,
        config,
        cost_mode: None,
    };
    Ok((model, trace))
}

impl RankSvmModel {
    pub fn n_labels(&self) -> usize {
        self.params.n_labels()
    }

    pub fn score_labels(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if x.dim() != self.params.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim(),
                actual: x.dim(),
            });
        }
        Ok(self.params.scores(x))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<LabelSet> {
        Ok(self.threshold.select(&self.score_labels(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: RankSvmModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: model.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

/// Training instances and their costs under a cost mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CostAssignment {
    /// Indices (into the input) of the instances to train on.
    pub kept: Vec<usize>,
    /// Cost of each kept instance, aligned with `kept`.
    pub costs: Vec<f64>,
}

/// Derives instance costs for a training set. Under PPT, costs come from the
/// pruned labelset distribution (documents take their reassigned labelset)
/// and documents that pruning drops are excluded; ranking targets stay the
/// original label sets.
pub fn derive_costs(ids: &[&str], labels: &[&LabelSet], mode: CostMode) -> Result<CostAssignment> {
    let stats = enumerate_labelsets(ids.iter().copied().zip(labels.iter().copied()))?;
    let (stats, dropped): (_, BTreeMap<String, Reassignment>) = match mode {
        CostMode::Lp => (stats, BTreeMap::new()),
        CostMode::Ppt { min_count } => {
            let pruned = prune_labelsets(&stats, min_count)?;
            (pruned.stats, pruned.reassignments)
        }
    };
    let by_id = instance_costs(&stats)
        .by_id()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect::<BTreeMap<_, _>>();
    let mut kept = Vec::new();
    let mut costs = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if matches!(dropped.get(*id), Some(Reassignment::Dropped)) {
            continue;
        }
        kept.push(i);
        costs.push(by_id[*id]);
    }
    Ok(CostAssignment { kept, costs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: &[f64]) -> FeatureVector {
        FeatureVector::Dense(v.to_vec())
    }

    fn labels(l: &[usize]) -> LabelSet {
        l.iter().copied().collect()
    }

    #[test]
    fn separable_one_dimensional_toy() {
        let train = vec![
            (dense(&[1.0]), labels(&[0])),
            (dense(&[-1.0]), labels(&[1])),
        ];
        let (m, trace) = train_ranksvm(
            &train,
            None,
            2,
            RankSvmConfig {
                epochs: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let pos = m.score_labels(&dense(&[1.0])).unwrap();
        let neg = m.score_labels(&dense(&[-1.0])).unwrap();
        assert!(pos[0] > pos[1]);
        assert!(neg[1] > neg[0]);
        assert!(trace.objectives.last().unwrap() <= &trace.objectives[0]);
        assert_eq!(m.predict(&dense(&[1.0])).unwrap(), labels(&[0]));
        assert_eq!(m.predict(&dense(&[-1.0])).unwrap(), labels(&[1]));
    }

    #[test]
    fn invalid_hyperparameters() {
        let train = vec![(dense(&[1.0]), labels(&[0]))];
        let zero_epochs = RankSvmConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_ranksvm(&train, None, 2, zero_epochs).is_err());
        let bad_c = RankSvmConfig {
            c: 0.0,
            ..Default::default()
        };
        assert!(train_ranksvm(&train, None, 2, bad_c).is_err());
        assert!(train_ranksvm(&train, Some(&[1.0, 2.0]), 2, RankSvmConfig::default()).is_err());
    }

    #[test]
    fn all_relevant_documents_are_skipped() {
        let train = vec![
            (dense(&[1.0]), labels(&[0])),
            (dense(&[0.5]), labels(&[0, 1])),
            (dense(&[-1.0]), labels(&[1])),
        ];
        let (_, trace) = train_ranksvm(
            &train,
            None,
            2,
            RankSvmConfig {
                epochs: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(trace.skipped, 1);
    }

    #[test]
    fn score_linearity() {
        let model = RankSvmModel {
            format_version: FORMAT_VERSION,
            params: RankParams {
                weights: vec![vec![1.0, -2.0], vec![0.5, 0.5]],
                biases: vec![0.0, 0.0],
            },
            threshold: ThresholdModel {
                coefficients: vec![0.0, 0.0],
                intercept: 0.0,
            },
            config: RankSvmConfig::default(),
            cost_mode: None,
        };
        let x = dense(&[0.3, -0.2]);
        let s = model.score_labels(&x).unwrap();
        let s3 = model.score_labels(&dense(&[0.9, -0.6])).unwrap();
        for k in 0..2 {
            assert!((s3[k] - 3.0 * s[k]).abs() < 1e-12);
        }
        assert!(matches!(
            model.score_labels(&dense(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));

        let mut zero = model.clone();
        zero.params = RankParams::zeros(2, 2);
        assert_eq!(zero.score_labels(&x).unwrap(), vec![0.0, 0.0]);
        zero.params.biases = vec![0.25, -1.0];
        assert_eq!(
            zero.score_labels(&dense(&[0.0, 0.0])).unwrap(),
            vec![0.25, -1.0]
        );
    }

    #[test]
    fn threshold_separates_clusters() {
        let data = vec![
            (vec![3.0, 2.9, -1.0, -1.2], labels(&[0, 1])),
            (vec![-0.8, 2.5, -1.1, -0.9], labels(&[1])),
            (vec![-1.0, -1.3, 2.0, 1.8], labels(&[2, 3])),
            (vec![2.2, -0.7, -1.0, -1.4], labels(&[0])),
        ];
        let t = fit_threshold(&data);
        for (s, l) in &data {
            let cut = t.cutoff(s);
            let min_rel = l.iter().map(|&k| s[k]).fold(f64::INFINITY, f64::min);
            let max_irr = (0..4)
                .filter(|k| !l.contains(k))
                .map(|k| s[k])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                max_irr < cut && cut < min_rel,
                "{cut} not in ({max_irr}, {min_rel})"
            );
            assert_eq!(&t.select(s), l);
        }
    }

    #[test]
    fn constant_scores_yield_lowest_index() {
        let data = vec![(vec![0.5; 4], labels(&[2])), (vec![0.5; 4], labels(&[1]))];
        let t = fit_threshold(&data);
        assert_eq!(t.select(&[0.5; 4]), labels(&[0]));
        let none = ThresholdModel {
            coefficients: vec![0.0; 3],
            intercept: 10.0,
        };
        assert_eq!(none.select(&[1.0, 3.0, 3.0]), labels(&[1]));
    }

    #[test]
    fn flat_round_trip() {
        let p = RankParams {
            weights: vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            biases: vec![7.0, 8.0, 9.0],
        };
        assert_eq!(RankParams::from_flat(&p.to_flat(), 3, 2), p);
    }

    #[test]
    fn ppt_costs_drop_unassignable_documents() {
        let sets: Vec<LabelSet> = [&[0][..], &[0], &[0], &[1, 2], &[1]]
            .iter()
            .map(|l| labels(l))
            .collect();
        let ids = ["a", "b", "c", "d", "e"];
        let refs: Vec<&LabelSet> = sets.iter().collect();
        let lp = derive_costs(&ids, &refs, CostMode::Lp).unwrap();
        assert_eq!(lp.kept, vec![0, 1, 2, 3, 4]);
        // {0}:3, {1,2}:1, {1}:1 → raw λ 1,1,1,3,3 → mean 9/5
        assert!((lp.costs[3] - 3.0 * 5.0 / 9.0).abs() < 1e-12);
        let ppt = derive_costs(&ids, &refs, CostMode::Ppt { min_count: 2 }).unwrap();
        assert_eq!(ppt.kept, vec![0, 1, 2]);
        assert!(ppt.costs.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    }
}
