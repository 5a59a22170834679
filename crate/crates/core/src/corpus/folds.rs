use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::{rng, Error, Result};

/// Assignment of documents to k cross-validation folds, plus the validation
/// ids carved out of each fold's training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub document_ids: Vec<String>,
    /// Test fold of each document, aligned with `document_ids`.
    pub assignments: Vec<usize>,
    /// Per fold, ids of the training documents held out for validation.
    pub validation_ids: Vec<Vec<String>>,
}

/// Document indices of one fold's three partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_folds(
    dataset: &Dataset,
    k: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<FoldPlan> {
    let n = dataset.len();
    if k < 2 {
        return Err(Error::invalid(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "cannot split {n} documents into {k} folds"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, 0));

    // first n % k folds get one extra document
    let mut assignments = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &doc in &order[pos..pos + size] {
            assignments[doc] = fold;
        }
        pos += size;
    }

    let validation_ids = (0..k)
        .map(|fold| {
            let mut train: Vec<usize> = (0..n).filter(|&i| assignments[i] != fold).collect();
            let take = validation_size(train.len(), validation_fraction);
            train.shuffle(&mut rng::stream(seed, 1 + fold as u64));
            let mut held: Vec<usize> = train[..take].to_vec();
            held.sort_unstable();
            held.into_iter()
                .map(|i| dataset.documents[i].id.clone())
                .collect()
        })
        .collect();

    Ok(FoldPlan {
        k,
        seed,
        validation_fraction,
        document_ids: dataset.documents.iter().map(|d| d.id.clone()).collect(),
        assignments,
        validation_ids,
    })
}

fn validation_size(train_len: usize, fraction: f64) -> usize {
    if train_len < 2 {
        return 0;
    }
    ((train_len as f64 * fraction).round() as usize).clamp(1, train_len - 1)
}

impl FoldPlan {
    pub fn split(&self, fold: usize) -> Result<FoldSplit> {
        if fold >= self.k {
            return Err(Error::invalid(format!(
                "fold {fold} out of range for k={}",
                self.k
            )));
        }
        let held: HashSet<&str> = self.validation_ids[fold]
            .iter()
            .map(String::as_str)
            .collect();
        let mut split = FoldSplit {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for (i, (&f, id)) in self.assignments.iter().zip(&self.document_ids).enumerate() {
            if f == fold {
                split.test.push(i);
            } else if held.contains(id.as_str()) {
                split.validation.push(i);
            } else {
                split.train.push(i);
            }
        }
        Ok(split)
    }

    /// Checks the plan was built for this dataset's documents.
    pub fn check_matches(&self, dataset: &Dataset) -> Result<()> {
        let same = self.document_ids.len() == dataset.len()
            && self
                .document_ids
                .iter()
                .zip(&dataset.documents)
                .all(|(a, d)| *a == d.id);
        if same {
            Ok(())
        } else {
            Err(Error::invalid(
                "fold plan does not match the dataset's documents",
            ))
        }
    }
}
