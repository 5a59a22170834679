use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, FeatureKind, ModelKind};
use crate::corpus::CleanReport;
use crate::labelsets::Imbalance;
use crate::metrics::{
    family_performance_drop, fm_increase, performance_drop, DatasetPair, FeaturePair, Percentage,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub datasets: Vec<DatasetSummary>,
    pub results: Vec<ExperimentResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub k: usize,
    pub validation_fraction: f64,
    /// Generator seed of each synthetic dataset, by dataset name.
    pub synthetic_seeds: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_documents: usize,
    pub label_names: Vec<String>,
    pub label_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleaning: Option<CleanReport>,
    pub label_imbalance: Imbalance,
    pub labelset_imbalance: Imbalance,
    /// Most populated labelset first.
    pub labelset_histogram: Vec<HistogramRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    /// Label names joined with `+`.
    pub labelset: String,
    pub count: usize,
}

/// Mean and sample standard deviation of per-fold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub folds: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("fold values"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Summary {
            mean,
            std,
            folds: values,
        })
    }
}

/// What was picked on a fold's validation split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_micro_fm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub experiment: Experiment,
    pub macro_fm: Summary,
    pub micro_fm: Summary,
    /// Per-label F-measure averaged over folds.
    pub per_label_f: Vec<f64>,
    /// Row-normalized confusion matrix averaged over folds.
    pub confusion: Vec<Vec<f64>>,
    pub tuning: Vec<Tuning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "Macro-FM")]
    Macro,
    #[serde(rename = "Micro-FM")]
    Micro,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Macro => "Macro-FM",
            Measure::Micro => "Micro-FM",
        }
    }
}

/// One experiment's score on the less and the more imbalanced dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub experiment: Experiment,
    pub smaller: f64,
    pub larger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedStats {
    /// Highest mean score over both datasets.
    pub best: Option<Experiment>,
    /// Gain of `best` over NB-BOW.
    pub increase_vs_baseline: Option<Percentage>,
    /// Gain of `best` over the top RankSVM experiment of each dataset.
    pub increase_vs_best_ranksvm: Option<Percentage>,
    /// Drop from the smaller to the larger dataset per model family.
    pub performance_drop: Vec<(String, Percentage)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub statistic: String,
    pub measure: Measure,
    pub published: i64,
    pub computed: Option<i64>,
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedReport {
    pub smaller: String,
    pub larger: String,
    pub macro_fm: DerivedStats,
    pub micro_fm: DerivedStats,
    /// Published percentages next to the ones computed here.
    pub claims: Vec<Claim>,
}

const BASELINE: Experiment = Experiment {
    model: ModelKind::Nb,
    feature: FeatureKind::Bow,
};

pub fn derived_statistics(rows: &[ScoreRow]) -> DerivedStats {
    let find = |e: Experiment| rows.iter().find(|r| r.experiment == e);
    let best = rows.iter().fold(None::<&ScoreRow>, |acc, r| match acc {
        Some(b) if b.smaller + b.larger >= r.smaller + r.larger => Some(b),
        _ => Some(r),
    });
    let pair = |r: &ScoreRow| DatasetPair::new(r.smaller, r.larger);

    let increase_vs_baseline = best
        .zip(find(BASELINE))
        .and_then(|(b, base)| fm_increase(pair(b), pair(base)).ok());

    let ranksvm: Vec<&ScoreRow> = rows
        .iter()
        .filter(|r| r.experiment.model.is_ranksvm())
        .collect();
    let increase_vs_best_ranksvm = match (best, ranksvm.is_empty()) {
        (Some(b), false) => {
            let top = |f: fn(&ScoreRow) -> f64| {
                ranksvm
                    .iter()
                    .map(|r| f(r))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            fm_increase(
                pair(b),
                DatasetPair::new(top(|r| r.smaller), top(|r| r.larger)),
            )
            .ok()
        }
        _ => None,
    };

    let features = |m: ModelKind| {
        let get = |f| find(Experiment::new(m, f));
        match (get(FeatureKind::Bow), get(FeatureKind::We)) {
            (Some(b), Some(w)) => (
                Some(FeaturePair::new(b.smaller, w.smaller)),
                Some(FeaturePair::new(b.larger, w.larger)),
            ),
            _ => (None, None),
        }
    };
    let mut performance_drop_rows = Vec::new();
    for (family, members) in [
        ("NB", vec![ModelKind::Nb]),
        ("RankSVM", vec![ModelKind::RankSvmPpt, ModelKind::RankSvmLp]),
        ("LSTM-Att", vec![ModelKind::LstmAtt]),
    ] {
        let variants: Vec<_> = members.into_iter().map(features).collect();
        let pd = if variants.len() == 1 {
            performance_drop(variants[0].0, variants[0].1)
        } else {
            family_performance_drop(&variants)
        };
        if let Ok(pd) = pd {
            performance_drop_rows.push((family.to_string(), pd));
        }
    }

    DerivedStats {
        best: best.map(|b| b.experiment),
        increase_vs_baseline,
        increase_vs_best_ranksvm,
        performance_drop: performance_drop_rows,
    }
}

/// Percentages stated in the published results discussion.
pub const PUBLISHED_CLAIMS: [(&str, Measure, i64); 10] = [
    ("increase vs NB-BOW", Measure::Macro, 37),
    ("increase vs NB-BOW", Measure::Micro, 44),
    ("increase vs best RankSVM", Measure::Macro, 18),
    ("increase vs best RankSVM", Measure::Micro, 23),
    ("performance drop LSTM-Att", Measure::Macro, 15),
    ("performance drop LSTM-Att", Measure::Micro, 11),
    ("performance drop RankSVM", Measure::Macro, 18),
    ("performance drop RankSVM", Measure::Micro, 17),
    ("performance drop NB", Measure::Macro, 38),
    ("performance drop NB", Measure::Micro, 41),
];

fn computed_claim(stats: &DerivedStats, statistic: &str) -> Option<i64> {
    match statistic {
        "increase vs NB-BOW" => stats.increase_vs_baseline.map(|p| p.rounded),
        "increase vs best RankSVM" => stats.increase_vs_best_ranksvm.map(|p| p.rounded),
        s => {
            let family = s.strip_prefix("performance drop ")?;
            stats
                .performance_drop
                .iter()
                .find(|(f, _)| f == family)
                .map(|(_, p)| p.rounded)
        }
    }
}

pub fn claims(macro_fm: &DerivedStats, micro_fm: &DerivedStats) -> Vec<Claim> {
    PUBLISHED_CLAIMS
        .iter()
        .map(|&(statistic, measure, published)| {
            let stats = match measure {
                Measure::Macro => macro_fm,
                Measure::Micro => micro_fm,
            };
            let computed = computed_claim(stats, statistic);
            Claim {
                statistic: statistic.to_string(),
                measure,
                published,
                computed,
                matches: computed.map(|c| c == published),
            }
        })
        .collect()
}

pub fn derived_report(
    smaller: &str,
    larger: &str,
    macro_rows: &[ScoreRow],
    micro_rows: &[ScoreRow],
) -> DerivedReport {
    let macro_fm = derived_statistics(macro_rows);
    let micro_fm = derived_statistics(micro_rows);
    DerivedReport {
        smaller: smaller.to_string(),
        larger: larger.to_string(),
        claims: claims(&macro_fm, &micro_fm),
        macro_fm,
        micro_fm,
    }
}

/// Published 9-emotion and 16-emotion results as
/// `(experiment, macro9, micro9, macro16, micro16)`.
pub const PUBLISHED_RESULTS: [(&str, f64, f64, f64, f64); 8] = [
    ("NB-BOW", 0.3915, 0.3920, 0.2602, 0.2608),
    ("NB-WE", 0.3715, 0.3617, 0.2512, 0.2356),
    ("RankSVM-LP-BOW", 0.3882, 0.3940, 0.3523, 0.3568),
    ("RankSVM-LP-WE", 0.4234, 0.4236, 0.3342, 0.3391),
    ("RankSVM-PPT-BOW", 0.4275, 0.4249, 0.3406, 0.3449),
    ("RankSVM-PPT-WE", 0.3930, 0.3920, 0.3432, 0.3469),
    ("LSTM-Att-BOW", 0.4297, 0.4492, 0.3577, 0.3945),
    ("LSTM-Att-WE", 0.4685, 0.4832, 0.4020, 0.4314),
];

/// Score rows of the published results for one measure.
pub fn published_rows(measure: Measure) -> Vec<ScoreRow> {
    PUBLISHED_RESULTS
        .iter()
        .map(|&(name, ma9, mi9, ma16, mi16)| {
            let (smaller, larger) = match measure {
                Measure::Macro => (ma9, ma16),
                Measure::Micro => (mi9, mi16),
            };
            ScoreRow {
                experiment: Experiment::from_str(name).expect("valid name"),
                smaller,
                larger,
            }
        })
        .collect()
}

pub fn published_derived_report() -> DerivedReport {
    derived_report(
        "emotions9",
        "emotions16",
        &published_rows(Measure::Macro),
        &published_rows(Measure::Micro),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::invalid(format!("unknown report format `{s}`"))),
        }
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn result(&self, dataset: &str, experiment: Experiment) -> Option<&ExperimentResult> {
        self.results
            .iter()
            .find(|r| r.dataset == dataset && r.experiment == experiment)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn file(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(body.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Writes the report into `dir`: `report.json` for JSON; for CSV the flat
/// results table, per-fold values, labelset histograms, confusion grids and
/// the derived statistics. Returns the paths written.
pub fn emit_report(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if report.results.is_empty() {
        return Err(Error::Empty("experiment results"));
    }
    if formats.is_empty() {
        return Err(Error::invalid("no report format requested"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    if formats.contains(&ReportFormat::Json) {
        w.file("report.json", &(report.to_json()? + "\n"))?;
    }
    if formats.contains(&ReportFormat::Csv) {
        let mut s = String::from(
            "dataset,experiment,macro_fm_mean,macro_fm_std,micro_fm_mean,micro_fm_std,folds\n",
        );
        for r in &report.results {
            s += &format!(
                "{},{},{:.4},{:.4},{:.4},{:.4},{}\n",
                csv_field(&r.dataset),
                r.experiment,
                r.macro_fm.mean,
                r.macro_fm.std,
                r.micro_fm.mean,
                r.micro_fm.std,
                r.macro_fm.folds.len()
            );
        }
        w.file("results.csv", &s)?;

        let mut s = String::from("dataset,experiment,fold,macro_fm,micro_fm,c,threshold,epoch\n");
        for r in &report.results {
            for (i, (ma, mi)) in r.macro_fm.folds.iter().zip(&r.micro_fm.folds).enumerate() {
                let t = r.tuning.get(i).cloned().unwrap_or_default();
                s += &format!(
                    "{},{},{i},{ma},{mi},{},{},{}\n",
                    csv_field(&r.dataset),
                    r.experiment,
                    opt(t.c),
                    opt(t.threshold),
                    opt(t.epoch)
                );
            }
        }
        w.file("folds.csv", &s)?;

        for d in &report.datasets {
            let mut s = String::from("labelset,count\n");
            for row in &d.labelset_histogram {
                s += &format!("{},{}\n", csv_field(&row.labelset), row.count);
            }
            w.file(&format!("labelsets_{}.csv", d.name), &s)?;
        }

        for r in &report.results {
            let names = report
                .datasets
                .iter()
                .find(|d| d.name == r.dataset)
                .map(|d| d.label_names.clone())
                .unwrap_or_else(|| (0..r.confusion.len()).map(|i| i.to_string()).collect());
            let mut s = String::from("true\\predicted");
            for n in &names {
                s += &format!(",{}", csv_field(n));
            }
            s.push('\n');
            for (name, row) in names.iter().zip(&r.confusion) {
                s += &csv_field(name);
                for v in row {
                    s += &format!(",{v:.6}");
                }
                s.push('\n');
            }
            w.file(&format!("confusion_{}_{}.csv", r.dataset, r.experiment), &s)?;
        }

        if let Some(d) = &report.derived {
            let mut s = String::from("measure,statistic,computed,published,matches\n");
            for c in &d.claims {
                s += &format!(
                    "{},{},{},{},{}\n",
                    c.measure.name(),
                    c.statistic,
                    opt(c.computed),
                    c.published,
                    opt(c.matches)
                );
            }
            w.file("derived.csv", &s)?;
        }
    }
    Ok(w.written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn claim<'a>(d: &'a DerivedReport, statistic: &str, measure: Measure) -> &'a Claim {
        d.claims
            .iter()
            .find(|c| c.statistic == statistic && c.measure == measure)
            .unwrap()
    }

    #[test]
    fn published_tables_reproduce_the_stated_figures() {
        let d = published_derived_report();
        assert_eq!(d.macro_fm.best, Some("LSTM-Att-WE".parse().unwrap()));
        assert_eq!(d.micro_fm.best, Some("LSTM-Att-WE".parse().unwrap()));
        for (stat, m, computed, matches) in [
            ("increase vs NB-BOW", Measure::Macro, 37, true),
            ("increase vs NB-BOW", Measure::Micro, 44, true),
            ("performance drop LSTM-Att", Measure::Macro, 15, true),
            ("performance drop LSTM-Att", Measure::Micro, 11, true),
            ("increase vs best RankSVM", Measure::Macro, 12, false),
            ("increase vs best RankSVM", Measure::Micro, 17, false),
            ("performance drop RankSVM", Measure::Macro, 16, false),
            ("performance drop RankSVM", Measure::Micro, 15, false),
            ("performance drop NB", Measure::Macro, 33, false),
            ("performance drop NB", Measure::Micro, 34, false),
        ] {
            let c = claim(&d, stat, m);
            assert_eq!(c.computed, Some(computed), "{stat} {m:?}");
            assert_eq!(c.matches, Some(matches), "{stat} {m:?}");
        }
    }

    #[test]
    fn missing_experiments_leave_statistics_out() {
        let rows = vec![ScoreRow {
            experiment: "LSTM-Att-WE".parse().unwrap(),
            smaller: 0.5,
            larger: 0.4,
        }];
        let s = derived_statistics(&rows);
        assert_eq!(s.best, Some(rows[0].experiment));
        assert!(s.increase_vs_baseline.is_none());
        assert!(s.increase_vs_best_ranksvm.is_none());
        assert!(s.performance_drop.is_empty());
        assert!(derived_statistics(&[]).best.is_none());
    }

    #[test]
    fn identical_rows_give_zero_increase() {
        let rows: Vec<ScoreRow> = ["NB-BOW", "NB-WE"]
            .iter()
            .map(|n| ScoreRow {
                experiment: n.parse().unwrap(),
                smaller: 0.4,
                larger: 0.4,
            })
            .collect();
        let s = derived_statistics(&rows);
        assert_eq!(s.best, Some(rows[0].experiment));
        assert_eq!(s.increase_vs_baseline.unwrap().rounded, 0);
        assert_eq!(
            s.performance_drop,
            vec![(
                "NB".to_string(),
                Percentage {
                    value: 0.0,
                    rounded: 0
                }
            )]
        );
    }

    #[test]
    fn summary_mean_and_sample_std() {
        let s = Summary::of(vec![0.2, 0.4, 0.6]).unwrap();
        assert!((s.mean - 0.4).abs() < 1e-12);
        assert!((s.std - 0.2).abs() < 1e-12);
        assert_eq!(Summary::of(vec![0.3]).unwrap().std, 0.0);
        assert!(Summary::of(vec![]).is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
