//! Holdout splitting, binary and multi-label metrics, and the benchmark
//! harness that compares necessity learners on one shared split.

mod planted;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ImageCategory};
use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, TrainedModel};

pub use planted::{generate_planted_corpus, NEGATIVE_TOKENS, SIGNAL_TOKENS};

/// Stratified holdout. Reports are grouped by `has_image` (absent labels
/// form their own group); each group is shuffled with the seeded RNG and
/// the train quota is split across groups by largest remainder so the train
/// side has exactly `round(ratio * n)` reports. Both sides keep corpus order.
pub fn split(corpus: &Corpus, ratio: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Input(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(Error::DegenerateCorpus(format!("cannot split {n} reports")));
    }
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateCorpus(format!(
            "ratio {ratio} on {n} reports leaves one side empty"
        )));
    }

    let mut groups: [Vec<usize>; 3] = Default::default();
    for (i, r) in corpus.iter().enumerate() {
        let g = match r.has_image {
            Some(true) => 0,
            Some(false) => 1,
            None => 2,
        };
        groups[g].push(i);
    }

    let exact: Vec<f64> = groups.iter().map(|g| ratio * g.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = n_train - quota.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..3).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for g in by_remainder {
        if remaining == 0 {
            break;
        }
        if quota[g] < groups[g].len() {
            quota[g] += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = vec![false; n];
    for (g, members) in groups.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        for &i in &members[..quota[g]] {
            train[i] = true;
        }
    }
    let test: Vec<bool> = train.iter().map(|t| !t).collect();
    Ok((
        corpus.select(
            &train,
            format!("{} | train(ratio={ratio}, seed={seed})", corpus.provenance),
        ),
        corpus.select(
            &test,
            format!("{} | test(ratio={ratio}, seed={seed})", corpus.provenance),
        ),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn binary_metrics(preds: &[bool], truth: &[bool]) -> Result<BinaryMetrics> {
    if preds.len() != truth.len() || preds.is_empty() {
        return Err(Error::Input(format!(
            "need equal non-empty lengths, got {} predictions and {} labels",
            preds.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in preds.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio_or_zero(tp, tp + fp);
    let recall = ratio_or_zero(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BinaryMetrics {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelMetrics {
    /// Categories, out of ten, on which prediction and truth agree.
    pub correct_counts: Vec<u8>,
    pub avg_correct: f64,
    pub frac_ge5: f64,
    pub frac_gt5: f64,
}

/// Per-category agreement between a predicted and a true category set.
pub fn correct_count(pred: &BTreeSet<ImageCategory>, truth: &BTreeSet<ImageCategory>) -> u8 {
    ImageCategory::ALL
        .iter()
        .filter(|c| pred.contains(c) == truth.contains(c))
        .count() as u8
}

pub fn multilabel_metrics(
    pred_sets: &[BTreeSet<ImageCategory>],
    truth_sets: &[BTreeSet<ImageCategory>],
) -> Result<MultiLabelMetrics> {
    if pred_sets.len() != truth_sets.len() || pred_sets.is_empty() {
        return Err(Error::Input(format!(
            "need equal non-empty lengths, got {} predictions and {} labels",
            pred_sets.len(),
            truth_sets.len()
        )));
    }
    Ok(metrics_from_counts(
        pred_sets
            .iter()
            .zip(truth_sets)
            .map(|(p, t)| correct_count(p, t))
            .collect(),
    ))
}

fn metrics_from_counts(correct_counts: Vec<u8>) -> MultiLabelMetrics {
    let n = correct_counts.len() as f64;
    let share =
        |pred: fn(u8) -> bool| correct_counts.iter().filter(|&&c| pred(c)).count() as f64 / n;
    MultiLabelMetrics {
        avg_correct: correct_counts.iter().map(|&c| f64::from(c)).sum::<f64>() / n,
        frac_ge5: share(|c| c >= 5),
        frac_gt5: share(|c| c > 5),
        correct_counts,
    }
}

/// Evaluation of a trained model on a labeled test corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_binary: usize,
    pub binary: BinaryMetrics,
    pub n_multilabel: usize,
    pub multilabel: Option<MultiLabelMetrics>,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let b = &self.binary;
        let mut out = String::new();
        let _ = writeln!(out, "necessity ({} reports)", self.n_binary);
        let _ = writeln!(out, "  tp {}  fp {}  fn {}  tn {}", b.tp, b.fp, b.fn_, b.tn);
        let _ = writeln!(
            out,
            "  precision {:.6}  recall {:.6}  f1 {:.6}",
            b.precision, b.recall, b.f1
        );
        match &self.multilabel {
            Some(m) => {
                let _ = writeln!(out, "categories ({} images)", self.n_multilabel);
                let _ = writeln!(
                    out,
                    "  avg_correct {:.6}  frac_ge5 {:.6}  frac_gt5 {:.6}",
                    m.avg_correct, m.frac_ge5, m.frac_gt5
                );
            }
            None => {
                let _ = writeln!(out, "categories: no labeled image reports in the test set");
            }
        }
        out
    }
}

/// Necessity verdicts through the full analyze path on every report with
/// `has_image`; category agreement on image-bearing reports with a
/// non-conflicted label vector, scored from the recommender directly.
pub fn evaluate_model(model: &TrainedModel, test: &Corpus) -> Result<EvaluationReport> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    let mut pred_sets = Vec::new();
    let mut truth_sets = Vec::new();
    for r in test.iter() {
        let Some(has_image) = r.has_image else {
            return Err(Error::MissingLabel {
                id: r.id.clone(),
                field: "has_image",
            });
        };
        let x = model.features.encode(r)?;
        preds.push(model.necessity_verdict(r, &x)?.0);
        truth.push(has_image);
        if let (true, Some(lv)) = (has_image, r.label_vector.as_ref()) {
            if !lv.is_conflicted() {
                let ranked = model.recommend(&x)?;
                pred_sets.push(ranked.into_iter().map(|(c, _)| c).collect());
                truth_sets.push(crate::corpus::binarize_labels(lv));
            }
        }
    }
    let binary = binary_metrics(&preds, &truth)?;
    let multilabel = if pred_sets.is_empty() {
        None
    } else {
        Some(multilabel_metrics(&pred_sets, &truth_sets)?)
    };
    Ok(EvaluationReport {
        n_binary: preds.len(),
        binary,
        n_multilabel: pred_sets.len(),
        multilabel,
    })
}

/// A necessity learner to benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkModel {
    RandomForest,
    GaussianNb,
    LinearSvm,
    /// The full stage-1 ensemble with its learned threshold.
    Ensemble,
}

impl BenchmarkModel {
    pub const DEFAULT: [BenchmarkModel; 4] = [
        BenchmarkModel::RandomForest,
        BenchmarkModel::GaussianNb,
        BenchmarkModel::LinearSvm,
        BenchmarkModel::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkModel::RandomForest => "random_forest",
            BenchmarkModel::GaussianNb => "gaussian_nb",
            BenchmarkModel::LinearSvm => "linear_svm",
            BenchmarkModel::Ensemble => "ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub model: String,
    pub result: std::result::Result<BinaryMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

const COLUMNS: [&str; 8] = ["model", "tp", "fp", "fn", "tn", "precision", "recall", "f1"];

fn metric_cells(m: &BinaryMetrics) -> [String; 7] {
    [
        m.tp.to_string(),
        m.fp.to_string(),
        m.fn_.to_string(),
        m.tn.to_string(),
        format!("{:.6}", m.precision),
        format!("{:.6}", m.recall),
        format!("{:.6}", m.f1),
    ]
}

impl BenchmarkTable {
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.model);
            match &row.result {
                Ok(m) => {
                    for cell in metric_cells(m) {
                        out.push(',');
                        out.push_str(&cell);
                    }
                }
                Err(_) => out.push_str(",,,,,,,"),
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain text; failed rows show their error after the name.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut line = vec![row.model.clone()];
                match &row.result {
                    Ok(m) => line.extend(metric_cells(m)),
                    Err(e) => line.push(format!("error: {e}")),
                }
                line
            })
            .collect();
        let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
        for line in &cells {
            if line.len() == COLUMNS.len() {
                for (w, c) in widths.iter_mut().zip(line) {
                    *w = (*w).max(c.len());
                }
            } else {
                widths[0] = widths[0].max(line[0].len());
            }
        }
        let render = |line: &[String]| -> String {
            let mut s = String::new();
            for (i, c) in line.iter().enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                if i == 0 {
                    let _ = write!(s, "{c:<w$}", w = widths[0]);
                } else if line.len() == COLUMNS.len() {
                    let _ = write!(s, "{c:>w$}", w = widths[i]);
                } else {
                    s.push_str(c);
                }
            }
            s.trim_end().to_string()
        };
        let header: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
        let mut out = render(&header);
        out.push('\n');
        for line in &cells {
            out.push_str(&render(line));
            out.push('\n');
        }
        out
    }
}

/// Train each configured learner on the train side of one shared split and
/// score it on the test side. A failing row records its error and the other
/// rows still run.
pub fn benchmark(
    corpus: &Corpus,
    models: &[BenchmarkModel],
    config: &PipelineConfig,
    ratio: f64,
    seed: u64,
) -> Result<BenchmarkTable> {
    if models.is_empty() {
        return Err(Error::Config("benchmark needs at least one model".into()));
    }
    let (train, test) = split(corpus, ratio, seed)?;
    let truth: Vec<bool> = test
        .iter()
        .map(|r| {
            r.has_image.ok_or_else(|| Error::MissingLabel {
                id: r.id.clone(),
                field: "has_image",
            })
        })
        .collect::<Result<_>>()?;
    let rows = models
        .par_iter()
        .map(|&m| BenchmarkRow {
            model: m.name().to_string(),
            result: benchmark_row(m, &train, &test, &truth, config, seed)
                .map_err(|e| e.to_string()),
        })
        .collect();
    Ok(BenchmarkTable { rows })
}

fn benchmark_row(
    model: BenchmarkModel,
    train: &Corpus,
    test: &Corpus,
    truth: &[bool],
    config: &PipelineConfig,
    seed: u64,
) -> Result<BinaryMetrics> {
    use crate::pipeline::{train_necessity, NecessityKind};
    let kinds = match model {
        BenchmarkModel::RandomForest => vec![NecessityKind::RandomForest],
        BenchmarkModel::GaussianNb => vec![NecessityKind::GaussianNb],
        BenchmarkModel::LinearSvm => vec![NecessityKind::LinearSvm],
        BenchmarkModel::Ensemble => config.necessity_members.clone(),
    };
    let single = model != BenchmarkModel::Ensemble;
    let stage = train_necessity(train, config, &kinds, single, seed)?;
    let mut preds = Vec::with_capacity(test.len());
    for r in test.iter() {
        let x = stage.features.encode(r)?;
        preds.push(stage.necessity.verdict(r, &x, &[])?.0);
    }
    binary_metrics(&preds, truth)
}
