mod oracles;

use std::collections::BTreeSet;

use proptest::prelude::*;

use shotadvisor::corpus::{Corpus, ImageCategory, IssueReport};
use shotadvisor::eval::{
    benchmark, binary_metrics, correct_count, generate_planted_corpus, multilabel_metrics, split,
    BenchmarkModel,
};
use shotadvisor::pipeline::PipelineConfig;

fn bits(mask: u32, len: usize) -> Vec<bool> {
    (0..len).map(|i| mask >> i & 1 == 1).collect()
}

#[test]
fn binary_metrics_match_confusion_oracle_exhaustively() {
    for len in 1..=12usize {
        let cases = 1u32 << len;
        for p in 0..cases {
            let preds = bits(p, len);
            for t in 0..cases {
                let truth = bits(t, len);
                let m = binary_metrics(&preds, &truth).unwrap();
                let (tp, fp, fn_, tn) = oracles::confusion(&preds, &truth);
                assert_eq!((m.tp, m.fp, m.fn_, m.tn), (tp, fp, fn_, tn));
            }
        }
    }
}

#[test]
fn binary_worked_examples() {
    let m = binary_metrics(&[true, true, false, false], &[true, false, false, false]).unwrap();
    assert_eq!((m.precision, m.recall), (0.5, 1.0));
    assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    let m = binary_metrics(&[true, false, true], &[true, false, true]).unwrap();
    assert_eq!(m.f1, 1.0);
    let m = binary_metrics(&[false; 3], &[true, false, true]).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    assert!(binary_metrics(&[true], &[true, false]).is_err());
}

fn category_set(mask: u16) -> BTreeSet<ImageCategory> {
    ImageCategory::ALL
        .iter()
        .filter(|c| mask >> c.index() & 1 == 1)
        .copied()
        .collect()
}

#[test]
fn multilabel_worked_examples() {
    use ImageCategory::*;
    let truth: BTreeSet<_> = [Code, RuntimeError].into();
    let pred: BTreeSet<_> = [RuntimeError, DialogBox].into();
    assert_eq!(correct_count(&pred, &truth), 8);
    assert_eq!(correct_count(&truth, &truth), 10);

    // correct counts 5, 6, 4 against an empty truth: predict 5, 4, 6 categories
    let preds = [
        category_set(0b11111),
        category_set(0b1111),
        category_set(0b111111),
    ];
    let truths = vec![BTreeSet::new(); 3];
    let m = multilabel_metrics(&preds, &truths).unwrap();
    assert_eq!(m.correct_counts, [5, 6, 4]);
    assert_eq!(m.avg_correct, 5.0);
    assert_eq!(m.frac_ge5, 2.0 / 3.0);
    assert_eq!(m.frac_gt5, 1.0 / 3.0);
    assert!(multilabel_metrics(&preds, &truths[..2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn multilabel_fractions_are_ordered(
        pairs in prop::collection::vec((0u16..1024, 0u16..1024), 1..30),
    ) {
        let preds: Vec<_> = pairs.iter().map(|p| category_set(p.0)).collect();
        let truths: Vec<_> = pairs.iter().map(|p| category_set(p.1)).collect();
        let m = multilabel_metrics(&preds, &truths).unwrap();
        prop_assert!(m.frac_gt5 <= m.frac_ge5);
        prop_assert!(m.correct_counts.iter().all(|&c| c <= 10));
        for (p, &c) in pairs.iter().zip(&m.correct_counts) {
            prop_assert_eq!(u32::from(c), 10 - ((p.0 ^ p.1) as u32).count_ones());
        }
    }
}

fn labeled_corpus(labels: &[Option<bool>]) -> Corpus {
    let reports = labels
        .iter()
        .enumerate()
        .map(|(i, &h)| IssueReport {
            has_image: h,
            ..IssueReport::new(format!("r{i}"), "s", "d")
        })
        .collect();
    Corpus::new(reports, "t").unwrap()
}

proptest! {
    #[test]
    fn split_partitions_and_stratifies(
        labels in prop::collection::vec(prop::option::weighted(0.9, any::<bool>()), 2..60),
        ratio in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let corpus = labeled_corpus(&labels);
        let n = labels.len();
        let n_train = (ratio * n as f64).round() as usize;
        prop_assume!(n_train > 0 && n_train < n);
        let (train, test) = split(&corpus, ratio, seed).unwrap();
        prop_assert_eq!(train.len(), n_train);
        prop_assert_eq!(train.len() + test.len(), n);
        let train_ids: BTreeSet<&str> = train.iter().map(|r| r.id.as_str()).collect();
        prop_assert!(test.iter().all(|r| !train_ids.contains(r.id.as_str())));
        for group in [Some(true), Some(false), None] {
            let total = labels.iter().filter(|&&l| l == group).count() as f64;
            let in_train = train.iter().filter(|r| r.has_image == group).count() as f64;
            prop_assert!((in_train - ratio * total).abs() < 1.0 + 1e-9);
        }
        let (again, _) = split(&corpus, ratio, seed).unwrap();
        prop_assert_eq!(again, train);
    }
}

#[test]
fn benchmark_rows_follow_config_order() {
    let corpus = generate_planted_corpus(120, 2).unwrap();
    let config = PipelineConfig::default();
    let one = benchmark(&corpus, &[BenchmarkModel::GaussianNb], &config, 0.8, 2).unwrap();
    assert_eq!(one.rows.len(), 1);
    let forward = benchmark(&corpus, &BenchmarkModel::DEFAULT, &config, 0.8, 2).unwrap();
    let mut reversed_models = BenchmarkModel::DEFAULT;
    reversed_models.reverse();
    let reversed = benchmark(&corpus, &reversed_models, &config, 0.8, 2).unwrap();
    let names: Vec<&str> = forward.rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(
        names,
        ["random_forest", "gaussian_nb", "linear_svm", "ensemble"]
    );
    for row in &forward.rows {
        let twin = reversed.rows.iter().find(|r| r.model == row.model).unwrap();
        assert_eq!(row, twin);
    }
    assert_eq!(one.rows[0], forward.rows[1]);
}

#[test]
fn benchmark_on_planted_corpus() {
    let corpus = generate_planted_corpus(200, 7).unwrap();
    let config = PipelineConfig::default();
    let a = benchmark(&corpus, &BenchmarkModel::DEFAULT, &config, 0.8, 7).unwrap();
    let b = benchmark(&corpus, &BenchmarkModel::DEFAULT, &config, 0.8, 7).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_text(), b.to_text());
    for row in &a.rows {
        let m = row.result.as_ref().unwrap();
        assert!(m.f1 >= 0.9, "{}", a.to_text());
    }
}

#[test]
fn benchmark_failures_stay_in_their_row() {
    let corpus = generate_planted_corpus(60, 4).unwrap();
    let config = PipelineConfig {
        svm: shotadvisor::models::SvmConfig {
            lambda: 1e-4,
            epochs: 0,
        },
        ..PipelineConfig::default()
    };
    let t = benchmark(&corpus, &BenchmarkModel::DEFAULT, &config, 0.8, 4).unwrap();
    assert!(t.rows[2].result.is_err());
    assert!(t.rows[0].result.is_ok() && t.rows[1].result.is_ok());
    assert!(t.to_csv().contains("\nlinear_svm,,,,,,,\n"));
}
