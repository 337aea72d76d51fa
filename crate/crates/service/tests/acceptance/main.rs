//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

// `ensure!(a < b)` must fail on NaN, so negated comparisons are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[path = "../../../core/tests/oracles/mod.rs"]
mod oracles;

#[path = "../common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use shotadvisor::artifact;
use shotadvisor::corpus::ImageCategory;
use shotadvisor::eval::{
    correct_count, evaluate_model, generate_planted_corpus, multilabel_metrics, split,
};
use shotadvisor::features::{fit_tfidf, transform_tfidf, FeatureVector, SchemaId, TfidfConfig};
use shotadvisor::models::{
    ensemble_predict, forest_predict_proba, gnb_predict_proba, learn_threshold, train_forest,
    train_gnb, ForestConfig, GnbConfig, MaxFeatures,
};
use shotadvisor::pipeline::{
    train_pipeline, train_pipeline_with_holdout, DraftReport, PipelineConfig,
};
use shotadvisor::textprep::TokenList;

use common::{drafts, post_analyze, run_cli, spawn_binary};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn schema() -> SchemaId {
    "0f0e0d0c0b0a09080706050403020100".parse().unwrap()
}

fn fv(values: &[f64]) -> FeatureVector {
    FeatureVector {
        values: values.to_vec(),
        schema: schema(),
    }
}

fn fvs(rows: &[Vec<f64>]) -> Vec<FeatureVector> {
    rows.iter().map(|r| fv(r)).collect()
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure!(elapsed < limit, "{what} took {elapsed:?}, limit {limit:?}");
    Ok(())
}

fn gnb_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = oracles::rng(2024);
    let mut worst = 0.0f64;
    let n = 200;
    for _ in 0..n {
        let (x, y, q) = oracles::gnb_instance(&mut rng);
        ensure!(x.len() <= 5 && x[0].len() <= 3, "instance too large");
        let model = train_gnb(&fvs(&x), &y, &GnbConfig::default()).map_err(|e| e.to_string())?;
        let got = gnb_predict_proba(&model, &fv(&q)).map_err(|e| e.to_string())?;
        let want = oracles::gnb_posterior(&x, &y, &q);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure!(worst < 1e-9, "max deviation {worst:e}");
    let x = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
    let model =
        train_gnb(&fvs(&x), &[0, 0, 1, 1], &GnbConfig::default()).map_err(|e| e.to_string())?;
    let p = gnb_predict_proba(&model, &fv(&[2.5])).map_err(|e| e.to_string())?[0];
    ensure!(
        (p - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-9,
        "worked example gave {p}"
    );
    ensure!((p - 0.880797).abs() < 1e-6, "worked example gave {p}");
    within(start.elapsed(), Duration::from_secs(1), "GNB check")?;
    Ok(format!(
        "{n} instances, max deviation {worst:.1e}, worked p = {p:.6}"
    ))
}

fn tfidf_formula() -> Outcome {
    let all_terms = TfidfConfig {
        min_df: 1,
        max_vocab: usize::MAX,
    };
    let toks = |w: &[&str]| -> TokenList { w.iter().copied().collect() };
    let model = fit_tfidf(&[toks(&["crash", "menu"]), toks(&["menu"])], all_terms)
        .map_err(|e| e.to_string())?;
    let v = transform_tfidf(&model, &toks(&["crash", "crash", "menu"]));
    ensure!(
        (v[0] - 0.942156).abs() < 1e-6 && (v[1] - 0.335176).abs() < 1e-6,
        "worked example gave {v:?}"
    );
    const WORDS: [&str; 6] = ["aa", "bb", "cc", "dd", "ee", "ff"];
    let mut rng = oracles::rng(12);
    let mut worst = 0.0f64;
    let n = 1000;
    for _ in 0..n {
        let docs: Vec<TokenList> = (0..rng.random_range(1..8))
            .map(|_| {
                (0..rng.random_range(1..12))
                    .map(|_| WORDS[rng.random_range(0..6)])
                    .collect()
            })
            .collect();
        let model = fit_tfidf(&docs, all_terms).map_err(|e| e.to_string())?;
        let seen: Vec<&str> = docs[0].iter().collect();
        let mut doc: Vec<&str> = vec![seen[rng.random_range(0..seen.len())]];
        doc.extend((0..rng.random_range(0..40)).map(|_| WORDS[rng.random_range(0..6)]));
        let v = transform_tfidf(&model, &doc.iter().copied().collect());
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
    }
    ensure!(worst <= 1e-12, "max |norm - 1| = {worst:e}");
    Ok(format!(
        "worked ({:.6}, {:.6}); {n} fuzzed documents, max |norm - 1| {worst:.1e}",
        v[0], v[1]
    ))
}

fn forest_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = ForestConfig {
        n_trees: 1,
        max_features: MaxFeatures::All,
        bootstrap: false,
        min_samples_leaf: 1,
        max_depth: None,
    };
    let mut rng = oracles::rng(99);
    let mut queries_checked = 0;
    for case in 0..100u64 {
        let (x, y) = oracles::cart_instance(&mut rng);
        ensure!(x.len() <= 20 && x[0].len() <= 4, "instance too large");
        let forest = train_forest(&fvs(&x), &y, &cfg, case).map_err(|e| e.to_string())?;
        let oracle = oracles::cart_fit(&x, &y);
        let d = x[0].len();
        let mut queries = x.clone();
        queries.extend((0..20).map(|_| {
            (0..d)
                .map(|_| rng.random_range(0..11) as f64 * 0.125)
                .collect()
        }));
        for q in &queries {
            let got = forest_predict_proba(&forest, &fv(q)).map_err(|e| e.to_string())?;
            let want = oracle.predict(q);
            ensure!(
                got.to_bits() == want.to_bits(),
                "dataset {case}: {got} vs {want} at {q:?}"
            );
            queries_checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10), "forest check")?;
    Ok(format!(
        "100 datasets, {queries_checked} predictions identical"
    ))
}

fn negative_voting() -> Outcome {
    for mask in 0..8u8 {
        let probs: Vec<f64> = (0..3)
            .map(|i| if mask >> i & 1 == 1 { 0.9 } else { 0.1 })
            .collect();
        let (positive, _) = ensemble_predict(&probs, &[0.5; 3]).map_err(|e| e.to_string())?;
        ensure!(positive == (mask == 7), "votes {mask:03b} gave {positive}");
    }
    let mut rng = oracles::rng(41);
    for set in 0..100 {
        let n = rng.random_range(1..60);
        let thresholds: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect();
        let ensemble = rows
            .iter()
            .map(|r| ensemble_predict(r, &thresholds).map(|v| v.0))
            .collect::<Result<Vec<bool>, _>>()
            .map_err(|e| e.to_string())?
            .iter()
            .filter(|&&b| b)
            .count();
        let min_member = (0..3)
            .map(|m| rows.iter().filter(|r| r[m] >= thresholds[m]).count())
            .min()
            .unwrap();
        ensure!(
            ensemble <= min_member,
            "set {set}: ensemble {ensemble} > member {min_member}"
        );
    }
    Ok("8 vote combinations, 100 fuzzed sets".into())
}

fn threshold_sweep() -> Outcome {
    let t = learn_threshold(&[0.2, 0.6, 0.8], &[false, true, true]).map_err(|e| e.to_string())?;
    ensure!(t == 0.21, "worked example gave {t}");
    let mut rng = oracles::rng(31);
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..30);
        let coarse = rng.random_bool(0.5);
        let probs: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    rng.random_range(0..=20) as f64 / 20.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            continue;
        }
        let got = learn_threshold(&probs, &y).map_err(|e| e.to_string())?;
        let want = oracles::threshold_sweep(&probs, &y);
        ensure!(got == want, "instance {done}: {got} vs {want}");
        done += 1;
    }
    Ok("worked case 0.21, 100 random instances".into())
}

fn category_set(mask: u16) -> BTreeSet<ImageCategory> {
    ImageCategory::ALL
        .iter()
        .filter(|c| mask >> c.index() & 1 == 1)
        .copied()
        .collect()
}

fn multilabel_arithmetic() -> Outcome {
    use ImageCategory::*;
    let truth: BTreeSet<_> = [Code, RuntimeError].into();
    let pred: BTreeSet<_> = [RuntimeError, DialogBox].into();
    ensure!(correct_count(&pred, &truth) == 8, "correct count");
    let preds = [
        category_set(0b11111),
        category_set(0b1111),
        category_set(0b111111),
    ];
    let m = multilabel_metrics(&preds, &vec![BTreeSet::new(); 3]).map_err(|e| e.to_string())?;
    ensure!(
        m.avg_correct == 5.0 && m.frac_ge5 == 2.0 / 3.0 && m.frac_gt5 == 1.0 / 3.0,
        "worked example gave {m:?}"
    );
    let mut rng = oracles::rng(77);
    for case in 0..1000 {
        let n = rng.random_range(1..30);
        let preds: Vec<_> = (0..n)
            .map(|_| category_set(rng.random_range(0..1024)))
            .collect();
        let truths: Vec<_> = (0..n)
            .map(|_| category_set(rng.random_range(0..1024)))
            .collect();
        let m = multilabel_metrics(&preds, &truths).map_err(|e| e.to_string())?;
        ensure!(m.frac_gt5 <= m.frac_ge5, "case {case}: {m:?}");
    }
    Ok("correct count 8; avg 5, 2/3, 1/3; 1000 fuzzed inputs".into())
}

fn cli_json(args: &[&str], stdin: &[u8]) -> Result<Vec<u8>, String> {
    let (code, out, err) = run_cli(args, stdin);
    ensure!(code == 0, "`{}` exited {code}: {err}", args.join(" "));
    Ok(out)
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = cli_json(&["gen-corpus", "--n", "200", "--seed", "7"], b"")?;
    let corpus_path = dir.path().join("planted.jsonl");
    std::fs::write(&corpus_path, &corpus).map_err(|e| e.to_string())?;
    let model = dir.path().join("planted.imr.json");
    cli_json(
        &[
            "train",
            "--corpus",
            "-",
            "--out",
            arg(&model),
            "--seed",
            "7",
            "--holdout",
            "0.8",
        ],
        &corpus,
    )?;
    let out = cli_json(
        &[
            "evaluate",
            "--corpus",
            arg(&corpus_path),
            "--model",
            arg(&model),
            "--format",
            "json",
        ],
        b"",
    )?;
    let report: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    let f1 = report["binary"]["f1"].as_f64().ok_or("no f1")?;
    let ge5 = report["multilabel"]["frac_ge5"]
        .as_f64()
        .ok_or("no frac_ge5")?;
    let elapsed = start.elapsed();
    ensure!(f1 >= 0.90, "F1 {f1}");
    ensure!(ge5 >= 0.95, "frac_ge5 {ge5}");
    within(elapsed, Duration::from_secs(60), "end-to-end run")?;
    Ok(format!(
        "F1 {f1:.3} on {} reports, frac_ge5 {ge5:.3} on {} images, {:.1}s",
        report["n_binary"],
        report["n_multilabel"],
        elapsed.as_secs_f64()
    ))
}

fn recommendation_bits(json: &str) -> Result<Vec<u64>, String> {
    let v: Value = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let mut bits = vec![v["probability"].as_f64().ok_or("probability")?.to_bits()];
    for c in v["categories"].as_array().ok_or("categories")? {
        bits.push(c["confidence"].as_f64().ok_or("confidence")?.to_bits());
    }
    Ok(bits)
}

fn determinism_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("c.jsonl");
    cli_json(
        &[
            "gen-corpus",
            "--n",
            "200",
            "--seed",
            "7",
            "--out",
            arg(&corpus_path),
        ],
        b"",
    )?;
    let a = dir.path().join("a.imr.json");
    let b = dir.path().join("b.imr.json");
    for out in [&a, &b] {
        cli_json(
            &[
                "train",
                "--corpus",
                arg(&corpus_path),
                "--out",
                arg(out),
                "--seed",
                "11",
            ],
            b"",
        )?;
    }
    let bytes_a = std::fs::read(&a).map_err(|e| e.to_string())?;
    ensure!(
        bytes_a == std::fs::read(&b).map_err(|e| e.to_string())?,
        "artifacts differ"
    );

    let corpus = generate_planted_corpus(200, 7).map_err(|e| e.to_string())?;
    let model =
        train_pipeline(&corpus, &PipelineConfig::default(), 11).map_err(|e| e.to_string())?;
    let saved = dir.path().join("lib.imr.json");
    artifact::save_model(&model, &saved).map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&saved).map_err(|e| e.to_string())? == bytes_a,
        "library and CLI artifacts differ"
    );
    let loaded = artifact::load_model(&saved).map_err(|e| e.to_string())?;
    let resaved = dir.path().join("again.imr.json");
    artifact::save_model(&loaded, &resaved).map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&resaved).map_err(|e| e.to_string())? == bytes_a,
        "re-save differs"
    );
    let mut inputs = drafts();
    inputs.extend(
        corpus
            .iter()
            .take(40)
            .map(|r| serde_json::to_string(&DraftReport::from(r)).unwrap()),
    );
    for d in &inputs {
        let before =
            shotadvisor_service::cli::analyze_json(&model, d).map_err(|e| e.to_string())?;
        let after =
            shotadvisor_service::cli::analyze_json(&loaded, d).map_err(|e| e.to_string())?;
        ensure!(before == after, "analyze differs after load for {d}");
        ensure!(
            recommendation_bits(&before)? == recommendation_bits(&after)?,
            "bits differ"
        );
    }

    let cwd = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = spawn_binary(&a, cwd.path());
    let client = reqwest::blocking::Client::new();
    for d in &inputs {
        let cli = cli_json(&["analyze", "--model", arg(&a)], d.as_bytes())?;
        let (status, body) = post_analyze(&client, server.addr, d);
        ensure!(status == 200, "HTTP {status}");
        ensure!(
            cli == format!("{body}\n").into_bytes(),
            "CLI and HTTP differ for {d}"
        );
    }
    Ok(format!(
        "identical artifacts ({} bytes); {} drafts bit-identical after load and equal over CLI and HTTP",
        bytes_a.len(),
        inputs.len()
    ))
}

fn snapshot(root: &Path) -> BTreeMap<String, (u64, Option<std::time::SystemTime>)> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            let Ok(meta) = entry.metadata() else { continue };
            if meta.is_dir() {
                stack.push(path.clone());
            }
            out.insert(
                path.display().to_string(),
                (meta.len(), meta.modified().ok()),
            );
        }
    }
    out
}

fn proc_write_bytes(pid: u32) -> Option<u64> {
    let text = std::fs::read_to_string(format!("/proc/{pid}/io")).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("write_bytes:"))
        .and_then(|v| v.trim().parse().ok())
}

fn open_regular_files(pid: u32) -> Vec<String> {
    std::fs::read_dir(format!("/proc/{pid}/fd"))
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| std::fs::read_link(e.path()).ok())
        .filter(|t| t.is_absolute() && !t.starts_with("/dev") && !t.starts_with("/proc"))
        .map(|t| t.display().to_string())
        .collect()
}

fn service_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = generate_planted_corpus(200, 7).map_err(|e| e.to_string())?;
    let model = train_pipeline_with_holdout(&corpus, &PipelineConfig::default(), 7, Some(0.8))
        .map_err(|e| e.to_string())?;
    let model_path = dir.path().join("planted.imr.json");
    artifact::save_model(&model, &model_path).map_err(|e| e.to_string())?;
    let cwd = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = spawn_binary(&model_path, cwd.path());
    let pid = server.child.id();
    let addr = server.addr;

    let (_, test) = split(&corpus, 0.8, 7).map_err(|e| e.to_string())?;
    let mut bodies = drafts();
    bodies.extend(
        test.iter()
            .map(|r| serde_json::to_string(&DraftReport::from(r)).unwrap()),
    );

    let client = reqwest::blocking::Client::new();
    post_analyze(&client, addr, &bodies[0]);
    let files_before = snapshot(dir.path())
        .into_iter()
        .chain(snapshot(cwd.path()))
        .collect::<BTreeMap<_, _>>();
    let written_before = proc_write_bytes(pid);

    const CLIENTS: usize = 32;
    const PER_CLIENT: usize = 25;
    let results: Vec<Result<Vec<Duration>, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..CLIENTS)
            .map(|c| {
                let bodies = &bodies;
                s.spawn(move || {
                    let client = reqwest::blocking::Client::new();
                    let mut times = Vec::with_capacity(PER_CLIENT);
                    for i in 0..PER_CLIENT {
                        let body = &bodies[(c * PER_CLIENT + i) % bodies.len()];
                        let start = Instant::now();
                        let (status, _) = post_analyze(&client, addr, body);
                        times.push(start.elapsed());
                        if status != 200 {
                            return Err(format!("status {status}"));
                        }
                    }
                    Ok(times)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut latencies = Vec::new();
    for r in results {
        latencies.extend(r?);
    }
    latencies.sort();
    let p99 = latencies[(latencies.len() * 99).div_ceil(100) - 1];
    ensure!(p99 < Duration::from_millis(100), "p99 {p99:?}");

    for (body, field) in [
        (r#"{"summary": 5, "description": ""}"#, "summary"),
        (r#"{"summary": ""}"#, "description"),
        (
            r#"{"summary": "", "description": "", "severity": []}"#,
            "severity",
        ),
    ] {
        let (status, text) = post_analyze(&client, addr, body);
        ensure!(status == 400, "{body} gave {status}");
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        ensure!(v["field"] == field, "{body} gave {text}");
    }
    let (status, _) = post_analyze(&client, addr, "{not json");
    ensure!(status == 400, "malformed JSON gave {status}");

    let files_after = snapshot(dir.path())
        .into_iter()
        .chain(snapshot(cwd.path()))
        .collect::<BTreeMap<_, _>>();
    ensure!(
        files_before == files_after,
        "files changed during inference"
    );
    let written = match (written_before, proc_write_bytes(pid)) {
        (Some(b), Some(a)) => {
            ensure!(a == b, "server wrote {} bytes to storage", a - b);
            "0 bytes written"
        }
        _ => "write counters unavailable",
    };
    let open = open_regular_files(pid);
    ensure!(open.is_empty(), "server holds files open: {open:?}");
    Ok(format!(
        "p99 {:.1} ms over {} requests from {CLIENTS} clients; 400s name the field; {written}, no files touched",
        p99.as_secs_f64() * 1e3,
        latencies.len()
    ))
}

const PUBLISHED_CORPUS_ENV: &str = "SHOTADVISOR_PUBLISHED_CORPUS";

fn published_corpus() -> Option<Outcome> {
    let path = std::env::var_os(PUBLISHED_CORPUS_ENV)?;
    Some((|| {
        let corpus = shotadvisor::corpus::load_corpus(&path).map_err(|e| e.to_string())?;
        let model = train_pipeline_with_holdout(&corpus, &PipelineConfig::default(), 0, Some(0.8))
            .map_err(|e| e.to_string())?;
        let (_, test) = split(&corpus, 0.8, 0).map_err(|e| e.to_string())?;
        let report = evaluate_model(&model, &test).map_err(|e| e.to_string())?;
        let f1 = report.binary.f1;
        let avg = report
            .multilabel
            .as_ref()
            .ok_or("no labeled images in the test split")?
            .avg_correct;
        ensure!(
            (f1 - 0.76).abs() <= 0.05,
            "F1 {f1:.3}, expected 0.76 +/- 0.05"
        );
        ensure!(
            (avg - 6.23).abs() <= 0.5,
            "avg correct {avg:.2}, expected 6.23 +/- 0.5"
        );
        Ok(format!("F1 {f1:.3}, avg correct {avg:.2}"))
    })())
}

fn run(check: fn() -> Outcome) -> Verdict {
    match catch_unwind(AssertUnwindSafe(check)) {
        Ok(Ok(detail)) => Verdict::Pass(detail),
        Ok(Err(why)) => Verdict::Fail(why),
        Err(panic) => Verdict::Fail(
            panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    }
}

fn main() {
    let checks: [Check; 9] = [
        ("gnb oracle equivalence", gnb_oracle),
        ("tf-idf formula", tfidf_formula),
        ("forest oracle equivalence", forest_oracle),
        ("negative voting", negative_voting),
        ("threshold sweep", threshold_sweep),
        ("multi-label arithmetic", multilabel_arithmetic),
        ("end-to-end planted signal", end_to_end),
        ("determinism and persistence", determinism_and_persistence),
        ("service contract", service_contract),
    ];
    let mut verdicts: Vec<(&str, Verdict)> =
        checks.iter().map(|(name, f)| (*name, run(*f))).collect();
    verdicts.push((
        "published corpus reproduction",
        match published_corpus() {
            None => Verdict::Skip(format!(
                "set {PUBLISHED_CORPUS_ENV} to a labeled corpus to run"
            )),
            Some(Ok(d)) => Verdict::Pass(d),
            Some(Err(e)) => Verdict::Fail(e),
        },
    ));
    let mut failed = 0;
    for (name, v) in &verdicts {
        match v {
            Verdict::Pass(d) => println!("PASS  {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}")
            }
            Verdict::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
    println!(
        "{} passed, {failed} failed",
        verdicts
            .iter()
            .filter(|v| matches!(v.1, Verdict::Pass(_)))
            .count()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
