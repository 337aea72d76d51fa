//! Synthetic corpus with a known signal, for end-to-end checks.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, ImageCategory, IssueReport, LabelVector};
use crate::error::{Error, Result};

/// One distinctive token per category, in category order.
pub const SIGNAL_TOKENS: [&str; ImageCategory::COUNT] = [
    "syntax",
    "traceback",
    "menubar",
    "keystroke",
    "mockup",
    "printout",
    "popup",
    "walkthrough",
    "framerate",
    "flowchart",
];

/// Tokens that only appear in reports without images.
pub const NEGATIVE_TOKENS: [&str; 10] = [
    "typo",
    "translation",
    "license",
    "changelog",
    "deprecation",
    "refactor",
    "dependency",
    "documentation",
    "spelling",
    "wording",
];

const FILLER: [&str; 20] = [
    "browser", "page", "user", "window", "click", "version", "update", "load", "seems", "happens",
    "today", "build", "profile", "account", "setting", "tab", "site", "issue", "start", "recent",
];

const PRODUCTS: [&str; 5] = ["Firefox", "Thunderbird", "Core", "Toolkit", "DevTools"];
const COMPONENTS: [&str; 5] = ["General", "Graphics", "Networking", "UI", "Preferences"];
const PLATFORMS: [&str; 3] = ["x86_64", "ARM64", "Unspecified"];
const OP_SYS: [&str; 3] = ["Windows 10", "Linux", "macOS"];
const SEVERITIES: [&str; 4] = ["S1", "S2", "S3", "S4"];
const PRIORITIES: [&str; 5] = ["P1", "P2", "P3", "P4", "P5"];
const STATUSES: [&str; 4] = ["NEW", "UNCONFIRMED", "ASSIGNED", "RESOLVED"];
const KEYWORDS: [&str; 4] = ["regression", "crash", "perf", "ux"];

/// Picks from the first half of `pool` with probability `bias`, otherwise
/// uniformly from the whole pool.
fn skewed(rng: &mut ChaCha8Rng, pool: &[&str], bias: f64) -> String {
    let half = pool.len().div_ceil(2);
    let choice = if rng.random_bool(bias) {
        pool[..half].choose(rng)
    } else {
        pool.choose(rng)
    };
    choice.expect("non-empty pool").to_string()
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n)
        .map(|_| *FILLER.choose(rng).expect("filler"))
        .collect()
}

/// `n / 2` reports with images and the rest without. Positives mention one
/// to three signal tokens in the description and carry a label count of 3
/// on exactly those categories (plus the odd stray single vote); negatives
/// mention tokens from [`NEGATIVE_TOKENS`]. Metadata leans slightly toward
/// the first half of each vocabulary for positives.
pub fn generate_planted_corpus(n: usize, seed: u64) -> Result<Corpus> {
    if n < 40 {
        return Err(Error::Input(format!(
            "planted corpus needs n >= 40, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positive: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    positive.shuffle(&mut rng);
    let origin = Utc
        .with_ymd_and_hms(2021, 1, 4, 9, 0, 0)
        .single()
        .expect("valid date");

    let mut reports = Vec::with_capacity(n);
    for (i, &pos) in positive.iter().enumerate() {
        let bias = if pos { 0.6 } else { 0.4 };
        let desc_len = rng.random_range(6..=12);
        let mut desc = words(&mut rng, desc_len);
        let summary_len = rng.random_range(2..=4);
        let mut summary = words(&mut rng, summary_len);
        let mut counts = [0u8; ImageCategory::COUNT];
        if pos {
            let k = rng.random_range(1..=3);
            let cats = rand::seq::index::sample(&mut rng, ImageCategory::COUNT, k);
            for c in cats.iter() {
                counts[c] = 3;
                let at = rng.random_range(0..=desc.len());
                desc.insert(at, SIGNAL_TOKENS[c]);
            }
            if rng.random_bool(0.5) {
                summary.push(SIGNAL_TOKENS[cats.index(0)]);
            }
            if rng.random_bool(0.3) {
                let stray = rng.random_range(0..ImageCategory::COUNT);
                if counts[stray] == 0 {
                    counts[stray] = 1;
                }
            }
        } else {
            for _ in 0..rng.random_range(1..=2) {
                let at = rng.random_range(0..=desc.len());
                desc.insert(at, NEGATIVE_TOKENS.choose(&mut rng).expect("pool"));
            }
        }

        let created = origin + Duration::hours(i as i64 * 7);
        let reply = rng
            .random_bool(0.8)
            .then(|| created + Duration::minutes(rng.random_range(10..12_000)));
        let keywords = KEYWORDS
            .iter()
            .filter(|_| rng.random_bool(0.15))
            .map(|k| k.to_string())
            .collect();
        reports.push(IssueReport {
            product: Some(skewed(&mut rng, &PRODUCTS, bias)),
            component: Some(skewed(&mut rng, &COMPONENTS, bias)),
            platform: Some(skewed(&mut rng, &PLATFORMS, bias)),
            op_sys: Some(skewed(&mut rng, &OP_SYS, bias)),
            severity: Some(skewed(&mut rng, &SEVERITIES, bias)),
            priority: Some(skewed(&mut rng, &PRIORITIES, bias)),
            status: Some(skewed(&mut rng, &STATUSES, bias)),
            keywords,
            created_at: Some(created),
            first_reply_at: reply,
            initial_comment_count: Some(rng.random_range(0..10)),
            attachment_mimes: if pos {
                vec!["image/png".into()]
            } else if rng.random_bool(0.3) {
                vec!["text/plain".into()]
            } else {
                Vec::new()
            },
            has_image: Some(pos),
            label_vector: pos.then(|| LabelVector::new(counts).expect("counts in range")),
            ..IssueReport::new(
                format!("{}", 100_000 + i),
                summary.join(" "),
                desc.join(" "),
            )
        });
    }
    Corpus::new(reports, format!("planted(n={n}, seed={seed})"))
}
