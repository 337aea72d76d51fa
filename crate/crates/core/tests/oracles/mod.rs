//! Independent reference implementations used to check the library.
//!
//! Each one follows the textbook definition as literally as possible and
//! shares no code with the crate under test.

#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Posterior class probabilities (classes in ascending label order) as the
/// normalized product `prior * prod_j N(x_j; mean, var)`, with maximum
/// likelihood means and variances. No logs, no variance floor.
pub fn gnb_posterior(x: &[Vec<f64>], y: &[usize], q: &[f64]) -> Vec<f64> {
    let mut labels: Vec<usize> = y.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let n = x.len() as f64;
    let joint: Vec<f64> = labels
        .iter()
        .map(|&c| {
            let rows: Vec<&Vec<f64>> = x
                .iter()
                .zip(y)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            let m = rows.len() as f64;
            let mut p = m / n;
            for (j, &v) in q.iter().enumerate() {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
                let var = rows
                    .iter()
                    .map(|r| (r[j] - mean) * (r[j] - mean))
                    .sum::<f64>()
                    / m;
                p *= (-(v - mean) * (v - mean) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt();
            }
            p
        })
        .collect();
    let total: f64 = joint.iter().sum();
    joint.iter().map(|p| p / total).collect()
}

/// A GNB instance whose per-class, per-feature variances are bounded away
/// from zero: two classes of two or three samples, values on a coarse grid
/// with at least two distinct values per class and feature.
pub fn gnb_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let d = rng.random_range(1..=3);
    let sizes = [rng.random_range(2..=3), 2];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (label, &size) in sizes.iter().enumerate() {
        let offset = label as f64 * rng.random_range(0.0..3.0);
        let mut rows: Vec<Vec<f64>> = (0..size)
            .map(|_| {
                (0..d)
                    .map(|_| offset + rng.random_range(0..5) as f64 * 0.5)
                    .collect()
            })
            .collect();
        for j in 0..d {
            if rows.iter().all(|r| r[j] == rows[0][j]) {
                rows[0][j] += 0.5;
            }
        }
        for r in rows {
            x.push(r);
            y.push(label);
        }
    }
    let q = (0..d).map(|_| rng.random_range(-1.0..5.0)).collect();
    (x, y, q)
}

/// Exhaustive greedy CART with Gini impurity in exact rational arithmetic.
#[derive(Debug)]
pub enum Cart {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Cart>,
        right: Box<Cart>,
    },
}

fn gini(pos: i64, n: i64) -> Ratio<i64> {
    let p = Ratio::new(pos, n);
    let q = Ratio::new(n - pos, n);
    Ratio::from_integer(1) - p * p - q * q
}

/// Grows until nodes are pure or no feature varies. Every midpoint between
/// consecutive distinct values of every feature is scored by weighted Gini;
/// the first minimum in (feature, threshold) order wins.
pub fn cart_fit(x: &[Vec<f64>], y: &[bool]) -> Cart {
    let n = y.len() as i64;
    let pos = y.iter().filter(|&&b| b).count() as i64;
    let leaf = Cart::Leaf(pos as f64 / n as f64);
    if pos == 0 || pos == n {
        return leaf;
    }
    let mut best: Option<(Ratio<i64>, usize, f64)> = None;
    for j in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut nl, mut pl, mut nr, mut pr) = (0i64, 0i64, 0i64, 0i64);
            for (r, &label) in x.iter().zip(y) {
                if r[j] <= t {
                    nl += 1;
                    pl += i64::from(label);
                } else {
                    nr += 1;
                    pr += i64::from(label);
                }
            }
            let impurity = (Ratio::from_integer(nl) * gini(pl, nl)
                + Ratio::from_integer(nr) * gini(pr, nr))
                / Ratio::from_integer(n);
            if best.as_ref().is_none_or(|(b, _, _)| impurity < *b) {
                best = Some((impurity, j, t));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return leaf;
    };
    let (mut lx, mut ly, mut rx, mut ry) = (vec![], vec![], vec![], vec![]);
    for (r, &label) in x.iter().zip(y) {
        if r[feature] <= threshold {
            lx.push(r.clone());
            ly.push(label);
        } else {
            rx.push(r.clone());
            ry.push(label);
        }
    }
    Cart::Split {
        feature,
        threshold,
        left: Box::new(cart_fit(&lx, &ly)),
        right: Box::new(cart_fit(&rx, &ry)),
    }
}

impl Cart {
    pub fn predict(&self, q: &[f64]) -> f64 {
        match self {
            Cart::Leaf(p) => *p,
            Cart::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if q[*feature] <= *threshold {
                    left.predict(q)
                } else {
                    right.predict(q)
                }
            }
        }
    }
}

/// Up to 20 samples and 4 features on a small integer grid, so ties in
/// values and in impurity are common.
pub fn cart_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = rng.random_range(2..=20);
    let d = rng.random_range(1..=4);
    let x = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.random_range(0..6) as f64 * 0.25)
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.random_bool(0.5)).collect();
    (x, y)
}

/// F1 of `prob >= t` as an exact fraction.
fn f1_exact(probs: &[f64], y: &[bool], t: f64) -> Ratio<i64> {
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for (&p, &truth) in probs.iter().zip(y) {
        let pred = p >= t;
        if pred && truth {
            tp += 1;
        }
        if pred && !truth {
            fp += 1;
        }
        if !pred && truth {
            fneg += 1;
        }
    }
    if 2 * tp + fp + fneg == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(2 * tp, 2 * tp + fp + fneg)
    }
}

/// Sweeps `k / 100` for k = 0..=100 and keeps the lowest maximizer.
pub fn threshold_sweep(probs: &[f64], y: &[bool]) -> f64 {
    let mut best_k = 0;
    let mut best_f1 = f1_exact(probs, y, 0.0);
    for k in 1..=100 {
        let f1 = f1_exact(probs, y, k as f64 / 100.0);
        if f1 > best_f1 {
            best_f1 = f1;
            best_k = k;
        }
    }
    best_k as f64 / 100.0
}

/// `(tp, fp, fn, tn)` by counting each cell of the confusion matrix
/// separately.
pub fn confusion(preds: &[bool], truth: &[bool]) -> (u64, u64, u64, u64) {
    let cell = |p: bool, t: bool| {
        preds
            .iter()
            .zip(truth)
            .filter(|&(&a, &b)| a == p && b == t)
            .count() as u64
    };
    (
        cell(true, true),
        cell(true, false),
        cell(false, true),
        cell(false, false),
    )
}

/// TF-IDF with every term kept: raw counts times `ln((1+N)/(1+df)) + 1`,
/// divided by the Euclidean norm. Columns in lexicographic term order.
pub fn tfidf(docs: &[Vec<&str>], query: &[&str]) -> Vec<f64> {
    let mut terms: Vec<&str> = docs.iter().flatten().copied().collect();
    terms.sort_unstable();
    terms.dedup();
    let n = docs.len() as f64;
    let raw: Vec<f64> = terms
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
            let tf = query.iter().filter(|q| *q == t).count() as f64;
            tf * (((1.0 + n) / (1.0 + df)).ln() + 1.0)
        })
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        raw
    } else {
        raw.iter().map(|v| v / norm).collect()
    }
}
