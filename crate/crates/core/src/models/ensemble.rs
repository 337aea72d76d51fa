use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A necessity member's name and its vote threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberVote {
    pub name: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: Vec<MemberVote>,
    /// Threshold reported alongside the verdict.
    pub decision_threshold: f64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invariant("ensemble", "no members"));
        }
        let in_unit = |t: f64| (0.0..=1.0).contains(&t);
        if let Some(m) = self.members.iter().find(|m| !in_unit(m.threshold)) {
            return Err(Error::invariant(
                "ensemble",
                format!(
                    "member `{}` threshold {} outside [0, 1]",
                    m.name, m.threshold
                ),
            ));
        }
        if !in_unit(self.decision_threshold) {
            return Err(Error::invariant(
                "ensemble",
                "decision threshold outside [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.threshold).collect()
    }
}

/// Negative voting: each member votes positive iff its probability reaches
/// its threshold, and any negative vote vetoes. The reported probability is
/// the smallest member probability.
pub fn ensemble_predict(member_probs: &[f64], member_thresholds: &[f64]) -> Result<(bool, f64)> {
    if member_probs.is_empty() {
        return Err(Error::Input("ensemble has no members".into()));
    }
    if member_probs.len() != member_thresholds.len() {
        return Err(Error::Input(format!(
            "{} member probabilities but {} thresholds",
            member_probs.len(),
            member_thresholds.len()
        )));
    }
    let positive = member_probs
        .iter()
        .zip(member_thresholds)
        .all(|(p, t)| p >= t);
    let probability = member_probs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((positive, probability))
}

/// The threshold grid `0.00, 0.01, ..., 1.00`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 / 100.0)
}

fn f1_at(probs: &[f64], y: &[bool], t: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
    for (&p, &truth) in probs.iter().zip(y) {
        match (p >= t, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Lowest grid threshold maximizing F1 of `prob >= t` against `y`.
pub fn learn_threshold(probs: &[f64], y: &[bool]) -> Result<f64> {
    if probs.is_empty() || probs.len() != y.len() {
        return Err(Error::Input(format!(
            "need matching non-empty inputs, got {} probabilities and {} labels",
            probs.len(),
            y.len()
        )));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::DegenerateTraining(
            "threshold learning needs both classes".into(),
        ));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in threshold_grid() {
        let f1 = f1_at(probs, y, t);
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    Ok(best.1)
}
