use serde::{Deserialize, Serialize};

use super::check_schema;
use crate::error::{Error, Result};
use crate::features::{common_schema, FeatureVector, SchemaId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnbConfig {
    /// Variance floor as a fraction of the largest per-feature variance.
    pub var_smoothing: f64,
}

impl Default for GnbConfig {
    fn default() -> Self {
        GnbConfig {
            var_smoothing: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbClass {
    pub label: usize,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Gaussian Naive Bayes with maximum-likelihood (divide-by-n) variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub schema: SchemaId,
    pub classes: Vec<GnbClass>,
    /// Absolute variance floor applied at training time.
    pub variance_floor: f64,
}

pub fn train_gnb(x: &[FeatureVector], y: &[usize], config: &GnbConfig) -> Result<GnbModel> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "{} samples but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateTraining(
            "need at least two samples".into(),
        ));
    }
    let schema = common_schema(x)?;
    let mut labels: Vec<usize> = y.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "all {} samples have class {}",
            y.len(),
            labels[0]
        )));
    }

    let d = x[0].len();
    let n = x.len() as f64;
    let max_var = (0..d)
        .map(|j| {
            let mean = x.iter().map(|v| v.values[j]).sum::<f64>() / n;
            x.iter().map(|v| (v.values[j] - mean).powi(2)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    let variance_floor = (config.var_smoothing * max_var).max(f64::MIN_POSITIVE);

    let classes = labels
        .into_iter()
        .map(|label| {
            let members: Vec<&FeatureVector> = x
                .iter()
                .zip(y)
                .filter(|(_, &c)| c == label)
                .map(|(v, _)| v)
                .collect();
            let m = members.len() as f64;
            let mean: Vec<f64> = (0..d)
                .map(|j| members.iter().map(|v| v.values[j]).sum::<f64>() / m)
                .collect();
            let variance = (0..d)
                .map(|j| {
                    let var = members
                        .iter()
                        .map(|v| (v.values[j] - mean[j]).powi(2))
                        .sum::<f64>()
                        / m;
                    var.max(variance_floor)
                })
                .collect();
            GnbClass {
                label,
                prior: m / n,
                mean,
                variance,
            }
        })
        .collect();

    Ok(GnbModel {
        schema,
        classes,
        variance_floor,
    })
}

impl GnbModel {
    /// log prior + sum of log Gaussian densities, per class.
    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        check_schema(self.schema, self.width(), x)?;
        Ok(self
            .classes
            .iter()
            .map(|c| {
                let mut ll = c.prior.ln();
                for ((&v, &mu), &var) in x.values.iter().zip(&c.mean).zip(&c.variance) {
                    ll -= 0.5 * (2.0 * std::f64::consts::PI * var).ln();
                    ll -= (v - mu) * (v - mu) / (2.0 * var);
                }
                ll
            })
            .collect())
    }

    pub fn width(&self) -> usize {
        self.classes.first().map_or(0, |c| c.mean.len())
    }

    /// Posterior class probabilities, in `classes` order.
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let jll = self.joint_log_likelihood(x)?;
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            // every class assigns zero density; the priors are all that is left
            return Ok(self.classes.iter().map(|c| c.prior).collect());
        }
        let exp: Vec<f64> = jll.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Ok(exp.into_iter().map(|e| e / total).collect())
    }

    fn class_position(&self, label: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.label == label)
    }

    /// `ln p(label) - ln p(other)` for a two-class model.
    pub fn log_odds(&self, x: &FeatureVector, label: usize) -> Result<f64> {
        if self.classes.len() != 2 {
            return Err(Error::Input("log odds need a two-class model".into()));
        }
        let pos = self
            .class_position(label)
            .ok_or_else(|| Error::Input(format!("class {label} not in model")))?;
        let jll = self.joint_log_likelihood(x)?;
        let (a, b) = (jll[pos], jll[1 - pos]);
        Ok(match (a.is_finite(), b.is_finite()) {
            (true, true) => a - b,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => self.classes[pos].prior.ln() - self.classes[1 - pos].prior.ln(),
        })
    }

    /// Probability of `label`.
    pub fn probability_of(&self, x: &FeatureVector, label: usize) -> Result<f64> {
        let pos = self
            .class_position(label)
            .ok_or_else(|| Error::Input(format!("class {label} not in model")))?;
        Ok(self.predict_proba(x)?[pos])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let section = "gnb";
        if self.classes.len() < 2 {
            return Err(Error::invariant(section, "fewer than two classes"));
        }
        let d = self.width();
        let prior_sum: f64 = self.classes.iter().map(|c| c.prior).sum();
        if (prior_sum - 1.0).abs() > 1e-9 {
            return Err(Error::invariant(
                section,
                format!("priors sum to {prior_sum}"),
            ));
        }
        for c in &self.classes {
            if c.mean.len() != d || c.variance.len() != d {
                return Err(Error::invariant(section, "ragged parameter vectors"));
            }
            if !(c.prior > 0.0 && c.prior <= 1.0) {
                return Err(Error::invariant(
                    section,
                    format!("prior {} outside (0, 1]", c.prior),
                ));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invariant(section, "non-finite mean"));
            }
            if c.variance
                .iter()
                .any(|v| !v.is_finite() || *v < self.variance_floor)
            {
                return Err(Error::invariant(
                    section,
                    "variance below the smoothing floor",
                ));
            }
        }
        Ok(())
    }
}

pub fn gnb_predict_proba(model: &GnbModel, x: &FeatureVector) -> Result<Vec<f64>> {
    model.predict_proba(x)
}
