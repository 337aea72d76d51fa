//! Linear SVMs trained with Pegasos-style stochastic subgradient descent,
//! and a one-vs-rest bank of ten of them.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_schema, logistic};
use crate::corpus::ImageCategory;
use crate::error::{Error, Result};
use crate::features::{common_schema, FeatureVector, SchemaId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pegasos: at step `t`, learning rate `1/(λt)`; the sample order is
/// reshuffled every epoch. The bias is an extra weight on a constant-one
/// input and is regularized with the rest. Final-iterate weights, no
/// averaging.
fn pegasos(x: &[FeatureVector], y: &[bool], config: &SvmConfig, mut rng: ChaCha8Rng) -> LinearSvm {
    let d = x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0u64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (config.lambda * t as f64);
            let label = if y[i] { 1.0 } else { -1.0 };
            let xi = &x[i].values;
            let violated = label * (dot(&w, xi) + b) < 1.0;
            let decay = 1.0 - eta * config.lambda;
            for wj in w.iter_mut() {
                *wj *= decay;
            }
            b *= decay;
            if violated {
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += eta * label * xj;
                }
                b += eta * label;
            }
        }
    }
    LinearSvm {
        weights: w,
        bias: b,
    }
}

fn check_config(config: &SvmConfig) -> Result<()> {
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(Error::Config(format!(
            "lambda must be positive, got {}",
            config.lambda
        )));
    }
    if config.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    Ok(())
}

/// A single binary machine. `stream` selects an independent RNG stream.
pub fn train_linear_svm(
    x: &[FeatureVector],
    y: &[bool],
    config: &SvmConfig,
    seed: u64,
    stream: u64,
) -> Result<LinearSvm> {
    check_config(config)?;
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input(format!(
            "need at least two samples with one label each, got {} samples and {} labels",
            x.len(),
            y.len()
        )));
    }
    common_schema(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok(pegasos(x, y, config, rng))
}

/// Binary SVM exposed as a probability via the logistic of its margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub schema: SchemaId,
    pub config: SvmConfig,
    pub machine: LinearSvm,
}

impl SvmBinaryModel {
    pub fn train(x: &[FeatureVector], y: &[bool], config: &SvmConfig, seed: u64) -> Result<Self> {
        let machine = train_linear_svm(x, y, config, seed, 0)?;
        Ok(SvmBinaryModel {
            schema: x[0].schema,
            config: *config,
            machine,
        })
    }

    pub fn margin(&self, x: &FeatureVector) -> Result<f64> {
        check_schema(self.schema, self.machine.weights.len(), x)?;
        Ok(self.machine.margin(&x.values))
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        self.margin(x).map(logistic)
    }
}

/// Ten binary machines, one per [`ImageCategory`], in category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmOvrModel {
    pub schema: SchemaId,
    pub config: SvmConfig,
    pub seed: u64,
    pub machines: Vec<LinearSvm>,
}

pub fn train_svm_ovr(
    x: &[FeatureVector],
    relevant: &[BTreeSet<ImageCategory>],
    config: &SvmConfig,
    seed: u64,
) -> Result<SvmOvrModel> {
    check_config(config)?;
    if x.len() != relevant.len() {
        return Err(Error::Input(format!(
            "{} samples but {} label sets",
            x.len(),
            relevant.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateTraining(
            "need at least two samples".into(),
        ));
    }
    let schema = common_schema(x)?;
    let machines = ImageCategory::ALL
        .iter()
        .map(|&c| {
            let y: Vec<bool> = relevant.iter().map(|s| s.contains(&c)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c.index() as u64);
            pegasos(x, &y, config, rng)
        })
        .collect();
    Ok(SvmOvrModel {
        schema,
        config: *config,
        seed,
        machines,
    })
}

impl SvmOvrModel {
    /// Raw decision values `w·x + b`, in category order.
    pub fn margins(&self, x: &FeatureVector) -> Result<[f64; ImageCategory::COUNT]> {
        let width = self.machines.first().map_or(0, |m| m.weights.len());
        check_schema(self.schema, width, x)?;
        let mut out = [0.0; ImageCategory::COUNT];
        for (o, m) in out.iter_mut().zip(&self.machines) {
            *o = m.margin(&x.values);
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.machines.len() != ImageCategory::COUNT {
            return Err(Error::invariant(
                "recommender",
                format!("expected 10 machines, found {}", self.machines.len()),
            ));
        }
        let width = self.machines[0].weights.len();
        for m in &self.machines {
            if m.weights.len() != width || m.weights.iter().chain([&m.bias]).any(|v| !v.is_finite())
            {
                return Err(Error::invariant("recommender", "malformed SVM weights"));
            }
        }
        Ok(())
    }
}

pub fn svm_margins(model: &SvmOvrModel, x: &FeatureVector) -> Result<[f64; ImageCategory::COUNT]> {
    model.margins(x)
}
