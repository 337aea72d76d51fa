//! Random forest of Gini-split binary decision trees.
//!
//! Split candidates are midpoints between consecutive distinct values of a
//! feature within a node; a sample goes left when `x[feature] <= threshold`.
//! Impurities are compared exactly on integer counts, so tie-breaking
//! (lowest feature index, then lowest threshold) does not depend on
//! floating-point rounding.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_schema;
use crate::error::{Error, Result};
use crate::features::{common_schema, FeatureVector, SchemaId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least one.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A tree stored as a node arena; node 0 is the root and children always
/// have larger indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_fraction } => return positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn validate(&self, width: usize) -> Result<()> {
        let section = "forest";
        if self.nodes.is_empty() {
            return Err(Error::invariant(section, "empty tree"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { positive_fraction } => {
                    if !(0.0..=1.0).contains(&positive_fraction) {
                        return Err(Error::invariant(
                            section,
                            format!("leaf fraction {positive_fraction} outside [0, 1]"),
                        ));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= width || !threshold.is_finite() {
                        return Err(Error::invariant(section, format!("bad split at node {i}")));
                    }
                    let n = self.nodes.len();
                    if left <= i || right <= i || left >= n || right >= n {
                        return Err(Error::invariant(
                            section,
                            format!("bad children at node {i}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema: SchemaId,
    pub width: usize,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Mean positive fraction of the reached leaves.
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        check_schema(self.schema, self.width, x)?;
        let total: f64 = self.trees.iter().map(|t| t.predict(&x.values)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::invariant("forest", "no trees"));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.width))
    }
}

pub fn forest_predict_proba(model: &ForestModel, x: &FeatureVector) -> Result<f64> {
    model.predict_proba(x)
}

/// Column-major view of the training matrix.
struct Columns {
    cols: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

pub fn train_forest(
    x: &[FeatureVector],
    y: &[bool],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    if config.n_trees < 1 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if config.min_samples_leaf < 1 {
        return Err(Error::Config("min_samples_leaf must be at least 1".into()));
    }
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
    let width = x[0].len();
    let data = Columns {
        cols: (0..width)
            .map(|j| x.iter().map(|v| v.values[j]).collect())
            .collect(),
        labels: y.to_vec(),
    };

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let n = y.len();
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder {
                data: &data,
                config,
                rng,
                nodes: Vec::new(),
            }
            .build(rows)
        })
        .collect();

    Ok(ForestModel {
        schema,
        width,
        config: *config,
        seed,
        trees,
    })
}

struct TreeBuilder<'a> {
    data: &'a Columns,
    config: &'a ForestConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Exact score numerator and denominator; higher score = lower impurity.
    num: u128,
    den: u128,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Weighted Gini impurity is `1 - score / n` with
/// `score = (pl² + ql²)/nl + (pr² + qr²)/nr`; return it as a fraction.
fn split_score(pos_left: u64, n_left: u64, pos_right: u64, n_right: u64) -> (u128, u128) {
    let sq = |a: u64| u128::from(a) * u128::from(a);
    let left = sq(pos_left) + sq(n_left - pos_left);
    let right = sq(pos_right) + sq(n_right - pos_right);
    (
        left * u128::from(n_right) + right * u128::from(n_left),
        u128::from(n_left) * u128::from(n_right),
    )
}

impl TreeBuilder<'_> {
    fn build(mut self, rows: Vec<usize>) -> DecisionTree {
        self.grow(rows, 0);
        DecisionTree { nodes: self.nodes }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len() as u64;
        let pos = rows.iter().filter(|&&r| self.data.labels[r]).count() as u64;
        self.nodes.push(Node::Leaf {
            positive_fraction: pos as f64 / n as f64,
        });

        let pure = pos == 0 || pos == n;
        let depth_capped = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped {
            return id;
        }
        let Some(best) = self.best_split(&rows, pos) else {
            return id;
        };

        let col = &self.data.cols[best.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| col[r] <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], total_pos: u64) -> Option<Candidate> {
        let d = self.data.cols.len();
        let k = self.config.max_features.resolve(d);
        let mut features = if k >= d {
            (0..d).collect::<Vec<_>>()
        } else {
            sample(&mut self.rng, d, k).into_vec()
        };
        features.sort_unstable();

        let n = rows.len() as u64;
        let min_leaf = self.config.min_samples_leaf as u64;
        let mut best: Option<Candidate> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(rows.len());
        for f in features {
            let col = &self.data.cols[f];
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (col[r], self.data.labels[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }

            let mut left_n = 0u64;
            let mut left_pos = 0u64;
            for i in 0..pairs.len() - 1 {
                left_n += 1;
                left_pos += u64::from(pairs[i].1);
                let (here, next) = (pairs[i].0, pairs[i + 1].0);
                if here == next {
                    continue;
                }
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let (num, den) = split_score(left_pos, left_n, total_pos - left_pos, right_n);
                let cand = Candidate {
                    feature: f,
                    threshold: here + (next - here) / 2.0,
                    num,
                    den,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}
