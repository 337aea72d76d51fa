use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::TokenList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub min_df: usize,
    pub max_vocab: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_df: 2,
            max_vocab: 20_000,
        }
    }
}

/// Smooth-idf TF-IDF with raw term counts and L2 row normalization.
///
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`. Columns are the surviving
/// terms in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfidfRepr", into = "TfidfRepr")]
pub struct TfidfModel {
    terms: Vec<String>,
    idf: Vec<f64>,
    config: TfidfConfig,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfidfRepr {
    config: TfidfConfig,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl TryFrom<TfidfRepr> for TfidfModel {
    type Error = Error;

    fn try_from(r: TfidfRepr) -> Result<Self> {
        TfidfModel::from_parts(r.terms, r.idf, r.config)
    }
}

impl From<TfidfModel> for TfidfRepr {
    fn from(m: TfidfModel) -> Self {
        TfidfRepr {
            config: m.config,
            terms: m.terms,
            idf: m.idf,
        }
    }
}

impl TfidfModel {
    pub fn from_parts(terms: Vec<String>, idf: Vec<f64>, config: TfidfConfig) -> Result<Self> {
        if terms.len() != idf.len() {
            return Err(Error::invariant(
                "tfidf",
                format!("{} terms but {} idf values", terms.len(), idf.len()),
            ));
        }
        if let Some(w) = terms.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invariant(
                "tfidf",
                format!("terms not strictly sorted at `{}`", w[1]),
            ));
        }
        if let Some(v) = idf.iter().find(|v| !v.is_finite() || **v < 1.0) {
            return Err(Error::invariant("tfidf", format!("idf value {v} below 1")));
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(TfidfModel {
            terms,
            idf,
            config,
            index,
        })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn config(&self) -> TfidfConfig {
        self.config
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.column(term).map(|i| self.idf[i])
    }
}

pub fn fit_tfidf(docs: &[TokenList], config: TfidfConfig) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(Error::Input("TF-IDF needs at least one document".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }

    let mut kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(_, n)| n >= config.min_df)
        .collect();
    // BTreeMap order is lexicographic, so a stable sort on df keeps ties lexicographic
    kept.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    kept.truncate(config.max_vocab);
    kept.sort_by(|a, b| a.0.cmp(b.0));

    if kept.is_empty() {
        tracing::warn!(
            docs = docs.len(),
            min_df = config.min_df,
            "no term reached min_df; TF-IDF block is empty"
        );
    }

    let n = docs.len() as f64;
    let idf = kept
        .iter()
        .map(|&(_, d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let terms = kept.into_iter().map(|(t, _)| t.to_string()).collect();
    TfidfModel::from_parts(terms, idf, config)
}

/// Raw counts times idf, L2-normalized; all-zero rows stay zero.
pub fn transform_tfidf(model: &TfidfModel, doc: &TokenList) -> Vec<f64> {
    let mut out = vec![0.0; model.vocabulary_size()];
    transform_into(model, doc, &mut out);
    out
}

pub(crate) fn transform_into(model: &TfidfModel, doc: &TokenList, out: &mut [f64]) {
    debug_assert_eq!(out.len(), model.vocabulary_size());
    for t in doc.iter() {
        if let Some(i) = model.column(t) {
            out[i] += 1.0;
        }
    }
    for (v, idf) in out.iter_mut().zip(&model.idf) {
        *v *= idf;
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in out.iter_mut() {
            *v /= norm;
        }
    }
}
