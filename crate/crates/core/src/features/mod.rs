//! Fixed-schema numeric encoding of issue reports.
//!
//! A [`FeatureVector`] is the concatenation, in this order, of
//!
//! 1. a one-hot block per categorical field (observed values plus one
//!    UNKNOWN slot) followed by a multi-hot keyword block,
//! 2. the derived-metric block (`log1p` of the description word count, and
//!    optionally comment count and reply latency, each with a presence flag),
//! 3. the TF-IDF block over the preprocessed report text.
//!
//! Every vector carries the [`SchemaId`] of the fitted space that produced
//! it, and the models refuse vectors from a different space.

mod tfidf;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, IssueReport};
use crate::error::{Error, Result};
use crate::textprep::{derived_metrics, preprocess, DerivedFeatures, Stopwords, TokenList};

pub use tfidf::{fit_tfidf, transform_tfidf, TfidfConfig, TfidfModel};

pub const CATEGORICAL_FIELDS: [&str; 7] = [
    "product",
    "component",
    "platform",
    "op_sys",
    "severity",
    "priority",
    "status",
];

/// Which report text feeds the TF-IDF block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFields {
    Summary,
    Description,
    #[default]
    Both,
}

impl TextFields {
    pub fn text_of(self, summary: &str, description: &str) -> String {
        match self {
            TextFields::Summary => summary.to_string(),
            TextFields::Description => description.to_string(),
            TextFields::Both => format!("{summary} {description}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Also encode comment count and reply latency. These only exist after
    /// a report is filed, so drafts always see them as absent.
    pub include_post_submission: bool,
    pub keyword_top_k: usize,
    pub tfidf: TfidfConfig,
    pub text_fields: TextFields,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            include_post_submission: false,
            keyword_top_k: 100,
            tfidf: TfidfConfig::default(),
            text_fields: TextFields::Both,
        }
    }
}

impl FeatureConfig {
    pub fn derived_width(&self) -> usize {
        if self.include_post_submission {
            5
        } else {
            1
        }
    }
}

/// Vocabularies for the categorical and keyword blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataEncoder {
    /// One vocabulary per entry of [`CATEGORICAL_FIELDS`], most frequent first.
    pub fields: Vec<Vec<String>>,
    pub keywords: Vec<String>,
}

/// Values sorted by descending count, ties lexicographic.
fn ranked_vocabulary<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    ranked.into_iter().map(|(v, _)| v.to_string()).collect()
}

pub fn fit_metadata_encoder(corpus: &Corpus, config: &FeatureConfig) -> Result<MetadataEncoder> {
    if corpus.is_empty() {
        return Err(Error::Input(
            "cannot fit a metadata encoder on an empty corpus".into(),
        ));
    }
    let fields = (0..CATEGORICAL_FIELDS.len())
        .map(|f| ranked_vocabulary(corpus.iter().filter_map(|r| r.categorical_fields()[f])))
        .collect();
    let mut keywords = ranked_vocabulary(corpus.iter().flat_map(|r| {
        let mut ks: Vec<&str> = r.keywords.iter().map(String::as_str).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }));
    keywords.truncate(config.keyword_top_k);
    Ok(MetadataEncoder { fields, keywords })
}

impl MetadataEncoder {
    /// Width of the categorical and keyword blocks, excluding derived metrics.
    pub fn width(&self) -> usize {
        self.fields.iter().map(|v| v.len() + 1).sum::<usize>() + self.keywords.len()
    }

    fn encode_into(&self, report: &IssueReport, out: &mut Vec<f64>) {
        for (vocab, value) in self.fields.iter().zip(report.categorical_fields()) {
            let start = out.len();
            out.resize(start + vocab.len() + 1, 0.0);
            let slot = value
                .and_then(|v| vocab.iter().position(|x| x == v))
                .unwrap_or(vocab.len());
            out[start + slot] = 1.0;
        }
        let start = out.len();
        out.resize(start + self.keywords.len(), 0.0);
        for k in &report.keywords {
            if let Some(i) = self.keywords.iter().position(|x| x == k) {
                out[start + i] = 1.0;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fields.len() != CATEGORICAL_FIELDS.len() {
            return Err(Error::invariant(
                "metadata_encoder",
                format!("expected 7 field vocabularies, found {}", self.fields.len()),
            ));
        }
        for (name, vocab) in CATEGORICAL_FIELDS.iter().zip(&self.fields) {
            let mut sorted = vocab.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != vocab.len() {
                return Err(Error::invariant(
                    "metadata_encoder",
                    format!("duplicate values in `{name}` vocabulary"),
                ));
            }
        }
        Ok(())
    }
}

fn push_derived(derived: &DerivedFeatures, config: &FeatureConfig, out: &mut Vec<f64>) {
    out.push(f64::from(derived.description_length_words).ln_1p());
    if config.include_post_submission {
        match derived.initial_comment_count {
            Some(n) => out.extend([f64::from(n).ln_1p(), 1.0]),
            None => out.extend([0.0, 0.0]),
        }
        match derived.time_to_first_reply_hours {
            Some(h) => out.extend([h.max(0.0).ln_1p(), 1.0]),
            None => out.extend([0.0, 0.0]),
        }
    }
}

/// Metadata block followed by the derived-metric block.
pub fn encode_metadata(
    encoder: &MetadataEncoder,
    report: &IssueReport,
    derived: &DerivedFeatures,
    config: &FeatureConfig,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoder.width() + config.derived_width());
    encoder.encode_into(report, &mut out);
    push_derived(derived, config, &mut out);
    out
}

/// Identifies a fitted feature space: a truncated SHA-256 over its
/// vocabularies, idf values, stopwords, and config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId([u8; 16]);

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for SchemaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("`{s}` is not a 32-digit hex schema id"));
        if s.len() != 32 || !s.is_ascii() {
            return Err(bad());
        }
        let mut out = [0u8; 16];
        for (i, b) in out.iter_mut().enumerate() {
            *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        Ok(SchemaId(out))
    }
}

impl Serialize for SchemaId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemaId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn compute_schema_id(
    encoder: &MetadataEncoder,
    tfidf: &TfidfModel,
    stopwords: &Stopwords,
    config: &FeatureConfig,
) -> SchemaId {
    #[derive(Serialize)]
    struct Canonical<'a> {
        config: &'a FeatureConfig,
        encoder: &'a MetadataEncoder,
        tfidf: &'a TfidfModel,
        stopwords: &'a Stopwords,
    }
    let bytes = serde_json::to_vec(&Canonical {
        config,
        encoder,
        tfidf,
        stopwords,
    })
    .expect("feature space serializes");
    let digest = Sha256::digest(&bytes);
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    SchemaId(id)
}

/// A dense feature vector tagged with the schema that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: SchemaId,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Check that every vector in `xs` carries the same schema; returns it.
pub fn common_schema(xs: &[FeatureVector]) -> Result<SchemaId> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Input("no feature vectors".into()))?;
    for x in xs {
        if x.schema != first.schema {
            return Err(Error::SchemaMismatch {
                expected: first.schema.to_string(),
                actual: x.schema.to_string(),
            });
        }
        if x.values.len() != first.values.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("width {}", first.values.len()),
                actual: format!("width {}", x.values.len()),
            });
        }
    }
    Ok(first.schema)
}

/// The text tokens that feed the TF-IDF block for a report.
pub fn report_tokens(
    summary: &str,
    description: &str,
    fields: TextFields,
    stopwords: &Stopwords,
) -> TokenList {
    preprocess(&fields.text_of(summary, description), stopwords)
}

/// Build a [`FeatureVector`] from separately fitted parts. Fails if the
/// parts were fitted under a different config than `config`.
pub fn assemble_features(
    encoder: &MetadataEncoder,
    tfidf: &TfidfModel,
    stopwords: &Stopwords,
    report: &IssueReport,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    if tfidf.config() != config.tfidf {
        return Err(Error::SchemaMismatch {
            expected: format!("{:?}", config.tfidf),
            actual: format!("{:?}", tfidf.config()),
        });
    }
    if encoder.keywords.len() > config.keyword_top_k {
        return Err(Error::SchemaMismatch {
            expected: format!("at most {} keywords", config.keyword_top_k),
            actual: format!("{} keywords", encoder.keywords.len()),
        });
    }
    let schema = compute_schema_id(encoder, tfidf, stopwords, config);
    assemble(encoder, tfidf, stopwords, config, schema, report)
}

fn assemble(
    encoder: &MetadataEncoder,
    tfidf: &TfidfModel,
    stopwords: &Stopwords,
    config: &FeatureConfig,
    schema: SchemaId,
    report: &IssueReport,
) -> Result<FeatureVector> {
    let derived = derived_metrics(report)?;
    let mut values = encode_metadata(encoder, report, &derived, config);
    let start = values.len();
    values.resize(start + tfidf.vocabulary_size(), 0.0);
    let tokens = report_tokens(
        &report.summary,
        &report.description,
        config.text_fields,
        stopwords,
    );
    tfidf::transform_into(tfidf, &tokens, &mut values[start..]);
    Ok(FeatureVector { values, schema })
}

/// A fitted feature space: encoder, TF-IDF model, stopwords, and config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureSpaceRepr", into = "FeatureSpaceRepr")]
pub struct FeatureSpace {
    config: FeatureConfig,
    stopwords: Stopwords,
    encoder: MetadataEncoder,
    tfidf: TfidfModel,
    schema: SchemaId,
}

#[derive(Serialize, Deserialize)]
struct FeatureSpaceRepr {
    schema_id: SchemaId,
    config: FeatureConfig,
    metadata_encoder: MetadataEncoder,
    tfidf: TfidfModel,
    stopwords: Stopwords,
}

impl TryFrom<FeatureSpaceRepr> for FeatureSpace {
    type Error = Error;

    fn try_from(r: FeatureSpaceRepr) -> Result<Self> {
        let space = FeatureSpace::from_parts(r.config, r.stopwords, r.metadata_encoder, r.tfidf)?;
        if space.schema != r.schema_id {
            return Err(Error::invariant(
                "feature_space",
                format!(
                    "stored schema id {} does not match recomputed {}",
                    r.schema_id, space.schema
                ),
            ));
        }
        Ok(space)
    }
}

impl From<FeatureSpace> for FeatureSpaceRepr {
    fn from(s: FeatureSpace) -> Self {
        FeatureSpaceRepr {
            schema_id: s.schema,
            config: s.config,
            metadata_encoder: s.encoder,
            tfidf: s.tfidf,
            stopwords: s.stopwords,
        }
    }
}

impl FeatureSpace {
    pub fn fit(corpus: &Corpus, config: FeatureConfig, stopwords: Stopwords) -> Result<Self> {
        let encoder = fit_metadata_encoder(corpus, &config)?;
        let docs: Vec<TokenList> = corpus
            .iter()
            .map(|r| report_tokens(&r.summary, &r.description, config.text_fields, &stopwords))
            .collect();
        let tfidf = fit_tfidf(&docs, config.tfidf)?;
        Self::from_parts(config, stopwords, encoder, tfidf)
    }

    pub fn from_parts(
        config: FeatureConfig,
        stopwords: Stopwords,
        encoder: MetadataEncoder,
        tfidf: TfidfModel,
    ) -> Result<Self> {
        encoder.validate()?;
        if tfidf.config() != config.tfidf {
            return Err(Error::invariant(
                "tfidf",
                "config differs from feature config",
            ));
        }
        if encoder.keywords.len() > config.keyword_top_k {
            return Err(Error::invariant(
                "metadata_encoder",
                "more keywords than keyword_top_k",
            ));
        }
        let schema = compute_schema_id(&encoder, &tfidf, &stopwords, &config);
        Ok(FeatureSpace {
            config,
            stopwords,
            encoder,
            tfidf,
            schema,
        })
    }

    pub fn schema(&self) -> SchemaId {
        self.schema
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn encoder(&self) -> &MetadataEncoder {
        &self.encoder
    }

    pub fn tfidf(&self) -> &TfidfModel {
        &self.tfidf
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn width(&self) -> usize {
        self.encoder.width() + self.config.derived_width() + self.tfidf.vocabulary_size()
    }

    pub fn encode(&self, report: &IssueReport) -> Result<FeatureVector> {
        assemble(
            &self.encoder,
            &self.tfidf,
            &self.stopwords,
            &self.config,
            self.schema,
            report,
        )
    }

    pub fn encode_corpus(&self, corpus: &Corpus) -> Result<Vec<FeatureVector>> {
        corpus.iter().map(|r| self.encode(r)).collect()
    }
}
