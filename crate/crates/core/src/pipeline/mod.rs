//! The two-stage advisor: a necessity ensemble decides whether a draft
//! needs a screenshot, then a per-category recommender ranks the kinds of
//! screenshot worth attaching.

mod templates;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{balanced_sample, Corpus, ImageCategory, IssueReport};
use crate::error::{Error, Result};
use crate::eval::split;
use crate::features::{FeatureConfig, FeatureSpace, FeatureVector, SchemaId};
use crate::models::{
    ensemble_predict, learn_threshold, logistic, train_forest, train_gnb, train_svm_ovr,
    EnsembleConfig, ForestConfig, ForestModel, GnbConfig, GnbModel, MemberVote, NecessityScorer,
    SvmBinaryModel, SvmConfig, SvmOvrModel,
};
use crate::textprep::Stopwords;

pub use templates::{suggestion_for, SuggestionTemplates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NecessityKind {
    RandomForest,
    GaussianNb,
    LinearSvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommenderKind {
    #[default]
    Gnb,
    Svm,
}

/// How many categories a positive verdict shows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub top_k: usize,
    /// Categories below this confidence are dropped, except that the single
    /// best category is always kept.
    pub cutoff: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Selection {
            top_k: 3,
            cutoff: 0.5,
        }
    }
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::invariant("selection", "top_k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.cutoff) {
            return Err(Error::invariant("selection", "cutoff outside [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    /// Down-sample the majority class before stage-1 training.
    pub balance: bool,
    /// Share of the stage-1 data held out to learn the decision threshold.
    pub validation_ratio: f64,
    /// Stage-1 members. The first one gets the learned threshold, the
    /// others vote at 0.5.
    pub necessity_members: Vec<NecessityKind>,
    pub forest: ForestConfig,
    pub gnb: GnbConfig,
    pub svm: SvmConfig,
    pub recommender: RecommenderKind,
    pub selection: Selection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            balance: true,
            validation_ratio: 0.2,
            necessity_members: vec![NecessityKind::RandomForest, NecessityKind::GaussianNb],
            forest: ForestConfig::default(),
            gnb: GnbConfig::default(),
            svm: SvmConfig::default(),
            recommender: RecommenderKind::Gnb,
            selection: Selection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.necessity_members.is_empty() {
            return Err(Error::Config(
                "at least one necessity member is required".into(),
            ));
        }
        if !(self.validation_ratio > 0.0 && self.validation_ratio < 1.0) {
            return Err(Error::Config(format!(
                "validation_ratio must lie in (0, 1), got {}",
                self.validation_ratio
            )));
        }
        self.selection
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Independent sub-seeds for the seeded steps of training.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SEED_VALIDATION: u64 = 1;
const SEED_FOREST: u64 = 2;
const SEED_SVM: u64 = 3;
const SEED_RECOMMENDER: u64 = 4;

/// A trained stage-1 member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NecessityModel {
    RandomForest(ForestModel),
    GaussianNb(GnbModel),
    LinearSvm(SvmBinaryModel),
}

impl NecessityModel {
    pub fn kind(&self) -> NecessityKind {
        match self {
            NecessityModel::RandomForest(_) => NecessityKind::RandomForest,
            NecessityModel::GaussianNb(_) => NecessityKind::GaussianNb,
            NecessityModel::LinearSvm(_) => NecessityKind::LinearSvm,
        }
    }

    pub fn schema(&self) -> SchemaId {
        match self {
            NecessityModel::RandomForest(m) => m.schema,
            NecessityModel::GaussianNb(m) => m.schema,
            NecessityModel::LinearSvm(m) => m.schema,
        }
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        match self {
            NecessityModel::RandomForest(m) => m.predict_proba(x),
            NecessityModel::GaussianNb(m) => m.probability_of(x, 1),
            NecessityModel::LinearSvm(m) => m.predict_proba(x),
        }
    }

    fn validate(&self, width: usize) -> Result<()> {
        let section = "necessity";
        match self {
            NecessityModel::RandomForest(m) => {
                m.validate()?;
                if m.width != width {
                    return Err(Error::invariant(
                        section,
                        "forest width differs from feature width",
                    ));
                }
            }
            NecessityModel::GaussianNb(m) => {
                m.validate()?;
                if m.width() != width {
                    return Err(Error::invariant(
                        section,
                        "gnb width differs from feature width",
                    ));
                }
                let labels: Vec<usize> = m.classes.iter().map(|c| c.label).collect();
                if labels != [0, 1] {
                    return Err(Error::invariant(
                        section,
                        "gnb member must have classes 0 and 1",
                    ));
                }
            }
            NecessityModel::LinearSvm(m) => {
                let w = &m.machine.weights;
                if w.len() != width || w.iter().chain([&m.machine.bias]).any(|v| !v.is_finite()) {
                    return Err(Error::invariant(section, "malformed SVM weights"));
                }
            }
        }
        Ok(())
    }
}

impl NecessityKind {
    pub fn name(self) -> &'static str {
        match self {
            NecessityKind::RandomForest => "random_forest",
            NecessityKind::GaussianNb => "gaussian_nb",
            NecessityKind::LinearSvm => "linear_svm",
        }
    }
}

impl NecessityScorer for NecessityModel {
    fn name(&self) -> &str {
        self.kind().name()
    }

    fn score(&self, _report: &IssueReport, features: &FeatureVector) -> Result<f64> {
        self.predict_proba(features)
    }
}

/// An extra stage-1 voter supplied at inference time.
#[derive(Clone, Copy)]
pub struct ExternalMember<'a> {
    pub scorer: &'a dyn NecessityScorer,
    pub threshold: f64,
}

/// Stage-1 members and their voting thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityStage {
    pub members: Vec<NecessityModel>,
    pub ensemble: EnsembleConfig,
}

impl NecessityStage {
    /// Negative-voting verdict and the reported (minimum) probability.
    pub fn verdict(
        &self,
        report: &IssueReport,
        x: &FeatureVector,
        extra: &[ExternalMember<'_>],
    ) -> Result<(bool, f64)> {
        let mut probs = Vec::with_capacity(self.members.len() + extra.len());
        for m in &self.members {
            probs.push(m.predict_proba(x)?);
        }
        let mut thresholds = self.ensemble.thresholds();
        for e in extra {
            let p = e.scorer.score(report, x)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Input(format!(
                    "scorer `{}` returned {p}, outside [0, 1]",
                    e.scorer.name()
                )));
            }
            probs.push(p);
            thresholds.push(e.threshold);
        }
        ensemble_predict(&probs, &thresholds)
    }

    fn validate(&self, schema: SchemaId, width: usize) -> Result<()> {
        self.ensemble.validate()?;
        if self.members.len() != self.ensemble.members.len() {
            return Err(Error::invariant(
                "ensemble",
                format!(
                    "{} models but {} votes",
                    self.members.len(),
                    self.ensemble.members.len()
                ),
            ));
        }
        for (m, v) in self.members.iter().zip(&self.ensemble.members) {
            if m.kind().name() != v.name {
                return Err(Error::invariant(
                    "ensemble",
                    format!(
                        "vote `{}` does not match member `{}`",
                        v.name,
                        m.kind().name()
                    ),
                ));
            }
            if m.schema() != schema {
                return Err(Error::invariant(
                    "necessity",
                    "member schema differs from feature schema",
                ));
            }
            m.validate(width)?;
        }
        Ok(())
    }
}

/// One binary-relevance scorer. Categories whose training labels were all
/// equal get a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CategoryScorer {
    Gnb(GnbModel),
    Constant { probability: f64 },
}

/// Stage 2: one score per category, higher meaning more relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recommender {
    /// Scores are GNB log-odds.
    GnbBank { categories: Vec<CategoryScorer> },
    /// Scores are SVM margins.
    Svm(SvmOvrModel),
}

impl Recommender {
    pub fn kind(&self) -> RecommenderKind {
        match self {
            Recommender::GnbBank { .. } => RecommenderKind::Gnb,
            Recommender::Svm(_) => RecommenderKind::Svm,
        }
    }

    /// Raw scores in category order. Confidence is their logistic.
    pub fn scores(&self, x: &FeatureVector) -> Result<[f64; ImageCategory::COUNT]> {
        match self {
            Recommender::GnbBank { categories } => {
                let mut out = [0.0; ImageCategory::COUNT];
                for (o, s) in out.iter_mut().zip(categories) {
                    *o = match s {
                        CategoryScorer::Gnb(m) => m.log_odds(x, 1)?,
                        CategoryScorer::Constant { probability } => {
                            probability.ln() - (1.0 - probability).ln()
                        }
                    };
                }
                Ok(out)
            }
            Recommender::Svm(m) => m.margins(x),
        }
    }

    fn validate(&self, schema: SchemaId, width: usize) -> Result<()> {
        let section = "recommender";
        match self {
            Recommender::GnbBank { categories } => {
                if categories.len() != ImageCategory::COUNT {
                    return Err(Error::invariant(
                        section,
                        format!("expected 10 category scorers, found {}", categories.len()),
                    ));
                }
                for s in categories {
                    match s {
                        CategoryScorer::Gnb(m) => {
                            m.validate()?;
                            if m.schema != schema || m.width() != width {
                                return Err(Error::invariant(
                                    section,
                                    "scorer schema differs from feature schema",
                                ));
                            }
                            let labels: Vec<usize> = m.classes.iter().map(|c| c.label).collect();
                            if labels != [0, 1] {
                                return Err(Error::invariant(
                                    section,
                                    "scorer must have classes 0 and 1",
                                ));
                            }
                        }
                        CategoryScorer::Constant { probability } => {
                            if *probability != 0.0 && *probability != 1.0 {
                                return Err(Error::invariant(
                                    section,
                                    "constant scorer must be 0 or 1",
                                ));
                            }
                        }
                    }
                }
            }
            Recommender::Svm(m) => {
                m.validate()?;
                if m.schema != schema || m.machines[0].weights.len() != width {
                    return Err(Error::invariant(
                        section,
                        "SVM schema differs from feature schema",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    /// SHA-256 of the training corpus in JSONL form.
    pub corpus_sha256: String,
    pub n_reports: usize,
    pub seed: u64,
    /// Set when training used only the train side of a holdout split.
    pub holdout_ratio: Option<f64>,
    pub schema_id: SchemaId,
    pub config: PipelineConfig,
}

/// Inference-time view of a report: no ids, labels, or post-submission
/// fields. Summary and description may be empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DraftReport {
    pub summary: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_sys: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
}

const DRAFT_TEXT_FIELDS: [&str; 2] = ["summary", "description"];
const DRAFT_OPTIONAL_FIELDS: [&str; 7] = crate::features::CATEGORICAL_FIELDS;

impl DraftReport {
    /// Field-checked conversion from a JSON request body. `summary` and
    /// `description` are required strings; the categorical fields are
    /// optional strings (or null); `keywords` is an optional string array.
    /// Unknown fields are ignored.
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::FieldType {
            line: 1,
            field: "<root>".into(),
            message: format!("expected a JSON object, found {}", type_name(value)),
        })?;
        let mut draft = DraftReport::default();
        for field in DRAFT_TEXT_FIELDS {
            let v = obj.get(field).ok_or_else(|| Error::MissingField {
                line: 1,
                field: field.into(),
            })?;
            let s = v.as_str().ok_or_else(|| wrong_type(field, "a string", v))?;
            match field {
                "summary" => draft.summary = s.to_string(),
                _ => draft.description = s.to_string(),
            }
        }
        let mut categorical = [None, None, None, None, None, None, None];
        for (slot, field) in categorical.iter_mut().zip(DRAFT_OPTIONAL_FIELDS) {
            *slot = optional_string(obj, field)?;
        }
        let [product, component, platform, op_sys, severity, priority, status] = categorical;
        draft.product = product;
        draft.component = component;
        draft.platform = platform;
        draft.op_sys = op_sys;
        draft.severity = severity;
        draft.priority = priority;
        draft.status = status;
        match obj.get("keywords") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let s = item
                        .as_str()
                        .ok_or_else(|| wrong_type(&format!("keywords[{i}]"), "a string", item))?;
                    draft.keywords.push(s.to_string());
                }
            }
            Some(v) => return Err(wrong_type("keywords", "an array of strings", v)),
        }
        Ok(draft)
    }

    pub fn to_issue_report(&self) -> IssueReport {
        IssueReport {
            product: self.product.clone(),
            component: self.component.clone(),
            platform: self.platform.clone(),
            op_sys: self.op_sys.clone(),
            severity: self.severity.clone(),
            priority: self.priority.clone(),
            status: self.status.clone(),
            keywords: self.keywords.clone(),
            ..IssueReport::new("draft", self.summary.clone(), self.description.clone())
        }
    }
}

impl From<&IssueReport> for DraftReport {
    fn from(r: &IssueReport) -> Self {
        DraftReport {
            summary: r.summary.clone(),
            description: r.description.clone(),
            product: r.product.clone(),
            component: r.component.clone(),
            platform: r.platform.clone(),
            op_sys: r.op_sys.clone(),
            severity: r.severity.clone(),
            priority: r.priority.clone(),
            status: r.status.clone(),
            keywords: r.keywords.clone(),
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn wrong_type(field: &str, expected: &str, found: &Value) -> Error {
    Error::FieldType {
        line: 1,
        field: field.into(),
        message: format!("expected {expected}, found {}", type_name(found)),
    }
}

fn optional_string(obj: &Map<String, Value>, field: &str) -> Result<Option<String>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(v) => Err(wrong_type(field, "a string", v)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecommendation {
    #[serde(rename = "name")]
    pub category: ImageCategory,
    pub confidence: f64,
    pub suggestion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub needs_image: bool,
    pub probability: f64,
    pub threshold: f64,
    pub categories: Vec<CategoryRecommendation>,
    pub model_version: String,
}

/// A complete two-stage model. Immutable once trained; share it freely
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub(crate) model_version: String,
    pub(crate) features: FeatureSpace,
    pub(crate) necessity: NecessityStage,
    pub(crate) recommender: Recommender,
    pub(crate) selection: Selection,
    pub(crate) templates: SuggestionTemplates,
    pub(crate) fingerprint: TrainingFingerprint,
}

/// Schema, thresholds, and category list of a model, for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_version: String,
    pub schema_id: SchemaId,
    pub feature_width: usize,
    pub tfidf_vocabulary: usize,
    pub include_post_submission: bool,
    pub categories: Vec<ImageCategory>,
    pub members: Vec<MemberVote>,
    pub decision_threshold: f64,
    pub recommender: RecommenderKind,
    pub top_k: usize,
    pub cutoff: f64,
    pub trained_on: usize,
    pub seed: u64,
}

impl TrainedModel {
    pub(crate) fn from_parts(
        features: FeatureSpace,
        necessity: NecessityStage,
        recommender: Recommender,
        selection: Selection,
        templates: SuggestionTemplates,
        fingerprint: TrainingFingerprint,
        model_version: String,
    ) -> Result<Self> {
        let model = TrainedModel {
            model_version,
            features,
            necessity,
            recommender,
            selection,
            templates,
            fingerprint,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every section, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let schema = self.features.schema();
        let width = self.features.width();
        if self.fingerprint.schema_id != schema {
            return Err(Error::invariant(
                "fingerprint",
                format!(
                    "schema id {} does not match the feature space {}",
                    self.fingerprint.schema_id, schema
                ),
            ));
        }
        self.necessity.validate(schema, width)?;
        self.recommender.validate(schema, width)?;
        self.selection.validate()?;
        self.templates.validate()?;
        if self.model_version.is_empty() {
            return Err(Error::invariant("model_version", "empty"));
        }
        Ok(())
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn schema(&self) -> SchemaId {
        self.features.schema()
    }

    pub fn features(&self) -> &FeatureSpace {
        &self.features
    }

    pub fn necessity(&self) -> &NecessityStage {
        &self.necessity
    }

    pub fn recommender(&self) -> &Recommender {
        &self.recommender
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn templates(&self) -> &SuggestionTemplates {
        &self.templates
    }

    pub fn fingerprint(&self) -> &TrainingFingerprint {
        &self.fingerprint
    }

    pub fn threshold(&self) -> f64 {
        self.necessity.ensemble.decision_threshold
    }

    /// The same model with a different category selection.
    pub fn with_selection(&self, selection: Selection) -> Result<Self> {
        selection.validate()?;
        Ok(TrainedModel {
            selection,
            ..self.clone()
        })
    }

    pub fn info(&self) -> ModelInfo {
        ModelInfo {
            model_version: self.model_version.clone(),
            schema_id: self.schema(),
            feature_width: self.features.width(),
            tfidf_vocabulary: self.features.tfidf().vocabulary_size(),
            include_post_submission: self.features.config().include_post_submission,
            categories: ImageCategory::ALL.to_vec(),
            members: self.necessity.ensemble.members.clone(),
            decision_threshold: self.threshold(),
            recommender: self.recommender.kind(),
            top_k: self.selection.top_k,
            cutoff: self.selection.cutoff,
            trained_on: self.fingerprint.n_reports,
            seed: self.fingerprint.seed,
        }
    }

    pub fn necessity_verdict(
        &self,
        report: &IssueReport,
        x: &FeatureVector,
    ) -> Result<(bool, f64)> {
        self.necessity.verdict(report, x, &[])
    }

    /// Selected categories with confidences, best first. Ranked by raw
    /// score, ties by category order; kept if confidence reaches the
    /// cutoff, padded to one, truncated to `top_k`.
    pub fn recommend(&self, x: &FeatureVector) -> Result<Vec<(ImageCategory, f64)>> {
        let scores = self.recommender.scores(x)?;
        Ok(select_categories(&scores, self.selection))
    }

    pub fn analyze(&self, draft: &DraftReport) -> Result<Recommendation> {
        self.analyze_with(draft, &[])
    }

    /// Like [`analyze`](Self::analyze), with extra stage-1 voters.
    pub fn analyze_with(
        &self,
        draft: &DraftReport,
        extra: &[ExternalMember<'_>],
    ) -> Result<Recommendation> {
        let report = draft.to_issue_report();
        let x = self.features.encode(&report)?;
        let (needs_image, probability) = self.necessity.verdict(&report, &x, extra)?;
        let categories = if needs_image {
            self.recommend(&x)?
                .into_iter()
                .map(|(category, confidence)| CategoryRecommendation {
                    category,
                    confidence,
                    suggestion: self.templates.get(category).to_string(),
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Recommendation {
            needs_image,
            probability,
            threshold: self.threshold(),
            categories,
            model_version: self.model_version.clone(),
        })
    }
}

pub fn analyze(model: &TrainedModel, draft: &DraftReport) -> Result<Recommendation> {
    model.analyze(draft)
}

pub fn select_categories(
    scores: &[f64; ImageCategory::COUNT],
    selection: Selection,
) -> Vec<(ImageCategory, f64)> {
    let mut order: Vec<usize> = (0..ImageCategory::COUNT).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let ranked: Vec<(ImageCategory, f64)> = order
        .into_iter()
        .map(|i| (ImageCategory::ALL[i], logistic(scores[i])))
        .collect();
    let passing = ranked
        .iter()
        .take_while(|(_, c)| *c >= selection.cutoff)
        .count();
    let keep = passing.max(1).min(selection.top_k);
    ranked.into_iter().take(keep).collect()
}

/// A fitted feature space with a trained stage 1.
#[derive(Debug, Clone)]
pub struct NecessityTraining {
    pub features: FeatureSpace,
    pub necessity: NecessityStage,
}

/// Fits features on `corpus` and trains the listed stage-1 members. With
/// `fixed_threshold` every member votes at 0.5; otherwise the first
/// member's threshold is learned on a validation slice.
pub fn train_necessity(
    corpus: &Corpus,
    config: &PipelineConfig,
    kinds: &[NecessityKind],
    fixed_threshold: bool,
    seed: u64,
) -> Result<NecessityTraining> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::DegenerateCorpus("empty corpus".into()));
    }
    let features = FeatureSpace::fit(corpus, config.features, Stopwords::english())?;
    let necessity = fit_necessity(&features, corpus, config, kinds, !fixed_threshold, seed)?;
    Ok(NecessityTraining {
        features,
        necessity,
    })
}

fn labels(corpus: &Corpus) -> Result<Vec<bool>> {
    corpus
        .iter()
        .map(|r| {
            r.has_image.ok_or_else(|| Error::MissingLabel {
                id: r.id.clone(),
                field: "has_image",
            })
        })
        .collect()
}

fn train_member(
    kind: NecessityKind,
    x: &[FeatureVector],
    y: &[bool],
    config: &PipelineConfig,
    seed: u64,
) -> Result<NecessityModel> {
    Ok(match kind {
        NecessityKind::RandomForest => NecessityModel::RandomForest(train_forest(
            x,
            y,
            &config.forest,
            derive_seed(seed, SEED_FOREST),
        )?),
        NecessityKind::GaussianNb => {
            let classes: Vec<usize> = y.iter().map(|&b| usize::from(b)).collect();
            NecessityModel::GaussianNb(train_gnb(x, &classes, &config.gnb)?)
        }
        NecessityKind::LinearSvm => NecessityModel::LinearSvm(SvmBinaryModel::train(
            x,
            y,
            &config.svm,
            derive_seed(seed, SEED_SVM),
        )?),
    })
}

fn fit_necessity(
    features: &FeatureSpace,
    corpus: &Corpus,
    config: &PipelineConfig,
    kinds: &[NecessityKind],
    learn: bool,
    seed: u64,
) -> Result<NecessityStage> {
    if kinds.is_empty() {
        return Err(Error::Config(
            "at least one necessity member is required".into(),
        ));
    }
    labels(corpus)?;
    let stage1 = if config.balance {
        balanced_sample(corpus, seed)?
    } else {
        corpus.clone()
    };

    let holdout = if learn {
        match split(
            &stage1,
            1.0 - config.validation_ratio,
            derive_seed(seed, SEED_VALIDATION),
        ) {
            Ok((fit, valid)) => {
                let yv = labels(&valid)?;
                if yv.iter().any(|&v| v) && yv.iter().any(|&v| !v) {
                    Some((fit, valid, yv))
                } else {
                    None
                }
            }
            Err(Error::DegenerateCorpus(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if learn && holdout.is_none() {
        tracing::warn!(
            n = stage1.len(),
            "validation slice lacks one class; voting thresholds stay at 0.5"
        );
    }

    let fit_corpus = holdout.as_ref().map_or(&stage1, |(fit, _, _)| fit);
    let x = features.encode_corpus(fit_corpus)?;
    let y = labels(fit_corpus)?;
    let members: Vec<NecessityModel> = kinds
        .iter()
        .map(|&k| train_member(k, &x, &y, config, seed))
        .collect::<Result<_>>()?;

    let mut thresholds = vec![0.5; members.len()];
    if let Some((_, valid, yv)) = &holdout {
        let probs: Vec<f64> = features
            .encode_corpus(valid)?
            .iter()
            .map(|xv| members[0].predict_proba(xv))
            .collect::<Result<_>>()?;
        thresholds[0] = learn_threshold(&probs, yv)?;
    }
    let ensemble = EnsembleConfig {
        members: members
            .iter()
            .zip(&thresholds)
            .map(|(m, &threshold)| MemberVote {
                name: m.kind().name().to_string(),
                threshold,
            })
            .collect(),
        decision_threshold: thresholds[0],
    };
    Ok(NecessityStage { members, ensemble })
}

fn fit_recommender(
    features: &FeatureSpace,
    corpus: &Corpus,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Recommender> {
    let eligible: Vec<&IssueReport> = corpus
        .iter()
        .filter(|r| {
            r.has_image == Some(true)
                && r.label_vector
                    .as_ref()
                    .is_some_and(|lv| !lv.is_conflicted())
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::DegenerateTraining(
            "no image-bearing reports with a non-conflicted label_vector to train the category recommender"
                .into(),
        ));
    }
    let x: Vec<FeatureVector> = eligible
        .iter()
        .map(|r| features.encode(r))
        .collect::<Result<_>>()?;
    let relevant: Vec<BTreeSet<ImageCategory>> = eligible
        .iter()
        .map(|r| r.relevant_categories().unwrap_or_default())
        .collect();
    match config.recommender {
        RecommenderKind::Svm => {
            if x.len() < 2 {
                return Err(Error::DegenerateTraining(
                    "the SVM recommender needs at least two labeled image reports".into(),
                ));
            }
            Ok(Recommender::Svm(train_svm_ovr(
                &x,
                &relevant,
                &config.svm,
                derive_seed(seed, SEED_RECOMMENDER),
            )?))
        }
        RecommenderKind::Gnb => {
            let categories = ImageCategory::ALL
                .iter()
                .map(|c| {
                    let y: Vec<usize> = relevant
                        .iter()
                        .map(|s| usize::from(s.contains(c)))
                        .collect();
                    if y.iter().all(|&v| v == y[0]) {
                        Ok(CategoryScorer::Constant {
                            probability: y[0] as f64,
                        })
                    } else {
                        train_gnb(&x, &y, &config.gnb).map(CategoryScorer::Gnb)
                    }
                })
                .collect::<Result<_>>()?;
            Ok(Recommender::GnbBank { categories })
        }
    }
}

/// SHA-256 of a corpus in JSONL form, as recorded in the fingerprint.
pub fn corpus_sha256(corpus: &Corpus) -> String {
    hex(&Sha256::digest(corpus.to_jsonl().as_bytes()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Package version plus a content hash of everything else in the model.
fn compute_model_version(model: &TrainedModel) -> Result<String> {
    let body = crate::artifact::to_json_string(model)?;
    let digest = Sha256::digest(body.as_bytes());
    Ok(format!(
        "{}+{}",
        env!("CARGO_PKG_VERSION"),
        &hex(&digest)[..12]
    ))
}

/// Trains both stages on `corpus`.
pub fn train_pipeline(corpus: &Corpus, config: &PipelineConfig, seed: u64) -> Result<TrainedModel> {
    train_pipeline_with_holdout(corpus, config, seed, None)
}

/// Like [`train_pipeline`], but with `holdout` set only the train side of
/// `split(corpus, holdout, seed)` is used, and the fingerprint records it.
pub fn train_pipeline_with_holdout(
    corpus: &Corpus,
    config: &PipelineConfig,
    seed: u64,
    holdout: Option<f64>,
) -> Result<TrainedModel> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::DegenerateCorpus("empty corpus".into()));
    }
    let train_side;
    let corpus = match holdout {
        Some(ratio) => {
            train_side = split(corpus, ratio, seed)?.0;
            &train_side
        }
        None => corpus,
    };
    labels(corpus)?;

    let features = FeatureSpace::fit(corpus, config.features, Stopwords::english())?;
    let necessity = fit_necessity(
        &features,
        corpus,
        config,
        &config.necessity_members,
        true,
        seed,
    )?;
    let recommender = fit_recommender(&features, corpus, config, seed)?;
    let fingerprint = TrainingFingerprint {
        corpus_sha256: corpus_sha256(corpus),
        n_reports: corpus.len(),
        seed,
        holdout_ratio: holdout,
        schema_id: features.schema(),
        config: config.clone(),
    };
    let mut model = TrainedModel::from_parts(
        features,
        necessity,
        recommender,
        config.selection,
        SuggestionTemplates::bundled(),
        fingerprint,
        "unversioned".into(),
    )?;
    model.model_version = compute_model_version(&model)?;
    Ok(model)
}
