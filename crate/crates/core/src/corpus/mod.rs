//! Issue-report corpora: the record schema, JSONL persistence, annotation
//! aggregation, label overrides, and class-balanced sampling.
//!
//! A corpus file is UTF-8 JSONL with one [`IssueReport`] per line. Field
//! names are the snake_case struct fields, timestamps are RFC 3339, and
//! `label_vector` is a ten-element integer array in [`ImageCategory`] order.

mod category;

pub mod bugzilla;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use category::{binarize_labels, ImageCategory, LabelVector};

use crate::error::{Error, Result};

/// One Bugzilla-style issue report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub id: String,
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
    pub summary: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_reply_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_comment_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachment_mimes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_image: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_vector: Option<LabelVector>,
}

impl IssueReport {
    /// A report with only the required fields set.
    pub fn new(
        id: impl Into<String>,
        summary: impl Into<String>,
        description: impl Into<String>,
    ) -> Self {
        IssueReport {
            id: id.into(),
            product: None,
            component: None,
            platform: None,
            op_sys: None,
            severity: None,
            priority: None,
            status: None,
            keywords: Vec::new(),
            summary: summary.into(),
            description: description.into(),
            created_at: None,
            first_reply_at: None,
            initial_comment_count: None,
            attachment_mimes: Vec::new(),
            has_image: None,
            label_vector: None,
        }
    }

    /// The seven categorical metadata fields, in encoding order.
    pub fn categorical_fields(&self) -> [Option<&str>; 7] {
        [
            self.product.as_deref(),
            self.component.as_deref(),
            self.platform.as_deref(),
            self.op_sys.as_deref(),
            self.severity.as_deref(),
            self.priority.as_deref(),
            self.status.as_deref(),
        ]
    }

    /// Majority-vote categories, or `None` when unlabeled.
    pub fn relevant_categories(&self) -> Option<BTreeSet<ImageCategory>> {
        self.label_vector.as_ref().map(binarize_labels)
    }

    fn check_invariants(&self, line: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Range {
                line,
                field: "id".into(),
                value: "\"\"".into(),
                bounds: "non-empty strings",
            });
        }
        if let (Some(created), Some(reply)) = (self.created_at, self.first_reply_at) {
            if reply < created {
                return Err(Error::Data(format!(
                    "line {line}: report `{}` has first_reply_at before created_at",
                    self.id
                )));
            }
        }
        if self.label_vector.is_some() && self.has_image.is_none() {
            return Err(Error::MissingField {
                line,
                field: "has_image".into(),
            });
        }
        Ok(())
    }
}

/// An ordered collection of reports with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    reports: Vec<IssueReport>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(reports: Vec<IssueReport>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(reports.len());
        for r in &reports {
            if r.id.is_empty() {
                return Err(Error::Input("report id must be non-empty".into()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Input(format!("duplicate report id `{}`", r.id)));
            }
        }
        Ok(Corpus {
            reports,
            provenance: provenance.into(),
        })
    }

    pub fn reports(&self) -> &[IssueReport] {
        &self.reports
    }

    pub fn into_reports(self) -> Vec<IssueReport> {
        self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, IssueReport> {
        self.reports.iter()
    }

    /// Keep the reports whose position satisfies `keep`, preserving order.
    pub(crate) fn select(&self, keep: &[bool], provenance: String) -> Corpus {
        Corpus {
            reports: self
                .reports
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(r, _)| r.clone())
                .collect(),
            provenance,
        }
    }

    /// Serialize as JSONL, one report per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.reports {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a IssueReport;
    type IntoIter = std::slice::Iter<'a, IssueReport>;

    fn into_iter(self) -> Self::IntoIter {
        self.reports.iter()
    }
}

/// Parse one JSONL record. `line` is 1-based and only used in errors.
pub fn parse_issue_record(text: &str, line: usize) -> Result<IssueReport> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(Error::Parse {
            line,
            message: "expected a JSON object".into(),
        });
    };
    let fields = Fields { obj: &obj, line };

    let report = IssueReport {
        id: fields.required_str("id")?,
        product: fields.opt_str("product")?,
        component: fields.opt_str("component")?,
        platform: fields.opt_str("platform")?,
        op_sys: fields.opt_str("op_sys")?,
        severity: fields.opt_str("severity")?,
        priority: fields.opt_str("priority")?,
        status: fields.opt_str("status")?,
        keywords: fields.str_list("keywords")?,
        summary: fields.required_str("summary")?,
        description: fields.required_str("description")?,
        created_at: fields.opt_time("created_at")?,
        first_reply_at: fields.opt_time("first_reply_at")?,
        initial_comment_count: fields.opt_u32("initial_comment_count")?,
        attachment_mimes: fields.str_list("attachment_mimes")?,
        has_image: fields.opt_bool("has_image")?,
        label_vector: fields.opt_label_vector("label_vector")?,
    };
    report.check_invariants(line)?;
    Ok(report)
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
}

impl Fields<'_> {
    fn get(&self, field: &str) -> Option<&Value> {
        self.obj.get(field).filter(|v| !v.is_null())
    }

    fn type_error(&self, field: &str, expected: &str, found: &Value) -> Error {
        Error::FieldType {
            line: self.line,
            field: field.into(),
            message: format!("expected {expected}, found {}", json_kind(found)),
        }
    }

    fn required_str(&self, field: &str) -> Result<String> {
        self.opt_str(field)?.ok_or_else(|| Error::MissingField {
            line: self.line,
            field: field.into(),
        })
    }

    fn opt_str(&self, field: &str) -> Result<Option<String>> {
        match self.get(field) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.type_error(field, "a string", v)),
        }
    }

    fn str_list(&self, field: &str) -> Result<Vec<String>> {
        match self.get(field) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(self.type_error(field, "an array of strings", other)),
                })
                .collect(),
            Some(v) => Err(self.type_error(field, "an array of strings", v)),
        }
    }

    fn opt_bool(&self, field: &str) -> Result<Option<bool>> {
        match self.get(field) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => Err(self.type_error(field, "a boolean", v)),
        }
    }

    fn opt_u32(&self, field: &str) -> Result<Option<u32>> {
        match self.get(field) {
            None => Ok(None),
            Some(v @ Value::Number(n)) => match n.as_u64() {
                Some(u) => u32::try_from(u).map(Some).map_err(|_| Error::Range {
                    line: self.line,
                    field: field.into(),
                    value: u.to_string(),
                    bounds: "0..=4294967295",
                }),
                None => Err(self.type_error(field, "a non-negative integer", v)),
            },
            Some(v) => Err(self.type_error(field, "a non-negative integer", v)),
        }
    }

    fn opt_time(&self, field: &str) -> Result<Option<DateTime<Utc>>> {
        match self.opt_str(field)? {
            None => Ok(None),
            Some(s) => DateTime::parse_from_rfc3339(&s)
                .map(|t| Some(t.with_timezone(&Utc)))
                .map_err(|e| Error::FieldType {
                    line: self.line,
                    field: field.into(),
                    message: format!("not an RFC 3339 timestamp: {e}"),
                }),
        }
    }

    fn opt_label_vector(&self, field: &str) -> Result<Option<LabelVector>> {
        let Some(v) = self.get(field) else {
            return Ok(None);
        };
        let expected = "an array of 10 integers";
        let Value::Array(items) = v else {
            return Err(self.type_error(field, expected, v));
        };
        if items.len() != ImageCategory::COUNT {
            return Err(Error::FieldType {
                line: self.line,
                field: field.into(),
                message: format!("expected 10 entries, found {}", items.len()),
            });
        }
        let mut counts = [0u8; ImageCategory::COUNT];
        for (slot, item) in counts.iter_mut().zip(items) {
            let n = item
                .as_i64()
                .ok_or_else(|| self.type_error(field, expected, item))?;
            if !(0..=i64::from(LabelVector::MAX_COUNT)).contains(&n) {
                return Err(Error::Range {
                    line: self.line,
                    field: field.into(),
                    value: n.to_string(),
                    bounds: "0..=3",
                });
            }
            *slot = n as u8;
        }
        Ok(Some(LabelVector::new(counts)?))
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Read a JSONL corpus. Blank lines are skipped; the first bad line aborts.
pub fn read_corpus<R: Read>(reader: R, provenance: impl Into<String>) -> Result<Corpus> {
    let mut reports = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        reports.push(parse_issue_record(&line, i + 1)?);
    }
    Corpus::new(reports, provenance)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, format!("file:{}", path.display()))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), corpus.to_jsonl().as_bytes())
}

const IMAGE_MIMES: [&str; 8] = [
    "image/avif",
    "image/jpeg",
    "image/png",
    "image/gif",
    "image/bmp",
    "image/tiff",
    "image/svg+xml",
    "image/webp",
];

/// Whether an attachment MIME type is one of the recognized image formats.
pub fn classify_attachment_mime(mime: &str) -> bool {
    let lower = mime.to_lowercase();
    IMAGE_MIMES.contains(&lower.as_str())
}

/// One annotator's category choices for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image_id: String,
    pub annotator_id: String,
    pub categories: BTreeSet<ImageCategory>,
}

/// Combine exactly three annotations of one image into counts plus a
/// conflict flag (set when no category reaches a majority).
pub fn aggregate_annotations(sets: &[AnnotationSet]) -> Result<(LabelVector, bool)> {
    if sets.len() != 3 {
        return Err(Error::Arity {
            expected: 3,
            actual: sets.len(),
        });
    }
    let image_id = &sets[0].image_id;
    if let Some(other) = sets.iter().find(|s| &s.image_id != image_id) {
        return Err(Error::Input(format!(
            "annotations mix images `{image_id}` and `{}`",
            other.image_id
        )));
    }
    let annotators: HashSet<_> = sets.iter().map(|s| s.annotator_id.as_str()).collect();
    if annotators.len() != sets.len() {
        return Err(Error::Input(format!(
            "image `{image_id}` has repeated annotator ids"
        )));
    }

    let mut counts = [0u8; ImageCategory::COUNT];
    for set in sets {
        for c in &set.categories {
            counts[c.index()] += 1;
        }
    }
    let v = LabelVector::new(counts)?;
    Ok((v, v.is_conflicted()))
}

/// Outcome of labeling a corpus from raw annotations.
#[derive(Debug, Clone)]
pub struct LabelingOutcome {
    pub corpus: Corpus,
    /// Image ids whose annotations had no majority category.
    pub conflicts: Vec<String>,
}

/// Group annotations by image, aggregate each group, and attach the
/// resulting label vectors (and `has_image = true`) to matching reports.
pub fn label_corpus(corpus: &Corpus, annotations: &[AnnotationSet]) -> Result<LabelingOutcome> {
    let mut by_image: BTreeMap<&str, Vec<AnnotationSet>> = BTreeMap::new();
    for a in annotations {
        by_image.entry(&a.image_id).or_default().push(a.clone());
    }
    let mut vectors = BTreeMap::new();
    let mut conflicts = Vec::new();
    for (image_id, sets) in by_image {
        let (v, conflict) = aggregate_annotations(&sets)
            .map_err(|e| Error::Input(format!("image `{image_id}`: {e}")))?;
        if conflict {
            conflicts.push(image_id.to_string());
        }
        vectors.insert(image_id.to_string(), v);
    }
    Ok(LabelingOutcome {
        corpus: apply_label_overrides(corpus, &vectors)?,
        conflicts,
    })
}

/// Replace the label vectors of the named reports.
pub fn apply_label_overrides(
    corpus: &Corpus,
    overrides: &BTreeMap<String, LabelVector>,
) -> Result<Corpus> {
    let ids: HashSet<&str> = corpus.iter().map(|r| r.id.as_str()).collect();
    let unknown: Vec<String> = overrides
        .keys()
        .filter(|k| !ids.contains(k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownIds(unknown));
    }
    let reports = corpus
        .iter()
        .map(|r| match overrides.get(&r.id) {
            Some(v) => IssueReport {
                label_vector: Some(*v),
                has_image: Some(r.has_image.unwrap_or(true)),
                ..r.clone()
            },
            None => r.clone(),
        })
        .collect();
    Ok(Corpus {
        reports,
        provenance: corpus.provenance.clone(),
    })
}

#[derive(Deserialize)]
struct OverrideRecord {
    image_id: String,
    label_vector: LabelVector,
}

/// Read an overrides file: JSONL of `{"image_id", "label_vector"}`.
pub fn load_overrides(path: impl AsRef<Path>) -> Result<BTreeMap<String, LabelVector>> {
    let records: Vec<OverrideRecord> = read_jsonl_records(path.as_ref())?;
    Ok(records
        .into_iter()
        .map(|r| (r.image_id, r.label_vector))
        .collect())
}

/// Read an annotations file: JSONL of `{"image_id", "annotator_id", "categories"}`.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationSet>> {
    read_jsonl_records(path.as_ref())
}

fn read_jsonl_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn labels_of(corpus: &Corpus) -> Result<Vec<bool>> {
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

/// Down-sample the majority `has_image` class, uniformly without
/// replacement, to the size of the minority class. Output keeps corpus order.
pub fn balanced_sample(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let labels = labels_of(corpus)?;
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateCorpus(format!(
            "balanced sampling needs both classes, got {} with images and {} without",
            pos.len(),
            neg.len()
        )));
    }
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, majority.len(), minority.len());
    let mut keep = vec![false; corpus.len()];
    for i in &minority {
        keep[*i] = true;
    }
    for j in chosen.iter() {
        keep[majority[j]] = true;
    }
    Ok(corpus.select(
        &keep,
        format!("{} | balanced(seed={seed})", corpus.provenance),
    ))
}
