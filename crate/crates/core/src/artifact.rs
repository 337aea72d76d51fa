//! Single-file JSON model artifacts.
//!
//! Floats are written with the shortest decimal that round-trips, so a
//! loaded model reproduces every parameter bit for bit, and saving the same
//! model twice yields identical bytes.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureSpace;
use crate::io::write_atomic;
use crate::pipeline::{
    NecessityStage, Recommender, Selection, SuggestionTemplates, TrainedModel, TrainingFingerprint,
};

pub const FORMAT_VERSION: i64 = 1;

/// Conventional file suffix for model artifacts.
pub const EXTENSION: &str = "imr.json";

#[derive(Serialize)]
struct ArtifactRef<'a> {
    format_version: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_version: Option<&'a str>,
    feature_space: &'a FeatureSpace,
    necessity: &'a NecessityStage,
    recommender: &'a Recommender,
    selection: &'a Selection,
    suggestion_templates: &'a SuggestionTemplates,
    fingerprint: &'a TrainingFingerprint,
}

fn artifact_ref(model: &TrainedModel, with_version: bool) -> ArtifactRef<'_> {
    ArtifactRef {
        format_version: FORMAT_VERSION,
        model_version: with_version.then_some(model.model_version.as_str()),
        feature_space: &model.features,
        necessity: &model.necessity,
        recommender: &model.recommender,
        selection: &model.selection,
        suggestion_templates: &model.templates,
        fingerprint: &model.fingerprint,
    }
}

fn serialize(model: &TrainedModel, with_version: bool) -> Result<String> {
    serde_json::to_string_pretty(&artifact_ref(model, with_version))
        .map_err(|e| Error::Integrity(format!("cannot serialize model: {e}")))
}

/// The artifact body without its `model_version`, which is derived from it.
pub(crate) fn to_json_string(model: &TrainedModel) -> Result<String> {
    serialize(model, false)
}

/// The artifact as it is written to disk.
pub fn to_artifact_string(model: &TrainedModel) -> Result<String> {
    let mut s = serialize(model, true)?;
    s.push('\n');
    Ok(s)
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), to_artifact_string(model)?.as_bytes())
}

fn section<T: DeserializeOwned>(
    root: &mut serde_json::Map<String, Value>,
    name: &str,
) -> Result<T> {
    let value = root
        .remove(name)
        .ok_or_else(|| Error::invariant(name, "section missing"))?;
    serde_json::from_value(value).map_err(|e| Error::invariant(name, e.to_string()))
}

/// Parses and fully validates an artifact.
pub fn from_artifact_str(text: &str) -> Result<TrainedModel> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Integrity(format!("artifact is truncated or not JSON: {e}")))?;
    let Value::Object(mut root) = value else {
        return Err(Error::Integrity("artifact is not a JSON object".into()));
    };
    let version = root
        .get("format_version")
        .ok_or_else(|| Error::Integrity("artifact has no format_version".into()))?
        .as_i64()
        .ok_or_else(|| Error::Integrity("format_version is not an integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let model_version: String = section(&mut root, "model_version")?;
    let features: FeatureSpace = section(&mut root, "feature_space")?;
    let necessity: NecessityStage = section(&mut root, "necessity")?;
    let recommender: Recommender = section(&mut root, "recommender")?;
    let selection: Selection = section(&mut root, "selection")?;
    let templates: SuggestionTemplates = section(&mut root, "suggestion_templates")?;
    let fingerprint: TrainingFingerprint = section(&mut root, "fingerprint")?;
    TrainedModel::from_parts(
        features,
        necessity,
        recommender,
        selection,
        templates,
        fingerprint,
        model_version,
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_artifact_str(&text)
}
