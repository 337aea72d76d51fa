//! Text normalization: tokenize, drop stopwords, stem. Plus the derived
//! report metrics (description length, comment count, reply latency).

mod porter;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::IssueReport;
use crate::error::{Error, Result};

pub use porter::stem;

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// A set of lowercase words removed before stemming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    /// Parse the stopword file format: one word per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let word = line.trim();
            if word.is_empty() || word.starts_with('#') {
                continue;
            }
            if word != word.to_lowercase() {
                return Err(Error::Input(format!(
                    "stopword `{word}` on line {} is not lowercase",
                    i + 1
                )));
            }
            words.insert(word.to_string());
        }
        Ok(Stopwords(words))
    }

    /// The bundled 179-word English list.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn empty() -> Self {
        Stopwords(BTreeSet::new())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

impl FromIterator<String> for Stopwords {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Stopwords(iter.into_iter().collect())
    }
}

/// Ordered lowercase tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenList(iter.into_iter().map(Into::into).collect())
    }
}

/// Case-folded, NFC-normalized text. Folding goes through uppercase first so
/// that characters like `ß` fold the same way as their uppercase forms.
fn fold_case(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.to_uppercase().to_lowercase().nfc().collect()
}

/// Maximal runs of ASCII letters and digits; tokens shorter than two
/// characters and purely numeric tokens are dropped.
pub fn tokenize(text: &str) -> TokenList {
    fold_case(text)
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 2 && !t.bytes().all(|b| b.is_ascii_digit()))
        .map(str::to_string)
        .collect()
}

pub fn remove_stopwords(tokens: &TokenList, stopwords: &Stopwords) -> TokenList {
    tokens.iter().filter(|t| !stopwords.contains(t)).collect()
}

/// `tokenize`, then `remove_stopwords`, then `stem` on each survivor.
///
/// A stem can land on a stopword or drop below two characters
/// (`"ising"` → `"is"`, `"aing"` → `"a"`); such stems are dropped as well.
pub fn preprocess(text: &str, stopwords: &Stopwords) -> TokenList {
    remove_stopwords(&tokenize(text), stopwords)
        .iter()
        .map(stem)
        .filter(|s| s.len() >= 2 && !stopwords.contains(s))
        .collect()
}

/// Report-level numeric signals derived from raw fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivedFeatures {
    pub description_length_words: u32,
    pub initial_comment_count: Option<u32>,
    pub time_to_first_reply_hours: Option<f64>,
}

impl DerivedFeatures {
    pub fn has_comment_count(&self) -> bool {
        self.initial_comment_count.is_some()
    }

    pub fn has_reply_time(&self) -> bool {
        self.time_to_first_reply_hours.is_some()
    }
}

/// Whitespace-delimited word count of a raw description.
pub fn word_count(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

pub fn derived_metrics(report: &IssueReport) -> Result<DerivedFeatures> {
    let hours = match (report.created_at, report.first_reply_at) {
        (Some(created), Some(reply)) => {
            if reply < created {
                return Err(Error::Data(format!(
                    "report `{}`: first reply precedes creation",
                    report.id
                )));
            }
            let delta = reply - created;
            Some(delta.num_milliseconds() as f64 / 3_600_000.0)
        }
        _ => None,
    };
    Ok(DerivedFeatures {
        description_length_words: word_count(&report.description),
        initial_comment_count: report.initial_comment_count,
        time_to_first_reply_hours: hours,
    })
}
