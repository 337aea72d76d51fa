use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::ImageCategory;
use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/suggestions.tsv");

/// One suggestion sentence per image category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SuggestionTemplates(BTreeMap<ImageCategory, String>);

impl SuggestionTemplates {
    /// Parses `CategoryName<TAB>text` lines; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (name, template) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `CategoryName<TAB>template`".into(),
            })?;
            let category = ImageCategory::from_str(name).map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("unknown category `{name}`"),
            })?;
            if map.insert(category, template.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate category `{name}`"),
                });
            }
        }
        let templates = SuggestionTemplates(map);
        templates.validate()?;
        Ok(templates)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled suggestion table is well-formed")
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.len() != ImageCategory::COUNT {
            return Err(Error::invariant(
                "templates",
                format!(
                    "expected {} templates, found {}",
                    ImageCategory::COUNT,
                    self.0.len()
                ),
            ));
        }
        if let Some((c, _)) = self.0.iter().find(|(_, t)| t.trim().is_empty()) {
            return Err(Error::invariant(
                "templates",
                format!("empty template for {c}"),
            ));
        }
        Ok(())
    }

    pub fn get(&self, category: ImageCategory) -> &str {
        self.0.get(&category).map_or("", String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The bundled template for `category`.
pub fn suggestion_for(category: ImageCategory) -> &'static str {
    static TABLE: OnceLock<SuggestionTemplates> = OnceLock::new();
    TABLE
        .get_or_init(SuggestionTemplates::bundled)
        .get(category)
}
