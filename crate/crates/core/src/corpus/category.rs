use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The ten screenshot categories, in their frozen index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ImageCategory {
    Code,
    RuntimeError,
    MenusPreferences,
    ProgramInput,
    DesiredOutput,
    ProgramOutput,
    DialogBox,
    StepsProcesses,
    CpuGpuPerformance,
    AlgorithmConceptDescription,
}

impl ImageCategory {
    pub const COUNT: usize = 10;

    pub const ALL: [ImageCategory; Self::COUNT] = [
        ImageCategory::Code,
        ImageCategory::RuntimeError,
        ImageCategory::MenusPreferences,
        ImageCategory::ProgramInput,
        ImageCategory::DesiredOutput,
        ImageCategory::ProgramOutput,
        ImageCategory::DialogBox,
        ImageCategory::StepsProcesses,
        ImageCategory::CpuGpuPerformance,
        ImageCategory::AlgorithmConceptDescription,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Canonical spelling used in every serialized form.
    pub fn name(self) -> &'static str {
        match self {
            ImageCategory::Code => "Code",
            ImageCategory::RuntimeError => "Runtime Error",
            ImageCategory::MenusPreferences => "Menus/Preferences",
            ImageCategory::ProgramInput => "Program Input",
            ImageCategory::DesiredOutput => "Desired Output",
            ImageCategory::ProgramOutput => "Program Output",
            ImageCategory::DialogBox => "Dialog Box",
            ImageCategory::StepsProcesses => "Steps/Processes",
            ImageCategory::CpuGpuPerformance => "CPU/GPU Performance",
            ImageCategory::AlgorithmConceptDescription => "Algorithm/Concept Description",
        }
    }
}

impl fmt::Display for ImageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown image category `{s}`")))
    }
}

impl Serialize for ImageCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ImageCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-category annotator counts, each in `0..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelVector([u8; ImageCategory::COUNT]);

impl LabelVector {
    pub const MAX_COUNT: u8 = 3;
    /// Votes needed (out of three) for a category to count as relevant.
    pub const MAJORITY: u8 = 2;

    pub fn new(counts: [u8; ImageCategory::COUNT]) -> crate::Result<Self> {
        if let Some(&bad) = counts.iter().find(|&&c| c > Self::MAX_COUNT) {
            return Err(Error::Range {
                line: 0,
                field: "label_vector".into(),
                value: bad.to_string(),
                bounds: "0..=3",
            });
        }
        Ok(LabelVector(counts))
    }

    pub fn counts(&self) -> &[u8; ImageCategory::COUNT] {
        &self.0
    }

    pub fn count(&self, category: ImageCategory) -> u8 {
        self.0[category.index()]
    }

    /// Categories with a majority of annotator votes.
    pub fn binarize(&self) -> BTreeSet<ImageCategory> {
        binarize_labels(self)
    }

    /// No category reached a majority.
    pub fn is_conflicted(&self) -> bool {
        self.0.iter().all(|&c| c < Self::MAJORITY)
    }
}

pub fn binarize_labels(v: &LabelVector) -> BTreeSet<ImageCategory> {
    ImageCategory::ALL
        .iter()
        .copied()
        .filter(|&c| v.count(c) >= LabelVector::MAJORITY)
        .collect()
}

impl Serialize for LabelVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let counts = <[u8; ImageCategory::COUNT]>::deserialize(deserializer)?;
        LabelVector::new(counts).map_err(serde::de::Error::custom)
    }
}
