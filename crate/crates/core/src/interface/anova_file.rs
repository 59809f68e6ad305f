//! Group data for the ANOVA command: raw samples or published summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::GroupSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupData {
    Samples { samples: Vec<f64> },
    /// Count, sum and variance, the way summary tables report them.
    Sum { count: usize, sum: f64, variance: f64 },
    Mean { count: usize, mean: f64, variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    #[serde(flatten)]
    pub data: GroupData,
}

impl Group {
    pub fn summary(&self) -> GroupSummary {
        match &self.data {
            GroupData::Samples { samples } => GroupSummary::from_samples(samples),
            GroupData::Sum { count, sum, variance } => GroupSummary::from_sum(*count, *sum, *variance),
            GroupData::Mean { count, mean, variance } => GroupSummary::from_moments(*count, *mean, *variance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsFile {
    #[serde(default)]
    pub title: Option<String>,
    pub groups: Vec<Group>,
}

#[derive(Debug, thiserror::Error)]
pub enum GroupsFileError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, serde_json::Error),
}

pub fn load_groups(path: &Path) -> Result<GroupsFile, GroupsFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| GroupsFileError::Io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| GroupsFileError::Parse(path.display().to_string(), e))
}
