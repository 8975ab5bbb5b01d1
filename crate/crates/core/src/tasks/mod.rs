//! Episode generators: the sampling strategies over storage sets and
//! queries, dataset ingestion, and synthetic stand-ins.

mod idx;
mod sample;
mod source;

pub use idx::{load_idx, load_idx_images, load_idx_labels};
pub use sample::{
    sample_class_based, sample_database_range, sample_episode, sample_exponential, sample_uniform,
};
pub use source::{
    generate_synthetic, load_token_universe, DatasetManifest, DatasetSource, SourceSpec,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::item::Item;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("idx parse error at byte {offset}: {detail}")]
    IdxParse { offset: usize, detail: String },
    #[error("no class has {needed} items (largest has {largest})")]
    ClassTooSmall { needed: usize, largest: usize },
    #[error("universe has {have} items, need {need}")]
    UniverseTooSmall { need: usize, have: usize },
    #[error("file {0} is empty")]
    EmptyFile(String),
    #[error("source has no class labels; class-based sampling needs them")]
    MissingLabels,
    #[error("bad task spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ClassBased,
    Exponential,
    Uniform,
    DatabaseRange,
}

fn default_decay() -> f64 {
    0.999
}

/// Declarative description of a sampling distribution over sets and queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Storage set size n.
    pub set_size: usize,
    /// Queries per episode t.
    pub query_count: usize,
    /// Fraction of positive queries. When omitted: 0.5 for the class-based
    /// and uniform kinds; uniform-over-universe labelling (positives only by
    /// chance) for the exponential and database kinds.
    #[serde(default)]
    pub positive_fraction: Option<f64>,
    /// Exponential-kind weight decay per permutation rank.
    #[serde(default = "default_decay")]
    pub decay: f64,
    pub source: SourceSpec,
}

/// How queries are drawn and labelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryMix {
    /// This fraction positive (from the stored set), the rest non-members.
    Balanced(f64),
    /// Uniform over the whole universe, labelled by membership.
    UniformOverUniverse,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.set_size < 1 || self.query_count < 1 {
            return Err(DataError::BadSpec(
                "set_size and query_count must be >= 1".to_string(),
            ));
        }
        if let Some(f) = self.positive_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(DataError::BadSpec(format!(
                    "positive_fraction {f} outside [0, 1]"
                )));
            }
        }
        if !(0.0 < self.decay && self.decay <= 1.0) {
            return Err(DataError::BadSpec(format!(
                "decay {} outside (0, 1]",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn query_mix(&self) -> QueryMix {
        match (self.positive_fraction, self.kind) {
            (Some(f), _) => QueryMix::Balanced(f),
            (None, TaskKind::ClassBased | TaskKind::Uniform) => QueryMix::Balanced(0.5),
            (None, TaskKind::Exponential | TaskKind::DatabaseRange) => {
                QueryMix::UniformOverUniverse
            }
        }
    }
}

/// One storage set plus labelled queries: the unit of meta-learning and
/// evaluation. Labels are exact membership by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub storage: Vec<Item>,
    pub queries: Vec<Item>,
    pub labels: Vec<bool>,
}

impl Episode {
    pub fn label_floats(&self) -> Vec<f64> {
        self.labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Re-derive labels from storage membership; must reproduce `labels`.
    pub fn rederive_labels(&self) -> Vec<bool> {
        use std::collections::HashSet;
        let members: HashSet<Vec<u8>> = self
            .storage
            .iter()
            .map(|i| i.key_bytes().into_owned())
            .collect();
        self.queries
            .iter()
            .map(|q| members.contains(q.key_bytes().as_ref()))
            .collect()
    }
}
