//! Samples and the JSON-lines corpus format.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One data point: a dense feature vector and an optional description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Sample {
    /// The description, treating blank text the same as no text.
    pub fn text(&self) -> Option<&str> {
        self.text.as_deref().filter(|t| !t.trim().is_empty())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sample {id:?}: expected {expected} features, found {found}")]
    Dimension { id: String, expected: usize, found: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("sample {0:?}: non-finite feature value")]
    NonFinite(String),
    #[error("empty sample id")]
    EmptyId,
}

/// Samples with unique ids and a common feature dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    samples: Vec<Sample>,
    positions: HashMap<String, usize>,
    dim: usize,
}

impl Corpus {
    pub fn new(samples: Vec<Sample>) -> Result<Self, CorpusError> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        let mut positions = HashMap::with_capacity(samples.len());
        for (pos, s) in samples.iter().enumerate() {
            if s.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if s.features.len() != dim {
                return Err(CorpusError::Dimension { id: s.id.clone(), expected: dim, found: s.features.len() });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::NonFinite(s.id.clone()));
            }
            if positions.insert(s.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus { samples, positions, dim })
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, CorpusError> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let sample: Sample =
                serde_json::from_str(raw).map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
            samples.push(sample);
        }
        Self::new(samples)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.position(id).map(|p| &self.samples[p])
    }

    /// A corpus made of the samples at `positions`, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Corpus {
        let samples = positions.iter().map(|&p| self.samples[p].clone()).collect();
        Corpus::new(samples).expect("subset of a valid corpus is valid")
    }
}
