//! Reconciling distant-supervision labels with classifier predictions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::labels::{LabelSet, TrainingSet};
use crate::ontology::{Ontology, Specificity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Distant labels when present.
    Standard,
    /// Always the prediction.
    Predict,
    Union,
    Intersect,
    /// Hierarchy-aware: per (distant, predicted) pair keep the shared class
    /// or the more specific one, drop unrelated pairs.
    Relation,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Standard, Strategy::Predict, Strategy::Union, Strategy::Intersect, Strategy::Relation];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Standard => "standard",
            Strategy::Predict => "predict",
            Strategy::Union => "union",
            Strategy::Intersect => "intersect",
            Strategy::Relation => "relation",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy {s:?} (expected standard|predict|union|intersect|relation)"))
    }
}

/// Resolves one sample. A missing distant set passes the prediction through
/// under every strategy.
///
/// Each surviving class keeps the score of the side that contributed it; a
/// class contributed by both sides keeps the larger score.
pub fn resolve_sample(
    strategy: Strategy,
    distant: Option<&LabelSet>,
    predicted: &LabelSet,
    ontology: &Ontology,
) -> LabelSet {
    let Some(distant) = distant else {
        return predicted.clone();
    };
    match strategy {
        Strategy::Standard => distant.clone(),
        Strategy::Predict => predicted.clone(),
        Strategy::Union => {
            let mut out = distant.clone();
            for (c, s) in predicted.iter() {
                out.insert_max(c, s);
            }
            out
        }
        Strategy::Intersect => distant.iter().filter_map(|(c, s)| predicted.get(c).map(|p| (c, s.max(p)))).collect(),
        Strategy::Relation => {
            let mut out = LabelSet::new();
            for (d, ds) in distant.iter() {
                for (p, ps) in predicted.iter() {
                    match ontology.relation_indices(d, p) {
                        Specificity::Equal => out.insert_max(d, ds.max(ps)),
                        Specificity::FirstMoreSpecific => out.insert_max(d, ds),
                        Specificity::SecondMoreSpecific => out.insert_max(p, ps),
                        Specificity::Unrelated => {}
                    }
                }
            }
            out
        }
    }
}

/// Resolves every sample present on either side; empty results are dropped.
pub fn resolve_all(
    strategy: Strategy,
    distant: &TrainingSet,
    predictions: &TrainingSet,
    ontology: &Ontology,
) -> TrainingSet {
    let ids: BTreeSet<&str> = distant.sample_ids().chain(predictions.sample_ids()).collect();
    let empty = LabelSet::new();
    ids.into_iter()
        .filter_map(|id| {
            let predicted = predictions.get(id).unwrap_or(&empty);
            let out = resolve_sample(strategy, distant.get(id), predicted, ontology);
            (!out.is_empty()).then(|| (id.to_string(), out))
        })
        .collect()
}
