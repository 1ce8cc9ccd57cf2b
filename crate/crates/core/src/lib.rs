//! Weakly supervised annotation of samples with ontology classes.
//!
//! Samples carry a numeric feature vector and, optionally, a free-text
//! description. Lexicon matches on the descriptions give a noisy initial
//! labeling; two classifiers (one per view) then refine it by co-training,
//! with disagreements reconciled through the class hierarchy.

pub mod cli;
pub mod corpus;
pub mod cotrain;
pub mod harness;
pub mod io;
pub mod labels;
pub mod learner;
pub mod lexicon;
pub mod metrics;
pub mod ontology;
pub mod resolve;
pub mod textfeat;

#[cfg(test)]
mod testutil;

pub use corpus::{Corpus, Sample};
pub use cotrain::{annotate, run, CoTrainConfig, CoTrainError, CoTrainOutput, CoTrainer, RunHistory};
pub use labels::{LabelSet, TrainingSet};
pub use learner::{train, Model, TrainConfig, View};
pub use lexicon::Lexicon;
pub use metrics::{evaluate, EvalReport, GoldLabels, PrCurve};
pub use ontology::{ClassId, ClassIdx, Ontology, Specificity};
pub use resolve::Strategy;
