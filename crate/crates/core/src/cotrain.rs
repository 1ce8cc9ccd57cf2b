//! The co-training loop.
//!
//! Starting from the distant-supervision set `D0`, each iteration `k`
//!
//! 1. trains the feature-view classifier on `D(k-1)` (`D0` when `k = 1`),
//! 2. thresholds its predictions and resolves them against `D0`, giving the
//!    text-view training set (samples with text only),
//! 3. trains the text-view classifier on that set,
//! 4. thresholds its predictions and resolves them against `D0`, giving
//!    `D(k)`. Samples without text keep the feature-view prediction.
//!
//! Resolution is always against `D0`, never against an earlier iteration's
//! output. Trusted labels (`extra_labeled`) overwrite resolved labels for
//! their samples in every training set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::labels::{LabelSet, TrainingSet};
use crate::learner::{threshold_labels, train, LearnError, Model, TrainConfig, View, ViewData};
use crate::lexicon::Lexicon;
use crate::metrics::{evaluate, GoldLabels};
use crate::ontology::{ClassIdx, Ontology};
use crate::resolve::{resolve_all, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoTrainConfig {
    pub n_iter: usize,
    pub tau: f64,
    pub strategy: Strategy,
    pub main_cfg: TrainConfig,
    pub aux_cfg: TrainConfig,
    pub seed: u64,
    #[serde(skip)]
    pub extra_labeled: Option<TrainingSet>,
}

impl Default for CoTrainConfig {
    fn default() -> Self {
        CoTrainConfig {
            n_iter: 5,
            tau: 0.3,
            strategy: Strategy::Relation,
            main_cfg: TrainConfig::main_default(),
            aux_cfg: TrainConfig::aux_default(),
            seed: 0,
            extra_labeled: None,
        }
    }
}

impl CoTrainConfig {
    pub fn validate(&self) -> Result<(), CoTrainError> {
        if self.n_iter < 1 {
            return Err(CoTrainError::InvalidConfig("n_iter must be >= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CoTrainError::InvalidConfig(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        self.main_cfg.validate()?;
        self.aux_cfg.validate()?;
        Ok(())
    }

    /// Training config for iteration `k` of a view, with a shuffling seed
    /// derived from the run seed, the view's own seed, `k` and the view.
    pub fn train_config(&self, k: usize, view: View) -> TrainConfig {
        let base = match view {
            View::Main => &self.main_cfg,
            View::Aux => &self.aux_cfg,
        };
        let tag = (k as u64) << 1 | matches!(view, View::Aux) as u64;
        TrainConfig { seed: splitmix64(self.seed ^ splitmix64(base.seed ^ splitmix64(tag))), ..base.clone() }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoTrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no organic supervision found: no sample description matches the lexicon")]
    NoSupervision,
    #[error("iteration {k} ({phase:?} half) produced an empty training set under strategy {strategy}")]
    EmptyIteration { k: usize, phase: View, strategy: Strategy },
    #[error("extra label for unknown sample {0:?}")]
    UnknownLabeledSample(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// One half-iteration: training one view and producing the other view's
/// training set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub phase: View,
    /// Samples and distinct classes in the set this classifier trained on.
    pub train_size: usize,
    pub train_classes: usize,
    pub train_loss: f64,
    /// Distinct classes among this classifier's thresholded predictions.
    pub predicted_classes: usize,
    /// Samples and distinct classes in the resolved set handed onward.
    pub produced_size: usize,
    pub produced_classes: usize,
    /// Fraction of predicted samples whose thresholded class set differs
    /// from the previous iteration of the same view.
    pub changed_fraction: Option<f64>,
    pub auprc: Option<f64>,
    #[serde(rename = "precision_at_0.5")]
    pub precision_at_half: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    pub fn main_records(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.phase == View::Main)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }
}

#[derive(Clone, Debug)]
pub struct CoTrainOutput {
    pub main: Model,
    pub aux: Model,
    pub history: RunHistory,
    /// The last `D(k)`.
    pub final_set: TrainingSet,
}

/// Step-by-step driver for the loop.
pub struct CoTrainer<'a> {
    corpus: &'a Corpus,
    ontology: &'a Ontology,
    cfg: CoTrainConfig,
    main_view: ViewData<'a>,
    aux_view: ViewData<'a>,
    distant: TrainingSet,
    main_train: TrainingSet,
    gold: Option<&'a GoldLabels>,
    k: usize,
    main: Option<Model>,
    aux: Option<Model>,
    history: RunHistory,
    prev_main: Option<Vec<Vec<ClassIdx>>>,
    prev_aux: Option<Vec<Vec<ClassIdx>>>,
}

impl<'a> CoTrainer<'a> {
    /// Sets up a run from an explicit initial training set (normally the
    /// output of [`Lexicon::distant_labels`]).
    pub fn new(
        corpus: &'a Corpus,
        ontology: &'a Ontology,
        distant: TrainingSet,
        cfg: CoTrainConfig,
    ) -> Result<Self, CoTrainError> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(CoTrainError::EmptyCorpus);
        }
        if distant.is_empty() {
            return Err(CoTrainError::NoSupervision);
        }
        if let Some(extra) = &cfg.extra_labeled {
            if let Some(id) = extra.sample_ids().find(|id| corpus.position(id).is_none()) {
                return Err(CoTrainError::UnknownLabeledSample(id.to_string()));
            }
        }
        let mut main_train = distant.clone();
        overlay(&mut main_train, cfg.extra_labeled.as_ref(), |_| true);
        Ok(CoTrainer {
            corpus,
            ontology,
            main_view: ViewData::build(corpus, View::Main),
            aux_view: ViewData::build(corpus, View::Aux),
            cfg,
            distant,
            main_train,
            gold: None,
            k: 0,
            main: None,
            aux: None,
            history: RunHistory::default(),
            prev_main: None,
            prev_aux: None,
        })
    }

    /// Records AUPRC and precision at 0.5 recall per half-iteration.
    pub fn with_gold(mut self, gold: &'a GoldLabels) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn distant(&self) -> &TrainingSet {
        &self.distant
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.cfg.n_iter
    }

    pub fn main_model(&self) -> Option<&Model> {
        self.main.as_ref()
    }

    pub fn aux_model(&self) -> Option<&Model> {
        self.aux.as_ref()
    }

    pub fn history(&self) -> &RunHistory {
        &self.history
    }

    /// The feature-view training set for the next iteration.
    pub fn current_training_set(&self) -> &TrainingSet {
        &self.main_train
    }

    /// Runs one full iteration (both halves).
    pub fn step(&mut self) -> Result<(), CoTrainError> {
        let k = self.k + 1;
        let strategy = self.cfg.strategy;
        let tau = self.cfg.tau;
        let has_text = |id: &str| self.corpus.get(id).and_then(|s| s.text()).is_some();

        // Feature view.
        let (main, report) =
            train(&self.main_train, &self.main_view, self.ontology, &self.cfg.train_config(k, View::Main))?;
        let main_scores = self.score_view(&main, &self.main_view);
        let main_pred = thresholded(&main_scores, tau);
        let text_pred: TrainingSet =
            main_pred.iter().filter(|(id, _)| has_text(id)).map(|(id, l)| (id.clone(), l.clone())).collect();
        let mut aux_train = resolve_all(strategy, &self.distant, &text_pred, self.ontology);
        aux_train.retain(has_text);
        overlay(&mut aux_train, self.cfg.extra_labeled.as_ref(), has_text);
        let record =
            self.record(k, View::Main, &self.main_train, report.final_loss(), &main_scores, &main_pred, &aux_train);
        self.history.records.push(record);
        self.prev_main = Some(class_lists(self.corpus, &main_pred));
        self.main = Some(main);
        if aux_train.is_empty() {
            self.k = k;
            return Err(CoTrainError::EmptyIteration { k, phase: View::Main, strategy });
        }

        // Text view.
        let (aux, report) = train(&aux_train, &self.aux_view, self.ontology, &self.cfg.train_config(k, View::Aux))?;
        let aux_scores = self.score_view(&aux, &self.aux_view);
        let aux_pred = thresholded(&aux_scores, tau);
        let mut next = resolve_all(strategy, &self.distant, &aux_pred, self.ontology);
        for (id, labels) in main_pred.iter() {
            if !has_text(id) {
                next.insert(id.clone(), labels.clone());
            }
        }
        overlay(&mut next, self.cfg.extra_labeled.as_ref(), |_| true);
        let record = self.record(k, View::Aux, &aux_train, report.final_loss(), &aux_scores, &aux_pred, &next);
        self.history.records.push(record);
        self.prev_aux = Some(class_lists(self.corpus, &aux_pred));
        self.aux = Some(aux);
        self.k = k;
        if next.is_empty() {
            return Err(CoTrainError::EmptyIteration { k, phase: View::Aux, strategy });
        }
        self.main_train = next;
        Ok(())
    }

    /// Runs the remaining iterations and returns the final models.
    pub fn run(mut self) -> Result<CoTrainOutput, CoTrainError> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<CoTrainOutput, CoTrainError> {
        match (self.main, self.aux) {
            (Some(main), Some(aux)) => {
                Ok(CoTrainOutput { main, aux, history: self.history, final_set: self.main_train })
            }
            _ => Err(CoTrainError::InvalidConfig("no completed iteration".into())),
        }
    }

    /// Full score vectors for every sample that has a row in `view`.
    fn score_view(&self, model: &Model, view: &ViewData<'_>) -> TrainingSet {
        self.corpus
            .samples()
            .iter()
            .enumerate()
            .filter_map(|(pos, s)| {
                let p = model.predict_position(view, pos)?;
                Some((s.id.clone(), to_label_set(&p)))
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        k: usize,
        phase: View,
        trained_on: &TrainingSet,
        train_loss: f64,
        scores: &TrainingSet,
        pred: &TrainingSet,
        produced: &TrainingSet,
    ) -> IterationRecord {
        let prev = match phase {
            View::Main => self.prev_main.as_ref(),
            View::Aux => self.prev_aux.as_ref(),
        };
        let changed_fraction = prev.map(|prev| {
            let now = class_lists(self.corpus, pred);
            let considered = scores.len().max(1);
            let changed = now
                .iter()
                .zip(prev)
                .enumerate()
                .filter(|(pos, (a, b))| a != b && scores.contains(&self.corpus.samples()[*pos].id));
            changed.count() as f64 / considered as f64
        });
        let (auprc, precision_at_half) = match self.gold {
            Some(gold) => {
                let (report, _) = evaluate(scores, gold, self.ontology);
                (Some(report.auprc), Some(report.precision_at_half))
            }
            None => (None, None),
        };
        IterationRecord {
            k,
            phase,
            train_size: trained_on.len(),
            train_classes: trained_on.distinct_classes().len(),
            train_loss,
            predicted_classes: pred.distinct_classes().len(),
            produced_size: produced.len(),
            produced_classes: produced.distinct_classes().len(),
            changed_fraction,
            auprc,
            precision_at_half,
        }
    }
}

fn to_label_set(probs: &[f64]) -> LabelSet {
    probs.iter().enumerate().map(|(c, &p)| (ClassIdx(c as u32), p)).collect()
}

fn thresholded(scores: &TrainingSet, tau: f64) -> TrainingSet {
    scores
        .iter()
        .filter_map(|(id, l)| {
            let t = threshold_labels(l, tau);
            (!t.is_empty()).then(|| (id.clone(), t))
        })
        .collect()
}

fn class_lists(corpus: &Corpus, pred: &TrainingSet) -> Vec<Vec<ClassIdx>> {
    corpus.samples().iter().map(|s| pred.get(&s.id).map(|l| l.classes().collect()).unwrap_or_default()).collect()
}

fn overlay(target: &mut TrainingSet, extra: Option<&TrainingSet>, keep: impl Fn(&str) -> bool) {
    if let Some(extra) = extra {
        for (id, labels) in extra {
            if keep(id) && !labels.is_empty() {
                target.insert(id.clone(), labels.clone());
            }
        }
    }
}

/// Runs the full loop with `D0` taken from lexicon matches.
pub fn run(
    corpus: &Corpus,
    ontology: &Ontology,
    lexicon: &Lexicon,
    cfg: CoTrainConfig,
) -> Result<CoTrainOutput, CoTrainError> {
    let distant = lexicon.distant_labels(corpus.samples());
    CoTrainer::new(corpus, ontology, distant, cfg)?.run()
}

/// Full softmax scores of the feature-view model for every sample.
pub fn score_corpus(model: &Model, corpus: &Corpus) -> Result<TrainingSet, LearnError> {
    if model.view() != View::Main {
        return Err(LearnError::InvalidConfig("annotation needs a feature-view model".into()));
    }
    if model.input_dim() != corpus.dim() {
        return Err(LearnError::Dimension { expected: model.input_dim(), found: corpus.dim() });
    }
    let view = ViewData::build(corpus, View::Main);
    Ok(corpus
        .samples()
        .iter()
        .enumerate()
        .map(|(pos, s)| (s.id.clone(), to_label_set(&model.predict_position(&view, pos).expect("main rows exist"))))
        .collect())
}

/// Thresholded feature-view predictions for every sample; samples may end
/// up with an empty label set.
pub fn annotate(model: &Model, corpus: &Corpus, tau: f64) -> Result<TrainingSet, LearnError> {
    Ok(score_corpus(model, corpus)?.iter().map(|(id, l)| (id.clone(), threshold_labels(l, tau))).collect())
}
