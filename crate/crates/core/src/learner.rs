//! Linear softmax classifier shared by both views.
//!
//! The objective for a batch `B` of weighted instances is
//!
//! ```text
//! sum_i w_i * -log softmax(W x_i + b)[y_i] / sum_i w_i  +  (l2 / 2) * ||W||^2
//! ```
//!
//! where the bias column is not penalized. A sample carrying `m` labels
//! contributes `m` instances of weight `1/m`.
//!
//! Sparse (text) models only allocate columns for hash buckets that occur in
//! their training data. Every other column would stay at its zero
//! initialization, so dropping them does not change any prediction.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::labels::{LabelSet, TrainingSet};
use crate::ontology::{ClassId, ClassIdx, Ontology};
use crate::textfeat::{featurize_text, SparseVector, HASH_DIM};

const MODEL_FORMAT: &str = "weaklabel-model/1";
const LOSS_TOLERANCE: f64 = 1e-6;
/// An epoch loss above this multiple of the zero-weight loss counts as
/// divergence.
const DIVERGENCE_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Dense sample features.
    Main,
    /// Hashed text features.
    Aux,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Decays linearly from `learning_rate` to zero over all updates.
    LinearDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    RmsProp,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub optimizer: OptimizerKind,
}

impl TrainConfig {
    /// Feature-view classifier: RMSProp with L2 weight 1e-4.
    pub fn main_default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.01,
            l2_weight: 1e-4,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            batch_size: 64,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
            optimizer: OptimizerKind::RmsProp,
        }
    }

    /// Text-view classifier: 25 epochs of per-example SGD, learning rate
    /// starting at 1.0 and decaying linearly, no L2.
    pub fn aux_default() -> Self {
        TrainConfig {
            epochs: 25,
            learning_rate: 1.0,
            l2_weight: 0.0,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            batch_size: 1,
            seed: 0,
            lr_schedule: LrSchedule::LinearDecay,
            optimizer: OptimizerKind::Sgd,
        }
    }

    pub fn for_view(view: View) -> Self {
        match view {
            View::Main => Self::main_default(),
            View::Aux => Self::aux_default(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be >= 0");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || self.rmsprop_epsilon.is_nan() || self.rmsprop_epsilon <= 0.0 {
            return bad("rmsprop_decay must be in [0, 1) and rmsprop_epsilon > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample {0:?} has no labels")]
    EmptyLabels(String),
    #[error("sample {0:?} is not in the corpus")]
    UnknownSample(String),
    #[error("sample {0:?} has no text for the text view")]
    MissingText(String),
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model classes do not match the ontology")]
    ClassIndexMismatch,
    #[error("model file: {0}")]
    ModelFormat(String),
}

/// Input features for one sample.
#[derive(Clone, Copy, Debug)]
pub enum Features<'a> {
    Dense(&'a [f64]),
    Sparse(&'a SparseVector),
}

type Row = Vec<(u32, f64)>;

/// Per-sample feature rows of one view, aligned with corpus positions.
#[derive(Clone, Debug)]
pub struct ViewData<'a> {
    corpus: &'a Corpus,
    view: View,
    input_dim: usize,
    rows: Vec<Option<Row>>,
}

impl<'a> ViewData<'a> {
    /// Dense features for [`View::Main`]; hashed text for [`View::Aux`]
    /// (samples without text get no row).
    pub fn build(corpus: &'a Corpus, view: View) -> Self {
        let rows = corpus
            .samples()
            .iter()
            .map(|s| match view {
                View::Main => Some(dense_row(&s.features)),
                View::Aux => s.text().map(|t| featurize_text(t).iter().collect()),
            })
            .collect();
        let input_dim = match view {
            View::Main => corpus.dim(),
            View::Aux => HASH_DIM,
        };
        ViewData { corpus, view, input_dim, rows }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    fn row(&self, sample_id: &str) -> Result<&Row, LearnError> {
        let pos = self.corpus.position(sample_id).ok_or_else(|| LearnError::UnknownSample(sample_id.into()))?;
        self.rows[pos].as_ref().ok_or_else(|| LearnError::MissingText(sample_id.into()))
    }

    /// Row at a corpus position, `None` for text-less samples in the text view.
    pub fn row_at(&self, pos: usize) -> Option<&[(u32, f64)]> {
        self.rows[pos].as_deref()
    }
}

fn dense_row(x: &[f64]) -> Row {
    x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j as u32, *v)).collect()
}

/// Trained linear softmax model over the full ontology class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    view: View,
    class_ids: Vec<ClassId>,
    input_dim: usize,
    // Sparse view only: the hash bucket behind each weight column.
    columns: Option<Vec<u32>>,
    // n_classes rows of (n_cols + 1) weights; the bias is the last entry.
    weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    /// Epochs whose loss rose above the previous epoch's by more than 1e-6.
    pub non_monotone_epochs: usize,
    pub n_instances: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

impl Model {
    /// All-zero model, which scores every class `1/|C|`.
    pub fn zeros(ontology: &Ontology, view: View, input_dim: usize) -> Self {
        let columns = match view {
            View::Main => None,
            View::Aux => Some(Vec::new()),
        };
        let n_cols = columns.as_ref().map_or(input_dim, Vec::len);
        Model {
            view,
            class_ids: ontology.class_ids().to_vec(),
            input_dim,
            columns,
            weights: vec![0.0; ontology.len() * (n_cols + 1)],
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn n_cols(&self) -> usize {
        self.columns.as_ref().map_or(self.input_dim, Vec::len)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Squared L2 norm of the non-bias weights.
    pub fn weight_norm_sq(&self) -> f64 {
        let stride = self.n_cols() + 1;
        self.weights.chunks(stride).map(|r| r[..stride - 1].iter().map(|w| w * w).sum::<f64>()).sum()
    }

    pub fn check_ontology(&self, ontology: &Ontology) -> Result<(), LearnError> {
        if self.class_ids.as_slice() == ontology.class_ids() {
            Ok(())
        } else {
            Err(LearnError::ClassIndexMismatch)
        }
    }

    fn local_row(&self, features: Features<'_>) -> Result<Row, LearnError> {
        match (features, &self.columns) {
            (Features::Dense(x), None) => {
                if x.len() != self.input_dim {
                    return Err(LearnError::Dimension { expected: self.input_dim, found: x.len() });
                }
                Ok(dense_row(x))
            }
            (Features::Sparse(v), Some(cols)) => {
                if let Some(&last) = v.indices().last() {
                    if last as usize >= self.input_dim {
                        return Err(LearnError::Dimension { expected: self.input_dim, found: last as usize + 1 });
                    }
                }
                Ok(v.iter().filter_map(|(i, x)| cols.binary_search(&i).ok().map(|j| (j as u32, x))).collect())
            }
            (Features::Dense(x), Some(_)) => Err(LearnError::Dimension { expected: self.input_dim, found: x.len() }),
            (Features::Sparse(_), None) => Err(LearnError::Dimension { expected: self.input_dim, found: HASH_DIM }),
        }
    }

    /// Softmax probabilities over all classes, in class-index order.
    pub fn probabilities(&self, features: Features<'_>) -> Result<Vec<f64>, LearnError> {
        let row = self.local_row(features)?;
        let mut p = vec![0.0; self.n_classes()];
        softmax_into(&self.weights, self.n_cols(), &row, &mut p);
        Ok(p)
    }

    pub fn predict_scores(&self, features: Features<'_>) -> Result<LabelSet, LearnError> {
        Ok(self.probabilities(features)?.into_iter().enumerate().map(|(c, p)| (ClassIdx(c as u32), p)).collect())
    }

    /// Scores a raw description with the text model.
    pub fn predict_text(&self, text: &str) -> Result<LabelSet, LearnError> {
        self.predict_scores(Features::Sparse(&featurize_text(text)))
    }

    pub(crate) fn predict_local(&self, row: &[(u32, f64)]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes()];
        softmax_into(&self.weights, self.n_cols(), row, &mut p);
        p
    }

    /// Probabilities for the sample at corpus position `pos` of `data`, or
    /// `None` when the sample has no row in that view.
    pub fn predict_position(&self, data: &ViewData<'_>, pos: usize) -> Option<Vec<f64>> {
        let row = data.row_at(pos)?;
        match &self.columns {
            None => Some(self.predict_local(row)),
            Some(cols) => {
                let local: Row =
                    row.iter().filter_map(|&(i, x)| cols.binary_search(&i).ok().map(|j| (j as u32, x))).collect();
                Some(self.predict_local(&local))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            view: self.view,
            input_dim: self.input_dim,
            classes: self.class_ids.clone(),
            feature_columns: self.columns.clone(),
            n_rows: self.n_classes(),
            n_cols: self.n_cols() + 1,
            weights: self.weights.clone(),
        };
        serde_json::to_string(&file).expect("finite weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::ModelFormat(e.to_string()))?;
        let bad = |m: String| Err(LearnError::ModelFormat(m));
        if file.format != MODEL_FORMAT {
            return bad(format!("unsupported format {:?}", file.format));
        }
        let n_cols = match (&file.feature_columns, file.view) {
            (None, View::Main) => file.input_dim,
            (Some(cols), View::Aux) => {
                if !cols.windows(2).all(|w| w[0] < w[1]) || cols.last().is_some_and(|&c| c as usize >= file.input_dim) {
                    return bad("feature_columns must be strictly increasing and below input_dim".into());
                }
                cols.len()
            }
            _ => return bad("feature_columns must be present exactly for the aux view".into()),
        };
        if file.n_rows != file.classes.len()
            || file.n_cols != n_cols + 1
            || file.weights.len() != file.n_rows * file.n_cols
        {
            return bad("weight shape does not match classes and columns".into());
        }
        if file.weights.iter().any(|w| !w.is_finite()) {
            return bad("non-finite weight".into());
        }
        Ok(Model {
            view: file.view,
            class_ids: file.classes,
            input_dim: file.input_dim,
            columns: file.feature_columns,
            weights: file.weights,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    view: View,
    input_dim: usize,
    classes: Vec<ClassId>,
    feature_columns: Option<Vec<u32>>,
    n_rows: usize,
    /// Includes the trailing bias column.
    n_cols: usize,
    weights: Vec<f64>,
}

/// Writes `softmax(W x + b)` into `out`; returns nothing, `out` sums to 1.
fn softmax_into(weights: &[f64], n_cols: usize, row: &[(u32, f64)], out: &mut [f64]) {
    let stride = n_cols + 1;
    for (c, z) in out.iter_mut().enumerate() {
        let w = &weights[c * stride..(c + 1) * stride];
        *z = w[n_cols] + row.iter().map(|&(j, x)| w[j as usize] * x).sum::<f64>();
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in out.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in out.iter_mut() {
        *z /= sum;
    }
}

/// Keeps the classes scoring at least `tau`.
pub fn threshold_labels(scores: &LabelSet, tau: f64) -> LabelSet {
    scores.iter().filter(|&(_, s)| s >= tau).collect()
}

/// Instances of one training problem in local column space.
struct Problem {
    n_classes: usize,
    n_cols: usize,
    rows: Vec<Row>,
    // (row, class, weight)
    instances: Vec<(usize, usize, f64)>,
}

impl Problem {
    fn stride(&self) -> usize {
        self.n_cols + 1
    }

    /// Regularized loss over `batch` (instance indices). When `grad` is
    /// given, adds the gradient and records touched columns in `touched`.
    fn loss_grad(
        &self,
        weights: &[f64],
        batch: &[usize],
        l2: f64,
        mut grad: Option<(&mut [f64], &mut Touched)>,
        probs: &mut [f64],
    ) -> f64 {
        let stride = self.stride();
        let total_w: f64 = batch.iter().map(|&i| self.instances[i].2).sum();
        let mut loss = 0.0;
        for &i in batch {
            let (r, y, w) = self.instances[i];
            let row = &self.rows[r];
            softmax_into(weights, self.n_cols, row, probs);
            loss -= w * probs[y].max(f64::MIN_POSITIVE).ln();
            if let Some((g, touched)) = grad.as_mut() {
                let scale = w / total_w;
                for (c, &p) in probs.iter().enumerate() {
                    let coef = scale * (p - if c == y { 1.0 } else { 0.0 });
                    let gr = &mut g[c * stride..(c + 1) * stride];
                    for &(j, x) in row {
                        gr[j as usize] += coef * x;
                    }
                    gr[self.n_cols] += coef;
                }
                for &(j, _) in row {
                    touched.mark(j as usize);
                }
            }
        }
        loss /= total_w;
        if l2 > 0.0 {
            let mut sq = 0.0;
            for c in 0..self.n_classes {
                let wr = &weights[c * stride..c * stride + self.n_cols];
                sq += wr.iter().map(|v| v * v).sum::<f64>();
                if let Some((g, _)) = grad.as_mut() {
                    let gr = &mut g[c * stride..c * stride + self.n_cols];
                    for (gj, wj) in gr.iter_mut().zip(wr) {
                        *gj += l2 * wj;
                    }
                }
            }
            loss += 0.5 * l2 * sq;
        }
        loss
    }

    fn full_loss(&self, weights: &[f64], l2: f64) -> f64 {
        let all: Vec<usize> = (0..self.instances.len()).collect();
        let mut probs = vec![0.0; self.n_classes];
        self.loss_grad(weights, &all, l2, None, &mut probs)
    }
}

/// Set of weight columns touched by the current batch.
struct Touched {
    flags: Vec<bool>,
    list: Vec<usize>,
}

impl Touched {
    fn new(n: usize) -> Self {
        Touched { flags: vec![false; n], list: Vec::new() }
    }

    fn mark(&mut self, j: usize) {
        if !self.flags[j] {
            self.flags[j] = true;
            self.list.push(j);
        }
    }

    fn clear(&mut self) {
        for &j in &self.list {
            self.flags[j] = false;
        }
        self.list.clear();
    }
}

fn build_problem(
    data: &TrainingSet,
    view_data: &ViewData<'_>,
    n_classes: usize,
) -> Result<(Problem, Option<Vec<u32>>), LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    let mut raw_rows: Vec<&Row> = Vec::with_capacity(data.len());
    let mut instances = Vec::new();
    for (id, labels) in data {
        if labels.is_empty() {
            return Err(LearnError::EmptyLabels(id.clone()));
        }
        let r = raw_rows.len();
        raw_rows.push(view_data.row(id)?);
        let w = 1.0 / labels.len() as f64;
        for c in labels.classes() {
            if c.get() >= n_classes {
                return Err(LearnError::ClassIndexMismatch);
            }
            instances.push((r, c.get(), w));
        }
    }
    match view_data.view {
        View::Main => Ok((
            Problem {
                n_classes,
                n_cols: view_data.input_dim,
                rows: raw_rows.into_iter().cloned().collect(),
                instances,
            },
            None,
        )),
        View::Aux => {
            let mut cols: Vec<u32> = raw_rows.iter().flat_map(|r| r.iter().map(|&(i, _)| i)).collect();
            cols.sort_unstable();
            cols.dedup();
            let remap: HashMap<u32, u32> = cols.iter().enumerate().map(|(j, &i)| (i, j as u32)).collect();
            let rows = raw_rows.iter().map(|r| r.iter().map(|&(i, x)| (remap[&i], x)).collect()).collect();
            Ok((Problem { n_classes, n_cols: cols.len(), rows, instances }, Some(cols)))
        }
    }
}

/// Trains a model on `data`, whose sample ids refer to `view_data`'s corpus.
pub fn train(
    data: &TrainingSet,
    view_data: &ViewData<'_>,
    ontology: &Ontology,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport), LearnError> {
    cfg.validate()?;
    let (problem, columns) = build_problem(data, view_data, ontology.len())?;
    let stride = problem.stride();
    let n_params = problem.n_classes * stride;
    let mut weights = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut sq_avg = vec![0.0; n_params];
    // Step at which each column last received an update (lazy RMSProp decay).
    let mut last_step = vec![0u64; stride];
    let mut touched = Touched::new(stride);
    let mut probs = vec![0.0; problem.n_classes];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..problem.instances.len()).collect();
    let batches_per_epoch = order.len().div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * batches_per_epoch) as f64;
    let initial_loss = problem.full_loss(&weights, cfg.l2_weight);
    let dense_update = cfg.l2_weight > 0.0;

    let mut report = TrainReport {
        initial_loss,
        epoch_losses: Vec::with_capacity(cfg.epochs),
        non_monotone_epochs: 0,
        n_instances: problem.instances.len(),
    };
    let mut step: u64 = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let lr = match cfg.lr_schedule {
                LrSchedule::Constant => cfg.learning_rate,
                LrSchedule::LinearDecay => cfg.learning_rate * (1.0 - step as f64 / total_steps),
            };
            step += 1;
            problem.loss_grad(&weights, batch, cfg.l2_weight, Some((&mut grad, &mut touched)), &mut probs);
            touched.mark(problem.n_cols);
            if dense_update {
                for j in 0..stride {
                    touched.mark(j);
                }
            }
            for &j in &touched.list {
                let skipped = step - last_step[j] - 1;
                last_step[j] = step;
                for c in 0..problem.n_classes {
                    let k = c * stride + j;
                    let g = grad[k];
                    grad[k] = 0.0;
                    match cfg.optimizer {
                        OptimizerKind::Sgd => weights[k] -= lr * g,
                        OptimizerKind::RmsProp => {
                            let rho = cfg.rmsprop_decay;
                            let mut v = sq_avg[k];
                            if skipped > 0 && v != 0.0 {
                                v *= rho.powf(skipped as f64);
                            }
                            v = rho * v + (1.0 - rho) * g * g;
                            sq_avg[k] = v;
                            weights[k] -= lr * g / (v.sqrt() + cfg.rmsprop_epsilon);
                        }
                    }
                }
            }
            touched.clear();
        }
        let loss = problem.full_loss(&weights, cfg.l2_weight);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * initial_loss + LOSS_TOLERANCE {
            return Err(LearnError::Divergence { epoch, loss });
        }
        if let Some(&prev) = report.epoch_losses.last() {
            if loss > prev + LOSS_TOLERANCE {
                report.non_monotone_epochs += 1;
            }
        }
        report.epoch_losses.push(loss);
    }

    let model = Model {
        view: view_data.view,
        class_ids: ontology.class_ids().to_vec(),
        input_dim: view_data.input_dim,
        columns,
        weights,
    };
    Ok((model, report))
}

/// Small dense problem for checking the analytic gradient.
#[derive(Clone, Debug)]
pub struct GradientProbe {
    pub n_classes: usize,
    pub features: Vec<Vec<f64>>,
    /// Label classes per sample; each sample needs at least one.
    pub labels: Vec<Vec<usize>>,
    /// Point at which the gradient is evaluated, `n_classes * (dim + 1)`.
    pub weights: Vec<f64>,
}

impl GradientProbe {
    /// Random features, 1-2 labels per sample, and random weights.
    pub fn random(seed: u64, n_samples: usize, n_classes: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = (0..n_samples).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = (0..n_samples)
            .map(|_| {
                let mut l = vec![rng.random_range(0..n_classes)];
                if rng.random_bool(0.3) {
                    let extra = rng.random_range(0..n_classes);
                    if extra != l[0] {
                        l.push(extra);
                    }
                }
                l
            })
            .collect();
        let weights = (0..n_classes * (dim + 1)).map(|_| rng.random_range(-0.5..0.5)).collect();
        GradientProbe { n_classes, features, labels, weights }
    }

    fn problem(&self) -> Problem {
        let dim = self.features.first().map_or(0, Vec::len);
        let mut instances = Vec::new();
        for (r, ls) in self.labels.iter().enumerate() {
            for &c in ls {
                instances.push((r, c, 1.0 / ls.len() as f64));
            }
        }
        // Zeros are kept so every column is exercised.
        let rows = self.features.iter().map(|x| x.iter().enumerate().map(|(j, v)| (j as u32, *v)).collect()).collect();
        Problem { n_classes: self.n_classes, n_cols: dim, rows, instances }
    }
}

/// Full-batch regularized loss and its analytic gradient at `probe.weights`,
/// computed by the same routine the trainer uses.
pub fn loss_and_gradient(probe: &GradientProbe, l2_weight: f64) -> (f64, Vec<f64>) {
    let problem = probe.problem();
    let all: Vec<usize> = (0..problem.instances.len()).collect();
    let mut grad = vec![0.0; probe.weights.len()];
    let mut touched = Touched::new(problem.stride());
    let mut probs = vec![0.0; problem.n_classes];
    let loss = problem.loss_grad(&probe.weights, &all, l2_weight, Some((&mut grad, &mut touched)), &mut probs);
    (loss, grad)
}

/// Largest relative difference between the analytic gradient and central
/// finite differences with step 1e-5. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(cfg: &TrainConfig, probe: &GradientProbe) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = loss_and_gradient(probe, cfg.l2_weight);
    let problem = probe.problem();
    let mut w = probe.weights.clone();
    let mut worst: f64 = 0.0;
    for k in 0..w.len() {
        let orig = w[k];
        w[k] = orig + STEP;
        let up = problem.full_loss(&w, cfg.l2_weight);
        w[k] = orig - STEP;
        let down = problem.full_loss(&w, cfg.l2_weight);
        w[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
