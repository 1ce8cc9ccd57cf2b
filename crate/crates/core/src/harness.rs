//! Synthetic corpora, label corruption and the comparative experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sample};
use crate::cotrain::{annotate, score_corpus, CoTrainConfig, CoTrainError, CoTrainer};
use crate::io::write_atomic;
use crate::labels::{LabelSet, TrainingSet};
use crate::learner::Model;
use crate::lexicon::Lexicon;
use crate::metrics::{evaluate, GoldLabels};
use crate::ontology::{ClassIdx, NodeSpec, Ontology};
use crate::resolve::Strategy;

/// Probability that a node below the first level takes a second parent.
const SECOND_PARENT_P: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_samples: usize,
    pub feature_dim: usize,
    pub dag_depth: usize,
    pub synonyms_per_class: usize,
    /// Fraction of mentions that use a synonym absent from the lexicon.
    pub held_out_synonym_fraction: f64,
    /// Fraction of mentions that use a term shared with a sibling class.
    pub ambiguity_fraction: f64,
    pub missing_text_fraction: f64,
    pub feature_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 30,
            n_samples: 5000,
            feature_dim: 24,
            dag_depth: 3,
            synonyms_per_class: 3,
            held_out_synonym_fraction: 0.4,
            ambiguity_fraction: 0.2,
            missing_text_fraction: 0.3,
            feature_noise_sigma: 0.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("infeasible synthetic config: {0}")]
    Config(String),
    #[error("invalid experiment parameters: {0}")]
    Params(String),
    #[error(transparent)]
    CoTrain(#[from] CoTrainError),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.feature_dim < 2 {
            return bad(format!("feature_dim must be >= 2, got {}", self.feature_dim));
        }
        if self.dag_depth < 1 || self.dag_depth > self.n_classes {
            return bad(format!("dag_depth must be in 1..={}, got {}", self.n_classes, self.dag_depth));
        }
        if self.synonyms_per_class < 1 {
            return bad("synonyms_per_class must be >= 1".into());
        }
        if self.n_samples < 1 {
            return bad("n_samples must be >= 1".into());
        }
        for (name, v) in [
            ("held_out_synonym_fraction", self.held_out_synonym_fraction),
            ("ambiguity_fraction", self.ambiguity_fraction),
            ("missing_text_fraction", self.missing_text_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.held_out_synonym_fraction + self.ambiguity_fraction > 1.0 {
            return bad("held_out_synonym_fraction + ambiguity_fraction must not exceed 1".into());
        }
        if !(self.feature_noise_sigma >= 0.0 && self.feature_noise_sigma.is_finite()) {
            return bad(format!("feature_noise_sigma must be finite and >= 0, got {}", self.feature_noise_sigma));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub ontology: Ontology,
    pub lexicon: Lexicon,
    pub corpus: Corpus,
    pub gold: GoldLabels,
    /// Terms that appear in descriptions but not in the lexicon.
    pub held_out_terms: BTreeSet<String>,
}

impl SynthCorpus {
    pub const ONTOLOGY_FILE: &'static str = "ontology.tsv";
    pub const LEXICON_FILE: &'static str = "lexicon.tsv";
    pub const SAMPLES_FILE: &'static str = "samples.jsonl";
    pub const GOLD_FILE: &'static str = "gold.tsv";

    /// Writes the four corpus files into `dir` and returns their names.
    pub fn write_files(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        let files = [
            (Self::ONTOLOGY_FILE, self.ontology.to_tsv()),
            (Self::LEXICON_FILE, self.lexicon.to_tsv(&self.ontology)),
            (Self::SAMPLES_FILE, self.corpus.to_jsonl()),
            (Self::GOLD_FILE, self.gold.to_tsv(&self.ontology)),
        ];
        for (name, body) in &files {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(files.iter().map(|(n, _)| n.to_string()).collect())
    }

    /// Same classes, lexicon and gold, restricted to the given positions.
    pub fn subset(&self, positions: &[usize]) -> SynthCorpus {
        let corpus = self.corpus.subset(positions);
        let gold = self.gold.restricted(corpus.samples().iter().map(|s| s.id.as_str()));
        SynthCorpus { corpus, gold, ..self.clone() }
    }
}

/// Random lowercase word built from consonant-vowel syllables.
fn word(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    const CONS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    loop {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*CONS.choose(rng).unwrap() as char);
            w.push(*VOWELS.choose(rng).unwrap() as char);
        }
        if !FILLER.contains(&w.as_str()) && !QUALIFIERS.contains(&w.as_str()) && used.insert(w.clone()) {
            return w;
        }
    }
}

const FILLER: &[&str] = &[
    "sample",
    "total",
    "rna",
    "extract",
    "replicate",
    "donor",
    "patient",
    "batch",
    "primary",
    "control",
    "treated",
    "day",
    "isolated",
    "from",
    "of",
    "the",
    "and",
    "with",
    "adult",
    "biopsy",
    "profile",
    "expression",
    "array",
];

/// Second tokens of synonyms; shared by every class.
const QUALIFIERS: &[&str] = &["cell", "tissue", "line", "type", "lineage", "subtype", "population", "variant"];

/// Number of nodes per level, roughly doubling with depth, summing to `n`.
fn level_sizes(n: usize, depth: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..depth).map(|l| 2f64.powi(l as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = weights.iter().map(|w| ((w / total) * n as f64).floor().max(1.0) as usize).collect();
    let mut assigned: usize = sizes.iter().sum();
    let mut l = depth - 1;
    while assigned < n {
        sizes[l] += 1;
        assigned += 1;
        l = if l == 0 { depth - 1 } else { l - 1 };
    }
    while assigned > n {
        let l = (0..depth).rev().find(|&l| sizes[l] > 1).expect("depth <= n");
        sizes[l] -= 1;
        assigned -= 1;
    }
    sizes
}

/// Builds a layered random ontology, a lexicon and labeled samples.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SynthCorpus, HarnessError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used = BTreeSet::new();

    // Hierarchy: level 0 hangs off the root; every later node picks one
    // parent (round-robin over a shuffled previous level, so every node
    // there gets a child) and sometimes a second one.
    let sizes = level_sizes(cfg.n_classes, cfg.dag_depth);
    let width = cfg.n_classes.to_string().len().max(2);
    let mut levels: Vec<Vec<String>> = Vec::new();
    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut next_id = 0;
    for (l, &size) in sizes.iter().enumerate() {
        let ids: Vec<String> = (0..size).map(|i| format!("SC:{:0width$}", next_id + i)).collect();
        next_id += size;
        if l > 0 {
            let prev = &levels[l - 1];
            let mut order: Vec<usize> = (0..prev.len()).collect();
            order.shuffle(&mut rng);
            for (i, id) in ids.iter().enumerate() {
                let first = order[i % order.len()];
                let mut ps = vec![prev[first].clone()];
                if prev.len() > 1 && rng.random_bool(SECOND_PARENT_P) {
                    let mut second = rng.random_range(0..prev.len() - 1);
                    if second >= first {
                        second += 1;
                    }
                    ps.push(prev[second].clone());
                }
                parents.insert(id.clone(), ps);
            }
        } else {
            for id in &ids {
                parents.insert(id.clone(), Vec::new());
            }
        }
        levels.push(ids);
    }
    let all_ids: Vec<String> = levels.iter().flatten().cloned().collect();

    // Vocabulary: one stem per class; synonyms are "stem qualifier".
    // Synonym 0 is the class name and always stays in the lexicon.
    let stems: BTreeMap<&str, String> = all_ids.iter().map(|id| (id.as_str(), word(&mut rng, &mut used))).collect();
    let mut synonyms: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for id in &all_ids {
        let mut quals: Vec<&str> = QUALIFIERS.to_vec();
        quals.shuffle(&mut rng);
        let stem = &stems[id.as_str()];
        let list = (0..cfg.synonyms_per_class)
            .map(|j| match quals.get(j) {
                Some(q) => format!("{stem} {q}"),
                None => format!("{stem} {}", word(&mut rng, &mut used)),
            })
            .collect();
        synonyms.insert(id.as_str(), list);
    }
    // Held-out mentions use a term that shares no token with the lexicon:
    // a fresh abbreviation-like word per class.
    let held_out: BTreeMap<&str, String> = all_ids.iter().map(|id| (id.as_str(), word(&mut rng, &mut used))).collect();

    let nodes: Vec<NodeSpec> = all_ids
        .iter()
        .map(|id| {
            let syns = &synonyms[id.as_str()];
            NodeSpec {
                id: id.clone(),
                name: syns[0].clone(),
                parents: parents[id].clone(),
                synonyms: syns[1..].to_vec(),
                line: 0,
            }
        })
        .collect();
    let ontology = Ontology::from_nodes(nodes).map_err(|e| HarnessError::Config(e.to_string()))?;
    let leaves: Vec<ClassIdx> =
        (0..ontology.len()).map(|i| ClassIdx(i as u32)).filter(|&c| ontology.is_leaf(c)).collect();

    // Ambiguous terms: leaves sharing a first parent share one term; a leaf
    // without siblings shares its term with one random other leaf.
    let mut lexicon = Lexicon::from_ontology(&ontology);
    let mut groups: BTreeMap<ClassIdx, Vec<ClassIdx>> = BTreeMap::new();
    for &c in &leaves {
        let parent = ontology.parent_indices(c).first().copied().unwrap_or(c);
        groups.entry(parent).or_default().push(c);
    }
    let mut ambiguous: BTreeMap<ClassIdx, String> = BTreeMap::new();
    for members in groups.values() {
        let term = word(&mut rng, &mut used);
        for &c in members {
            lexicon.add(&term, c);
            ambiguous.insert(c, term.clone());
        }
        if members.len() == 1 && leaves.len() > 1 {
            let others: Vec<ClassIdx> = leaves.iter().copied().filter(|&o| o != members[0]).collect();
            lexicon.add(&term, *others.choose(&mut rng).unwrap());
        }
    }

    // Samples.
    let centroids: BTreeMap<ClassIdx, Vec<f64>> =
        leaves.iter().map(|&c| (c, (0..cfg.feature_dim).map(|_| rng.random::<f64>()).collect())).collect();
    let noise = Normal::new(0.0, cfg.feature_noise_sigma).map_err(|e| HarnessError::Config(e.to_string()))?;
    let sample_width = cfg.n_samples.to_string().len();
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut gold = GoldLabels::new();
    for i in 0..cfg.n_samples {
        let c = leaves[i % leaves.len()];
        let features: Vec<f64> = centroids[&c].iter().map(|m| m + noise.sample(&mut rng)).collect();
        let id_str = ontology.id(c).as_str();
        let u = rng.random::<f64>();
        let mention = if u < cfg.held_out_synonym_fraction {
            held_out[id_str].clone()
        } else if u < cfg.held_out_synonym_fraction + cfg.ambiguity_fraction {
            ambiguous[&c].clone()
        } else {
            synonyms[id_str].choose(&mut rng).unwrap().clone()
        };
        let text = if rng.random_bool(cfg.missing_text_fraction) { None } else { Some(describe(&mention, &mut rng)) };
        let id = format!("S{i:0sample_width$}");
        gold.insert(id.clone(), c);
        samples.push(Sample { id, features, text });
    }
    let corpus = Corpus::new(samples).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(SynthCorpus { ontology, lexicon, corpus, gold, held_out_terms: held_out.into_values().collect() })
}

fn describe(mention: &str, rng: &mut ChaCha8Rng) -> String {
    let f1 = FILLER.choose(rng).unwrap();
    let f2 = FILLER.choose(rng).unwrap();
    match rng.random_range(0..3) {
        0 => format!("{f1} {mention} {f2}"),
        1 => format!("{mention} {f1} {}", rng.random_range(1..40)),
        _ => format!("{f1} {f2} {mention}"),
    }
}

/// Replaces the labels of exactly `floor(fraction * n)` uniformly chosen
/// entries with one uniformly random class at score 1.0.
pub fn perturb_labels(d0: &TrainingSet, fraction: f64, ontology: &Ontology, seed: u64) -> TrainingSet {
    let fraction = fraction.clamp(0.0, 1.0);
    let n_replace = (fraction * d0.len() as f64).floor() as usize;
    if n_replace == 0 || ontology.is_empty() {
        return d0.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<&str> = d0.sample_ids().collect();
    ids.shuffle(&mut rng);
    let mut out = d0.clone();
    for id in &ids[..n_replace] {
        let c = ClassIdx(rng.random_range(0..ontology.len() as u32));
        out.insert(id.to_string(), LabelSet::uniform([c]));
    }
    out
}

/// Quality of a feature-view model on a gold-labeled corpus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelScore {
    pub auprc: f64,
    #[serde(rename = "precision_at_0.5")]
    pub precision_at_half: f64,
    #[serde(rename = "precision_at_0.5_reached")]
    pub precision_at_half_reached: bool,
    pub max_achieved_recall: f64,
    /// Distinct classes predicted with score at or above the threshold.
    pub distinct_classes: usize,
}

pub fn score_model(model: &Model, corpus: &Corpus, gold: &GoldLabels, ontology: &Ontology, tau: f64) -> ModelScore {
    let scored = score_corpus(model, corpus).expect("model was trained on this feature space");
    let (report, _) = evaluate(&scored, gold, ontology);
    let distinct = annotate(model, corpus, tau).expect("same model").distinct_classes().len();
    ModelScore {
        auprc: report.auprc,
        precision_at_half: report.precision_at_half,
        precision_at_half_reached: report.precision_at_half_reached,
        max_achieved_recall: report.max_achieved_recall,
        distinct_classes: distinct,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    #[serde(flatten)]
    pub score: ModelScore,
    /// AUPRC of the first iteration's feature-view model.
    pub first_iteration_auprc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyReport {
    pub rows: Vec<StrategyRow>,
}

impl StrategyReport {
    pub fn row(&self, strategy: Strategy) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

/// One full run per resolution strategy on identical inputs.
pub fn run_strategy_comparison(corpus: &SynthCorpus, cfg: &CoTrainConfig) -> Result<StrategyReport, HarnessError> {
    let distant = corpus.lexicon.distant_labels(corpus.corpus.samples());
    let mut rows = Vec::new();
    for strategy in Strategy::ALL {
        let run_cfg = CoTrainConfig { strategy, ..cfg.clone() };
        let out = CoTrainer::new(&corpus.corpus, &corpus.ontology, distant.clone(), run_cfg)?
            .with_gold(&corpus.gold)
            .run()?;
        let first = out.history.main_records().next().and_then(|r| r.auprc).unwrap_or(0.0);
        rows.push(StrategyRow {
            strategy,
            score: score_model(&out.main, &corpus.corpus, &corpus.gold, &corpus.ontology, cfg.tau),
            first_iteration_auprc: first,
        });
    }
    Ok(StrategyReport { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRow {
    pub fraction: f64,
    #[serde(flatten)]
    pub score: ModelScore,
    pub completed_iterations: usize,
    /// Set when an iteration produced an empty training set; the row then
    /// scores the last feature-view model trained before that.
    pub stopped_early: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseReport {
    pub rows: Vec<NoiseRow>,
}

/// Perturbs `D0` at each fraction and runs the loop from the perturbed set.
pub fn run_noise_sweep(
    corpus: &SynthCorpus,
    cfg: &CoTrainConfig,
    fractions: &[f64],
) -> Result<NoiseReport, HarnessError> {
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(HarnessError::Params("fractions must be sorted ascending".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(HarnessError::Params(format!("fraction {f} outside [0, 1]")));
    }
    let d0 = corpus.lexicon.distant_labels(corpus.corpus.samples());
    let mut rows = Vec::new();
    for &fraction in fractions {
        let noisy = perturb_labels(&d0, fraction, &corpus.ontology, cfg.seed ^ 0x006e_6f69_7365);
        let mut trainer = CoTrainer::new(&corpus.corpus, &corpus.ontology, noisy, cfg.clone())?;
        let mut stopped_early = None;
        while !trainer.is_done() {
            match trainer.step() {
                Ok(()) => {}
                Err(e @ CoTrainError::EmptyIteration { .. }) if trainer.main_model().is_some() => {
                    stopped_early = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let main = trainer.main_model().expect("at least one half-iteration ran");
        rows.push(NoiseRow {
            fraction,
            score: score_model(main, &corpus.corpus, &corpus.gold, &corpus.ontology, cfg.tau),
            completed_iterations: trainer.iteration(),
            stopped_early,
        });
    }
    Ok(NoiseReport { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub fraction: f64,
    pub n_samples: usize,
    pub mean_auprc: f64,
    pub mean_distinct_classes: f64,
    pub auprc: Vec<f64>,
    pub distinct_classes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

/// Positions of a seeded random subsample of size `floor(fraction * n)`
/// (at least one), in corpus order.
pub fn subsample_positions(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((fraction * n as f64).floor() as usize).clamp(1, n);
    if k == n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..n).collect();
    pos.shuffle(&mut rng);
    pos.truncate(k);
    pos.sort_unstable();
    pos
}

/// Trains on subsamples of the corpus and scores every model on the full
/// corpus.
pub fn run_data_scaling(
    corpus: &SynthCorpus,
    cfg: &CoTrainConfig,
    fractions: &[f64],
    repeats: usize,
) -> Result<ScalingReport, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::Params("repeats must be >= 1".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(HarnessError::Params(format!("fraction {f} outside (0, 1]")));
    }
    let mut rows = Vec::new();
    for &fraction in fractions {
        let mut auprc = Vec::new();
        let mut distinct = Vec::new();
        let mut n_samples = 0;
        for r in 0..repeats {
            let seed = cfg.seed ^ (r as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let positions = subsample_positions(corpus.corpus.len(), fraction, seed);
            n_samples = positions.len();
            let sub = corpus.corpus.subset(&positions);
            let d0 = corpus.lexicon.distant_labels(sub.samples());
            let out = CoTrainer::new(&sub, &corpus.ontology, d0, cfg.clone())?.run()?;
            let score = score_model(&out.main, &corpus.corpus, &corpus.gold, &corpus.ontology, cfg.tau);
            auprc.push(score.auprc);
            distinct.push(score.distinct_classes);
        }
        rows.push(ScalingRow {
            fraction,
            n_samples,
            mean_auprc: auprc.iter().sum::<f64>() / repeats as f64,
            mean_distinct_classes: distinct.iter().sum::<usize>() as f64 / repeats as f64,
            auprc,
            distinct_classes: distinct,
        });
    }
    Ok(ScalingReport { rows })
}

impl StrategyReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("strategy\tauprc\tprecision_at_0.5\tdistinct_classes\tfirst_iteration_auprc\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.strategy, r.score.auprc, r.score.precision_at_half, r.score.distinct_classes, r.first_iteration_auprc
            ));
        }
        out
    }
}

impl NoiseReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("fraction\tauprc\tprecision_at_0.5\tdistinct_classes\tcompleted_iterations\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.fraction, r.score.auprc, r.score.precision_at_half, r.score.distinct_classes, r.completed_iterations
            ));
        }
        out
    }
}

impl ScalingReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("fraction\tn_samples\tmean_auprc\tmean_distinct_classes\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.fraction, r.n_samples, r.mean_auprc, r.mean_distinct_classes));
        }
        out
    }
}
