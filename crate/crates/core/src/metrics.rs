//! Ontology-based precision/recall.
//!
//! Predicted and gold classes are expanded with all of their ancestors
//! (root excluded) before being compared, and counts are pooled over all
//! samples before dividing ("micro" averaging). Predicting an ancestor of the
//! gold class therefore earns partial credit, while a class in an unrelated
//! branch earns none.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::labels::{LabelParseError, TrainingSet};
use crate::ontology::{ClassIdx, Ontology};

/// True classes per sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoldLabels {
    labels: BTreeMap<String, BTreeSet<ClassIdx>>,
}

impl GoldLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, class: ClassIdx) {
        self.labels.entry(sample_id.into()).or_default().insert(class);
    }

    pub fn get(&self, sample_id: &str) -> Option<&BTreeSet<ClassIdx>> {
        self.labels.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<ClassIdx>)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Keeps only the given sample ids.
    pub fn restricted<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> GoldLabels {
        let labels =
            ids.into_iter().filter_map(|id| self.labels.get(id).map(|v| (id.to_string(), v.clone()))).collect();
        GoldLabels { labels }
    }

    /// Reads `sample_id<TAB>class_id` lines; a sample may appear on several lines.
    pub fn parse_tsv(text: &str, ontology: &Ontology) -> Result<Self, LabelParseError> {
        let set = TrainingSet::parse_tsv(text, ontology)?;
        Ok(set.iter().map(|(id, l)| (id.clone(), l.class_set())).collect())
    }

    pub fn to_tsv(&self, ontology: &Ontology) -> String {
        let mut out = String::new();
        for (id, classes) in &self.labels {
            for c in classes {
                out.push_str(&format!("{id}\t{}\n", ontology.id(*c)));
            }
        }
        out
    }
}

impl FromIterator<(String, BTreeSet<ClassIdx>)> for GoldLabels {
    fn from_iter<T: IntoIterator<Item = (String, BTreeSet<ClassIdx>)>>(iter: T) -> Self {
        GoldLabels { labels: iter.into_iter().collect() }
    }
}

/// Pooled precision and recall with the counts behind them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    /// Predicted samples absent from the gold labels (skipped).
    pub ignored: usize,
}

impl PrecisionRecall {
    fn from_counts(correct: usize, predicted: usize, gold: usize, ignored: usize) -> Self {
        let precision = if predicted == 0 { 1.0 } else { correct as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
        PrecisionRecall { precision, recall, correct, predicted, gold, ignored }
    }
}

/// Micro precision/recall over ancestor-expanded label sets. Gold samples
/// missing from `pred` count as predicting nothing.
pub fn ontology_pr(
    pred: &BTreeMap<String, BTreeSet<ClassIdx>>,
    gold: &GoldLabels,
    ontology: &Ontology,
) -> PrecisionRecall {
    let ignored = pred.keys().filter(|id| gold.get(id).is_none()).count();
    if ignored > 0 {
        log::warn!("{ignored} predicted sample(s) have no gold labels and were ignored");
    }
    let (mut correct, mut predicted, mut gold_total) = (0, 0, 0);
    let empty = BTreeSet::new();
    for (id, g) in gold.iter() {
        let g = ontology.expand_indices(g.iter().copied());
        let p = ontology.expand_indices(pred.get(id).unwrap_or(&empty).iter().copied());
        correct += p.intersection(&g).count();
        predicted += p.len();
        gold_total += g.len();
    }
    PrecisionRecall::from_counts(correct, predicted, gold_total, ignored)
}

/// Classes scoring at least `threshold`, per sample.
pub fn predictions_at(scored: &TrainingSet, threshold: f64) -> BTreeMap<String, BTreeSet<ClassIdx>> {
    scored
        .iter()
        .map(|(id, l)| (id.clone(), l.iter().filter(|&(_, s)| s >= threshold).map(|(c, _)| c).collect()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

/// Precision-recall curve ordered by ascending recall (descending threshold).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<CurvePoint>,
    pub max_achieved_recall: f64,
}

impl PrCurve {
    /// `threshold<TAB>recall<TAB>precision` rows with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("threshold\trecall\tprecision\n");
        for p in &self.points {
            out.push_str(&format!("{}\t{}\t{}\n", p.threshold, p.recall, p.precision));
        }
        out
    }
}

/// Sweeps the threshold over every distinct score (plus 1.0), from high to
/// low, and evaluates [`ontology_pr`] at each.
///
/// Points with zero recall are dropped unless nothing is ever recalled, in
/// which case only the highest-threshold point is kept. Consecutive points
/// with identical (recall, precision) keep the higher threshold.
pub fn pr_curve(scored: &TrainingSet, gold: &GoldLabels, ontology: &Ontology) -> PrCurve {
    // Expanded gold per sample, and the gold total.
    let gold_sets: HashMap<&str, BTreeSet<ClassIdx>> =
        gold.iter().map(|(id, g)| (id, ontology.expand_indices(g.iter().copied()))).collect();
    let gold_total: usize = gold_sets.values().map(BTreeSet::len).sum();

    let mut triples: Vec<(f64, &str, ClassIdx)> = Vec::new();
    for (id, labels) in scored {
        if gold_sets.contains_key(id.as_str()) {
            triples.extend(labels.iter().map(|(c, s)| (s, id.as_str(), c)));
        }
    }
    triples.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));

    let mut thresholds: Vec<f64> = triples.iter().map(|t| t.0).collect();
    thresholds.push(1.0);
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    // Coverage counts of expanded predictions, per sample and class.
    let mut cover: HashMap<(&str, ClassIdx), u32> = HashMap::new();
    let (mut correct, mut predicted) = (0usize, 0usize);
    let mut next = 0;
    let mut raw = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        while next < triples.len() && triples[next].0 >= t {
            let (_, id, c) = triples[next];
            next += 1;
            let g = &gold_sets[id];
            for node in std::iter::once(c).chain(ontology.ancestor_indices(c).iter().copied()) {
                let n = cover.entry((id, node)).or_insert(0);
                *n += 1;
                if *n == 1 {
                    predicted += 1;
                    if g.contains(&node) {
                        correct += 1;
                    }
                }
            }
        }
        let pr = PrecisionRecall::from_counts(correct, predicted, gold_total, 0);
        raw.push(CurvePoint { recall: pr.recall, precision: pr.precision, threshold: t });
    }

    let mut points: Vec<CurvePoint> = raw.iter().copied().filter(|p| p.recall > 0.0).collect();
    if points.is_empty() {
        points.push(raw[0]);
    }
    points.dedup_by(|later, earlier| later.recall == earlier.recall && later.precision == earlier.precision);
    let max_achieved_recall = raw.last().map_or(0.0, |p| p.recall);
    PrCurve { points, max_achieved_recall }
}

/// Trapezoidal area under precision over recall, from 0 to the largest
/// recall reached. The first point's precision is held constant back to
/// recall 0; nothing is extrapolated past the last point.
pub fn auprc(curve: &PrCurve) -> f64 {
    let Some(first) = curve.points.first() else { return 0.0 };
    let mut area = first.recall * first.precision;
    for w in curve.points.windows(2) {
        area += (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0;
    }
    area
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrecisionAtRecall {
    pub precision: f64,
    /// `false` when the curve never reaches the requested recall; the
    /// precision is then reported as 0.
    pub reached: bool,
}

/// Precision at recall `r`, linearly interpolated between the bracketing
/// curve points.
pub fn precision_at_recall(curve: &PrCurve, r: f64) -> PrecisionAtRecall {
    let unreached = PrecisionAtRecall { precision: 0.0, reached: false };
    let Some(first) = curve.points.first() else { return unreached };
    if r > curve.max_achieved_recall {
        return unreached;
    }
    if r <= first.recall {
        return PrecisionAtRecall { precision: first.precision, reached: true };
    }
    for w in curve.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.recall < r && r <= b.recall {
            let t = (r - a.recall) / (b.recall - a.recall);
            return PrecisionAtRecall { precision: a.precision + t * (b.precision - a.precision), reached: true };
        }
    }
    unreached
}

/// Summary written by the evaluation command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub auprc: f64,
    #[serde(rename = "precision_at_0.5")]
    pub precision_at_half: f64,
    #[serde(rename = "precision_at_0.5_reached")]
    pub precision_at_half_reached: bool,
    pub max_achieved_recall: f64,
    pub n_samples: usize,
    pub n_classes_predicted: usize,
}

/// Curve, AUPRC and precision at 0.5 recall in one go.
pub fn evaluate(scored: &TrainingSet, gold: &GoldLabels, ontology: &Ontology) -> (EvalReport, PrCurve) {
    let curve = pr_curve(scored, gold, ontology);
    let at_half = precision_at_recall(&curve, 0.5);
    let report = EvalReport {
        auprc: auprc(&curve),
        precision_at_half: at_half.precision,
        precision_at_half_reached: at_half.reached,
        max_achieved_recall: curve.max_achieved_recall,
        n_samples: gold.len(),
        n_classes_predicted: scored.distinct_classes().len(),
    };
    (report, curve)
}
