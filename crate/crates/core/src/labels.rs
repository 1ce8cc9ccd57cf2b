//! Scored label sets and per-sample training sets.

use std::collections::{btree_map, BTreeMap, BTreeSet};

use crate::ontology::{ClassIdx, Ontology, OntologyError};

/// Scored class assignments for one sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSet {
    labels: BTreeMap<ClassIdx, f64>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// All classes at score 1.0.
    pub fn uniform<I: IntoIterator<Item = ClassIdx>>(classes: I) -> Self {
        LabelSet { labels: classes.into_iter().map(|c| (c, 1.0)).collect() }
    }

    pub fn insert(&mut self, class: ClassIdx, score: f64) {
        self.labels.insert(class, score);
    }

    /// Inserts, keeping the larger score on collision.
    pub fn insert_max(&mut self, class: ClassIdx, score: f64) {
        self.labels.entry(class).and_modify(|s| *s = s.max(score)).or_insert(score);
    }

    pub fn get(&self, class: ClassIdx) -> Option<f64> {
        self.labels.get(&class).copied()
    }

    pub fn contains(&self, class: ClassIdx) -> bool {
        self.labels.contains_key(&class)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassIdx, f64)> + '_ {
        self.labels.iter().map(|(c, s)| (*c, *s))
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassIdx> + '_ {
        self.labels.keys().copied()
    }

    pub fn class_set(&self) -> BTreeSet<ClassIdx> {
        self.labels.keys().copied().collect()
    }

    /// Labels sorted by descending score, ties by class index.
    pub fn ranked(&self) -> Vec<(ClassIdx, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

impl FromIterator<(ClassIdx, f64)> for LabelSet {
    fn from_iter<T: IntoIterator<Item = (ClassIdx, f64)>>(iter: T) -> Self {
        LabelSet { labels: iter.into_iter().collect() }
    }
}

/// Label sets keyed by sample id, iterated in sample-id order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    entries: BTreeMap<String, LabelSet>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, labels: LabelSet) {
        self.entries.insert(sample_id.into(), labels);
    }

    pub fn remove(&mut self, sample_id: &str) -> Option<LabelSet> {
        self.entries.remove(sample_id)
    }

    pub fn get(&self, sample_id: &str) -> Option<&LabelSet> {
        self.entries.get(sample_id)
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.entries.contains_key(sample_id)
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, String, LabelSet> {
        self.entries.iter()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of (sample, class) pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(LabelSet::len).sum()
    }

    pub fn distinct_classes(&self) -> BTreeSet<ClassIdx> {
        self.entries.values().flat_map(|l| l.classes()).collect()
    }

    /// Keeps only the entries whose sample id passes `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|id, _| keep(id));
    }

    /// Serializes as `sample_id<TAB>class_id<TAB>score`, sorted by sample id
    /// and then by descending score.
    pub fn to_tsv(&self, ontology: &Ontology) -> String {
        let mut out = String::new();
        for (id, labels) in &self.entries {
            for (c, score) in labels.ranked() {
                out.push_str(&format!("{id}\t{}\t{score}\n", ontology.id(c)));
            }
        }
        out
    }

    /// Reads `sample_id<TAB>class_id[<TAB>score]` lines; a missing score
    /// means 1.0. Repeated (sample, class) pairs keep the larger score.
    pub fn parse_tsv(text: &str, ontology: &Ontology) -> Result<Self, LabelParseError> {
        let mut set = TrainingSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(LabelParseError::Malformed {
                    line,
                    message: "expected 2 or 3 tab-separated fields".into(),
                });
            }
            let class =
                ontology.index_of(fields[1].trim()).map_err(|source| LabelParseError::Class { line, source })?;
            let score = match fields.get(2) {
                Some(s) => s
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| LabelParseError::Malformed { line, message: format!("bad score {s:?}") })?,
                None => 1.0,
            };
            let sample = fields[0].trim();
            if sample.is_empty() {
                return Err(LabelParseError::Malformed { line, message: "empty sample id".into() });
            }
            set.entries.entry(sample.to_string()).or_default().insert_max(class, score);
        }
        Ok(set)
    }
}

impl<'a> IntoIterator for &'a TrainingSet {
    type Item = (&'a String, &'a LabelSet);
    type IntoIter = btree_map::Iter<'a, String, LabelSet>;
    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

impl FromIterator<(String, LabelSet)> for TrainingSet {
    fn from_iter<T: IntoIterator<Item = (String, LabelSet)>>(iter: T) -> Self {
        TrainingSet { entries: iter.into_iter().collect() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabelParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Class { line: usize, source: OntologyError },
}
