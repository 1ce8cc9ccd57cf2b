//! Class lexicon, term matching and distant supervision.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::Sample;
use crate::labels::{LabelSet, TrainingSet};
use crate::ontology::{ClassIdx, Ontology, OntologyError};
use crate::textfeat::tokenize;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: empty term")]
    EmptyTerm { line: usize },
    #[error("line {line}: {source}")]
    Class { line: usize, source: OntologyError },
}

/// Normalized example terms, each pointing at one or more classes.
///
/// Terms are stored as their token sequence joined by single spaces, the
/// same normalization applied to descriptions before matching.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, BTreeSet<ClassIdx>>,
    max_term_tokens: usize,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term. Returns `false` (and adds nothing) if the term
    /// normalizes to nothing.
    pub fn add(&mut self, term: &str, class: ClassIdx) -> bool {
        let tokens = tokenize(term);
        if tokens.is_empty() {
            return false;
        }
        self.max_term_tokens = self.max_term_tokens.max(tokens.len());
        self.entries.entry(tokens.join(" ")).or_default().insert(class);
        true
    }

    /// Every class name and synonym becomes a term for its class.
    pub fn from_ontology(ontology: &Ontology) -> Self {
        let mut lex = Lexicon::new();
        for i in 0..ontology.len() {
            let c = ClassIdx(i as u32);
            lex.add(ontology.name(c), c);
            for syn in ontology.synonyms(c) {
                lex.add(syn, c);
            }
        }
        lex
    }

    /// Reads `class_id<TAB>term` lines.
    pub fn parse_tsv(text: &str, ontology: &Ontology) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.trim().is_empty() {
                continue;
            }
            let Some((class, term)) = raw.split_once('\t') else {
                return Err(LexiconError::Malformed { line, message: "expected `class_id<TAB>term`".into() });
            };
            let class = ontology.index_of(class.trim()).map_err(|source| LexiconError::Class { line, source })?;
            if !lex.add(term, class) {
                return Err(LexiconError::EmptyTerm { line });
            }
        }
        Ok(lex)
    }

    /// One `class_id<TAB>term` line per (term, class) pair, sorted by term.
    pub fn to_tsv(&self, ontology: &Ontology) -> String {
        let mut out = String::new();
        for (term, classes) in &self.entries {
            for c in classes {
                out.push_str(&format!("{}\t{term}\n", ontology.id(*c)));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &BTreeSet<ClassIdx>)> {
        self.entries.iter().map(|(t, c)| (t.as_str(), c))
    }

    pub fn lookup(&self, term: &str) -> Option<&BTreeSet<ClassIdx>> {
        self.entries.get(&tokenize(term).join(" "))
    }

    /// Classes of every term that occurs in `text` as a contiguous run of
    /// whole tokens. Overlapping occurrences all count.
    pub fn match_text(&self, text: &str) -> BTreeSet<ClassIdx> {
        let tokens = tokenize(text);
        let mut found = BTreeSet::new();
        let mut key = String::new();
        for start in 0..tokens.len() {
            key.clear();
            for (n, tok) in tokens[start..].iter().take(self.max_term_tokens).enumerate() {
                if n > 0 {
                    key.push(' ');
                }
                key.push_str(tok);
                if let Some(classes) = self.entries.get(&key) {
                    found.extend(classes.iter().copied());
                }
            }
        }
        found
    }

    /// The initial training set: every sample whose description matches at
    /// least one term, labeled with all matched classes at score 1.0.
    pub fn distant_labels(&self, samples: &[Sample]) -> TrainingSet {
        samples
            .iter()
            .filter_map(|s| {
                let matched = self.match_text(s.text()?);
                (!matched.is_empty()).then(|| (s.id.clone(), LabelSet::uniform(matched)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn onto() -> Ontology {
        Ontology::parse_obo(
            "[Term]\nid: T:1\nname: leukocyte\n\n[Term]\nid: T:2\nname: leukemia cell\nis_a: T:1\nsynonym: \"AML\" EXACT []\n\n[Term]\nid: T:9\nname: bone marrow\n",
        )
        .unwrap()
    }

    fn sample(id: &str, text: Option<&str>) -> Sample {
        Sample { id: id.into(), features: vec![0.0], text: text.map(String::from) }
    }

    #[test]
    fn lexicon_from_ontology_names_and_synonyms() {
        let o = onto();
        let lex = Lexicon::from_ontology(&o);
        let t2 = o.index_of("T:2").unwrap();
        assert_eq!(lex.lookup("leukemia cell"), Some(&BTreeSet::from([t2])));
        assert_eq!(lex.lookup("aml"), Some(&BTreeSet::from([t2])));
        assert_eq!(lex.len(), 4);
    }

    #[test]
    fn shared_synonym_is_ambiguous() {
        let o = Ontology::parse_tsv("A\ta\t\tculture\nB\tb\t\tculture").unwrap();
        let lex = Lexicon::from_ontology(&o);
        assert_eq!(lex.lookup("culture").unwrap().len(), 2);
    }

    #[test]
    fn root_only_ontology_gives_empty_lexicon() {
        let o = Ontology::parse_tsv("").unwrap();
        assert!(Lexicon::from_ontology(&o).is_empty());
    }

    #[test]
    fn tsv_load_errors() {
        let o = onto();
        let lex = Lexicon::parse_tsv("T:1\tWhite  Blood-Cell\nT:9\tmarrow\n", &o).unwrap();
        assert!(lex.lookup("white blood cell").is_some());
        assert!(matches!(Lexicon::parse_tsv("T:7\tx\n", &o), Err(LexiconError::Class { line: 1, .. })));
        assert!(matches!(Lexicon::parse_tsv("T:1\tx\nT:1\t --- \n", &o), Err(LexiconError::EmptyTerm { line: 2 })));
        assert!(matches!(Lexicon::parse_tsv("T:1 x\n", &o), Err(LexiconError::Malformed { line: 1, .. })));
        let back = Lexicon::parse_tsv(&lex.to_tsv(&o), &o).unwrap();
        assert_eq!(back, lex);
    }

    #[test]
    fn match_examples() {
        let o = onto();
        let mut lex = Lexicon::new();
        let (t2, t9) = (o.index_of("T:2").unwrap(), o.index_of("T:9").unwrap());
        lex.add("bone marrow", t9);
        lex.add("aml", t2);
        assert_eq!(lex.match_text("Bone marrow sample, AML patient"), BTreeSet::from([t9, t2]));
        assert!(lex.match_text("normal").is_empty());

        let mut only_cell = Lexicon::new();
        only_cell.add("leukemia cell", t2);
        assert!(only_cell.match_text("leukemia").is_empty());

        let mut ovary = Lexicon::new();
        ovary.add("ovary", t2);
        assert!(ovary.match_text("discovery").is_empty());
    }

    #[test]
    fn distant_labels_counts() {
        let o = onto();
        let lex = Lexicon::from_ontology(&o);
        let samples = vec![
            sample("s1", Some("AML blast")),
            sample("s2", Some("aml from bone marrow")),
            sample("s3", Some("healthy control")),
            sample("s4", None),
        ];
        let d0 = lex.distant_labels(&samples);
        assert_eq!(d0.len(), 2);
        assert_eq!(d0.pair_count(), 3);
        assert!(d0.iter().all(|(_, l)| l.iter().all(|(_, s)| s == 1.0)));

        let silent: Vec<Sample> = (0..5).map(|i| sample(&format!("x{i}"), None)).collect();
        assert!(lex.distant_labels(&silent).is_empty());
    }

    #[test]
    fn distant_coverage_matches_independent_scan() {
        // 40% of texts carry exactly one term; the rest carry none.
        let o = onto();
        let lex = Lexicon::from_ontology(&o);
        let samples: Vec<Sample> = (0..50)
            .map(|i| {
                let text = if i % 5 < 2 { format!("sample {i} bone marrow") } else { format!("sample {i} bone") };
                sample(&format!("s{i:02}"), Some(&text))
            })
            .collect();
        let scanned = samples.iter().filter(|s| s.text.as_deref().unwrap().contains("bone marrow")).count();
        assert_eq!(scanned, 20);
        assert_eq!(lex.distant_labels(&samples).len(), scanned);
    }

    /// Term-by-term check: does the term's token list appear contiguously?
    fn brute_match(terms: &[(String, ClassIdx)], text: &str) -> BTreeSet<ClassIdx> {
        let toks = tokenize(text);
        let mut out = BTreeSet::new();
        for (term, c) in terms {
            let tt = tokenize(term);
            if tt.is_empty() || tt.len() > toks.len() {
                continue;
            }
            if (0..=toks.len() - tt.len()).any(|i| toks[i..i + tt.len()] == tt[..]) {
                out.insert(*c);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matcher_equals_brute_force(
            terms in prop::collection::vec(("[abc]{1,2}( [abc]{1,2}){0,2}", 0u32..4), 1..8),
            words in prop::collection::vec("[abc]{1,2}|[,.-]", 0..15),
        ) {
            let terms: Vec<(String, ClassIdx)> = terms.into_iter().map(|(t, c)| (t, ClassIdx(c))).collect();
            let mut lex = Lexicon::new();
            for (t, c) in &terms { lex.add(t, *c); }
            let text = words.join(" ");
            prop_assert_eq!(lex.match_text(&text), brute_match(&terms, &text));
            prop_assert_eq!(lex.match_text(&text), lex.match_text(&text.to_uppercase()));
        }

        #[test]
        fn distant_pairs_are_matches(texts in prop::collection::vec(prop::option::of("[ab ]{0,12}"), 0..10)) {
            let mut lex = Lexicon::new();
            lex.add("a", ClassIdx(0));
            lex.add("a b", ClassIdx(1));
            let samples: Vec<Sample> = texts.iter().enumerate()
                .map(|(i, t)| sample(&format!("s{i}"), t.as_deref())).collect();
            let d0 = lex.distant_labels(&samples);
            for (id, labels) in &d0 {
                let s = samples.iter().find(|s| &s.id == id).unwrap();
                let text = s.text().expect("entries always have text");
                let matched = lex.match_text(text);
                prop_assert!(labels.classes().all(|c| matched.contains(&c)));
            }
        }
    }
}
