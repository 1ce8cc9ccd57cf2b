//! Python bindings for `weaklabel`.
//!
//! Labels cross the boundary as class-id strings; scored label sets become
//! `dict[str, float]` and training sets `dict[str, dict[str, float]]`.

use std::collections::{BTreeMap, BTreeSet};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use weaklabel::cotrain::{self as engine, CoTrainConfig, CoTrainError};
use weaklabel::harness::{self, SynthConfig};
use weaklabel::metrics::{self, GoldLabels};
use weaklabel::{textfeat, ClassIdx, LabelSet, Specificity, Strategy, TrainingSet};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cotrain_err(e: CoTrainError) -> PyErr {
    match e {
        CoTrainError::InvalidConfig(_) | CoTrainError::UnknownLabeledSample(_) => value_err(e),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

type ScoredSet = BTreeMap<String, BTreeMap<String, f64>>;

fn labels_to_py(labels: &LabelSet, onto: &weaklabel::Ontology) -> BTreeMap<String, f64> {
    labels.iter().map(|(c, s)| (onto.id(c).as_str().to_string(), s)).collect()
}

fn set_to_py(set: &TrainingSet, onto: &weaklabel::Ontology) -> ScoredSet {
    set.iter().map(|(id, l)| (id.clone(), labels_to_py(l, onto))).collect()
}

fn indices(onto: &weaklabel::Ontology, ids: &[String]) -> PyResult<BTreeSet<ClassIdx>> {
    ids.iter().map(|c| onto.index_of(c).map_err(value_err)).collect()
}

/// A validated class hierarchy.
#[pyclass(frozen, skip_from_py_object, module = "pyweaklabel")]
#[derive(Clone)]
struct Ontology(weaklabel::Ontology);

#[pymethods]
impl Ontology {
    #[staticmethod]
    fn from_tsv(text: &str) -> PyResult<Self> {
        weaklabel::Ontology::parse_tsv(text).map(Ontology).map_err(value_err)
    }

    #[staticmethod]
    fn from_obo(text: &str) -> PyResult<Self> {
        weaklabel::Ontology::parse_obo(text).map(Ontology).map_err(value_err)
    }

    fn to_tsv(&self) -> String {
        self.0.to_tsv()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn class_ids(&self) -> Vec<String> {
        self.0.class_ids().iter().map(|c| c.as_str().to_string()).collect()
    }

    fn name(&self, id: &str) -> PyResult<String> {
        Ok(self.0.name(self.0.index_of(id).map_err(value_err)?).to_string())
    }

    fn parents(&self, id: &str) -> PyResult<Vec<String>> {
        Ok(self.0.parents(id).map_err(value_err)?.into_iter().map(|c| c.as_str().to_string()).collect())
    }

    fn ancestors(&self, id: &str) -> PyResult<Vec<String>> {
        Ok(self.0.ancestors(id).map_err(value_err)?.into_iter().map(|c| c.as_str().to_string()).collect())
    }

    /// The classes plus all their ancestors.
    fn expand(&self, ids: Vec<String>) -> PyResult<Vec<String>> {
        let set = self.0.expand(ids.iter().map(String::as_str)).map_err(value_err)?;
        Ok(set.into_iter().map(|c| c.as_str().to_string()).collect())
    }

    /// One of `"equal"`, `"first"`, `"second"` or `"unrelated"`, naming the
    /// more specific argument.
    fn specificity(&self, first: &str, second: &str) -> PyResult<&'static str> {
        Ok(match self.0.specificity_relation(first, second).map_err(value_err)? {
            Specificity::Equal => "equal",
            Specificity::FirstMoreSpecific => "first",
            Specificity::SecondMoreSpecific => "second",
            Specificity::Unrelated => "unrelated",
        })
    }
}

#[pyclass(frozen, skip_from_py_object, module = "pyweaklabel")]
#[derive(Clone)]
struct Lexicon(weaklabel::Lexicon);

#[pymethods]
impl Lexicon {
    /// Class names and synonyms.
    #[staticmethod]
    fn from_ontology(ontology: &Ontology) -> Self {
        Lexicon(weaklabel::Lexicon::from_ontology(&ontology.0))
    }

    #[staticmethod]
    fn from_tsv(text: &str, ontology: &Ontology) -> PyResult<Self> {
        weaklabel::Lexicon::parse_tsv(text, &ontology.0).map(Lexicon).map_err(value_err)
    }

    fn to_tsv(&self, ontology: &Ontology) -> String {
        self.0.to_tsv(&ontology.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn match_text(&self, text: &str, ontology: &Ontology) -> Vec<String> {
        self.0.match_text(text).into_iter().map(|c| ontology.0.id(c).as_str().to_string()).collect()
    }

    /// Distant labels for every sample whose text matches a term.
    fn distant_labels(&self, corpus: &Corpus, ontology: &Ontology) -> ScoredSet {
        set_to_py(&self.0.distant_labels(corpus.0.samples()), &ontology.0)
    }
}

#[pyclass(frozen, skip_from_py_object, module = "pyweaklabel")]
#[derive(Clone)]
struct Corpus(weaklabel::Corpus);

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        weaklabel::Corpus::parse_jsonl(text).map(Corpus).map_err(value_err)
    }

    fn to_jsonl(&self) -> String {
        self.0.to_jsonl()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample_ids(&self) -> Vec<String> {
        self.0.samples().iter().map(|s| s.id.clone()).collect()
    }
}

#[pyclass(frozen, skip_from_py_object, module = "pyweaklabel")]
#[derive(Clone)]
struct Model(weaklabel::Model);

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        weaklabel::Model::from_json(text).map(Model).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    /// `"main"` or `"aux"`.
    #[getter]
    fn view(&self) -> &'static str {
        match self.0.view() {
            weaklabel::View::Main => "main",
            weaklabel::View::Aux => "aux",
        }
    }

    /// Class probabilities for a description (text-view models only).
    fn predict_text(&self, text: &str) -> PyResult<BTreeMap<String, f64>> {
        let scores = self.0.predict_text(text).map_err(value_err)?;
        Ok(scores.iter().map(|(c, s)| (self.0.class_ids()[c.get()].as_str().to_string(), s)).collect())
    }

    /// Thresholded class scores for every sample (feature-view models only).
    fn annotate(&self, corpus: &Corpus, ontology: &Ontology, tau: f64) -> PyResult<ScoredSet> {
        let set = engine::annotate(&self.0, &corpus.0, tau).map_err(value_err)?;
        Ok(set_to_py(&set, &ontology.0))
    }
}

/// Result of a co-training run.
#[pyclass(frozen, module = "pyweaklabel")]
struct CoTrainResult {
    #[pyo3(get)]
    main: Model,
    #[pyo3(get)]
    aux: Model,
    /// Per-iteration history as JSON.
    #[pyo3(get)]
    history_json: String,
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (corpus, ontology, lexicon, strategy = "relation", n_iter = 5, tau = 0.3, seed = 0))]
fn cotrain(
    py: Python<'_>,
    corpus: &Corpus,
    ontology: &Ontology,
    lexicon: &Lexicon,
    strategy: &str,
    n_iter: usize,
    tau: f64,
    seed: u64,
) -> PyResult<CoTrainResult> {
    let strategy: Strategy = strategy.parse().map_err(PyValueError::new_err)?;
    let cfg = CoTrainConfig { n_iter, tau, strategy, seed, ..CoTrainConfig::default() };
    let out = py.detach(|| engine::run(&corpus.0, &ontology.0, &lexicon.0, cfg)).map_err(cotrain_err)?;
    Ok(CoTrainResult { main: Model(out.main), aux: Model(out.aux), history_json: out.history.to_json() })
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textfeat::tokenize(text)
}

/// Hashed, L2-normalized text features as `(bucket, value)` pairs.
#[pyfunction]
fn featurize_text(text: &str) -> Vec<(u32, f64)> {
    textfeat::featurize_text(text).iter().collect()
}

/// Resolves one sample's distant and predicted labels.
#[pyfunction]
#[pyo3(signature = (strategy, distant, predicted, ontology))]
fn resolve(
    strategy: &str,
    distant: Option<BTreeMap<String, f64>>,
    predicted: BTreeMap<String, f64>,
    ontology: &Ontology,
) -> PyResult<BTreeMap<String, f64>> {
    let strategy: Strategy = strategy.parse().map_err(PyValueError::new_err)?;
    let to_set = |m: BTreeMap<String, f64>| -> PyResult<LabelSet> {
        m.into_iter().map(|(c, s)| Ok((ontology.0.index_of(&c).map_err(value_err)?, s))).collect()
    };
    let distant = distant.map(to_set).transpose()?;
    let out = weaklabel::resolve::resolve_sample(strategy, distant.as_ref(), &to_set(predicted)?, &ontology.0);
    Ok(labels_to_py(&out, &ontology.0))
}

/// Micro precision and recall over ancestor-expanded labels.
#[pyfunction]
fn ontology_pr(
    pred: BTreeMap<String, Vec<String>>,
    gold: BTreeMap<String, Vec<String>>,
    ontology: &Ontology,
) -> PyResult<(f64, f64)> {
    let o = &ontology.0;
    let pred = pred.into_iter().map(|(s, cs)| Ok((s, indices(o, &cs)?))).collect::<PyResult<BTreeMap<_, _>>>()?;
    let gold = gold.into_iter().map(|(s, cs)| Ok((s, indices(o, &cs)?))).collect::<PyResult<GoldLabels>>()?;
    let pr = metrics::ontology_pr(&pred, &gold, o);
    Ok((pr.precision, pr.recall))
}

/// Scores `sample_id -> {class_id: score}` predictions against gold labels.
#[pyfunction]
fn evaluate(
    pred: ScoredSet,
    gold: BTreeMap<String, Vec<String>>,
    ontology: &Ontology,
) -> PyResult<BTreeMap<String, f64>> {
    let o = &ontology.0;
    let scored = pred
        .into_iter()
        .map(|(s, m)| {
            let labels = m
                .into_iter()
                .map(|(c, v)| Ok((o.index_of(&c).map_err(value_err)?, v)))
                .collect::<PyResult<LabelSet>>()?;
            Ok((s, labels))
        })
        .collect::<PyResult<TrainingSet>>()?;
    let gold = gold.into_iter().map(|(s, cs)| Ok((s, indices(o, &cs)?))).collect::<PyResult<GoldLabels>>()?;
    let (report, _) = metrics::evaluate(&scored, &gold, o);
    Ok(BTreeMap::from([
        ("auprc".to_string(), report.auprc),
        ("precision_at_0.5".to_string(), report.precision_at_half),
        ("max_achieved_recall".to_string(), report.max_achieved_recall),
    ]))
}

/// A generated corpus with known gold labels.
#[pyclass(frozen, module = "pyweaklabel")]
struct SynthCorpus {
    #[pyo3(get)]
    ontology: Ontology,
    #[pyo3(get)]
    lexicon: Lexicon,
    #[pyo3(get)]
    corpus: Corpus,
    /// `sample_id -> [class_id]`.
    #[pyo3(get)]
    gold: BTreeMap<String, Vec<String>>,
}

#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn generate_synthetic(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<SynthCorpus> {
    let mut cfg = serde_json::to_value(SynthConfig::default()).expect("config serializes");
    if let Some(kwargs) = kwargs {
        for (k, v) in kwargs.iter() {
            let key: String = k.extract()?;
            if cfg.get(&key).is_none() {
                return Err(PyValueError::new_err(format!("unknown synthetic option {key:?}")));
            }
            let value = if let Ok(i) = v.extract::<u64>() {
                serde_json::json!(i)
            } else {
                serde_json::json!(v.extract::<f64>()?)
            };
            cfg[&key] = value;
        }
    }
    let cfg: SynthConfig = serde_json::from_value(cfg).map_err(value_err)?;
    let s = harness::gen_synthetic(&cfg).map_err(value_err)?;
    let gold = s
        .gold
        .iter()
        .map(|(id, cs)| (id.to_string(), cs.iter().map(|c| s.ontology.id(*c).as_str().to_string()).collect()))
        .collect();
    Ok(SynthCorpus { ontology: Ontology(s.ontology), lexicon: Lexicon(s.lexicon), corpus: Corpus(s.corpus), gold })
}

#[pymodule]
fn pyweaklabel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Ontology>()?;
    m.add_class::<Lexicon>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Model>()?;
    m.add_class::<CoTrainResult>()?;
    m.add_class::<SynthCorpus>()?;
    m.add_function(wrap_pyfunction!(cotrain, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(featurize_text, m)?)?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(ontology_pr, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    Ok(())
}
