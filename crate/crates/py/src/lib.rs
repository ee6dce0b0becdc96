//! Python bindings for `wic-core`.
//!
//! Scores and labels cross the boundary as plain lists; corpora and trained
//! models stay on the Rust side behind `Corpus` and `Model` handles.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wic_core::datasets::{load_mclwic, load_superglue_wic, split_by_lemma, write_mclwic};
use wic_core::encoding::{build_encoder, known_encoders, ToyOptions};
use wic_core::evaluation::write_submission;
use wic_core::synthetic::{generate, SyntheticConfig};
use wic_core::training::Checkpoint;
use wic_core::{CharSpan, CorpusSource, ErrorClass, Head, HeadConfig, SplitConfig, TrainConfig, WicPair};

create_exception!(wic, WicError, PyException, "Base class for toolkit errors.");
create_exception!(wic, ConfigError, WicError, "Invalid configuration or argument.");
create_exception!(wic, DataError, WicError, "Unreadable, malformed or misaligned data.");
create_exception!(wic, NumericError, WicError, "Runtime or numeric failure.");

fn to_py(e: wic_core::Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Config => ConfigError::new_err(msg),
        ErrorClass::Data => DataError::new_err(msg),
        ErrorClass::Runtime => NumericError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for wic_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// A sentence pair with one marked target span in each sentence.
#[pyclass(name = "Pair", module = "wic", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPair {
    inner: WicPair,
}

#[pymethods]
impl PyPair {
    #[new]
    #[pyo3(signature = (id, lemma, sentence1, span1, sentence2, span2, label=None, pos="NOUN"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: String,
        lemma: String,
        sentence1: String,
        span1: (usize, usize),
        sentence2: String,
        span2: (usize, usize),
        label: Option<bool>,
        pos: &str,
    ) -> PyResult<Self> {
        let inner = WicPair {
            id,
            lemma,
            pos: pos.to_string(),
            sentence1,
            sentence2,
            span1: CharSpan::new(span1.0, span1.1),
            span2: CharSpan::new(span2.0, span2.1),
            label,
        };
        inner.validate().py_err()?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn lemma(&self) -> &str {
        &self.inner.lemma
    }

    #[getter]
    fn pos(&self) -> &str {
        &self.inner.pos
    }

    #[getter]
    fn sentence1(&self) -> &str {
        &self.inner.sentence1
    }

    #[getter]
    fn sentence2(&self) -> &str {
        &self.inner.sentence2
    }

    #[getter]
    fn span1(&self) -> (usize, usize) {
        (self.inner.span1.start, self.inner.span1.end)
    }

    #[getter]
    fn span2(&self) -> (usize, usize) {
        (self.inner.span2.start, self.inner.span2.end)
    }

    #[getter]
    fn label(&self) -> Option<bool> {
        self.inner.label
    }

    /// The two marked target strings.
    fn targets(&self) -> (Option<&str>, Option<&str>) {
        (self.inner.target1(), self.inner.target2())
    }

    fn __repr__(&self) -> String {
        format!("Pair(id={:?}, lemma={:?}, label={:?})", self.inner.id, self.inner.lemma, self.inner.label)
    }
}

/// An ordered collection of pairs with unique ids.
#[pyclass(name = "Corpus", module = "wic", frozen)]
struct PyCorpus {
    inner: wic_core::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[new]
    fn new(pairs: Vec<PyRef<'_, PyPair>>) -> PyResult<Self> {
        let pairs = pairs.iter().map(|p| p.inner.clone()).collect();
        Ok(Self {
            inner: wic_core::Corpus::new(pairs, CorpusSource::Synthetic).py_err()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, index: isize) -> PyResult<PyPair> {
        let len = self.inner.len() as isize;
        let i = if index < 0 { index + len } else { index };
        if !(0..len).contains(&i) {
            return Err(pyo3::exceptions::PyIndexError::new_err("pair index out of range"));
        }
        Ok(PyPair {
            inner: self.inner.pairs()[i as usize].clone(),
        })
    }

    fn pairs(&self) -> Vec<PyPair> {
        self.inner.iter().map(|p| PyPair { inner: p.clone() }).collect()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(String::from).collect()
    }

    /// Gold labels in corpus order (`None` for unlabeled pairs).
    fn labels(&self) -> Vec<Option<bool>> {
        self.inner.iter().map(|p| p.label).collect()
    }

    fn lemmas(&self) -> Vec<String> {
        let mut lemmas: Vec<String> = self.inner.lemmas().into_iter().map(String::from).collect();
        lemmas.sort();
        lemmas
    }

    /// Writes MCL-WiC data (and gold, when given) files.
    #[pyo3(signature = (data, gold=None))]
    fn write_mclwic(&self, data: PathBuf, gold: Option<PathBuf>) -> PyResult<()> {
        write_mclwic(&self.inner, &data, gold.as_deref()).py_err()
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} pairs, source={:?})", self.inner.len(), self.inner.source())
    }
}

/// Reads an MCL-WiC data file and, optionally, its gold file.
#[pyfunction]
#[pyo3(signature = (data, gold=None))]
fn load_mclwic_files(data: PathBuf, gold: Option<PathBuf>) -> PyResult<PyCorpus> {
    Ok(PyCorpus {
        inner: load_mclwic(&data, gold.as_deref()).py_err()?,
    })
}

/// Reads a SuperGLUE WiC JSON-lines file.
#[pyfunction]
fn load_superglue(path: PathBuf) -> PyResult<PyCorpus> {
    Ok(PyCorpus {
        inner: load_superglue_wic(&path).py_err()?,
    })
}

/// Generates a seeded synthetic corpus.
#[pyfunction]
#[pyo3(signature = (pairs=200, seed=0, label_noise=0.0, shared_first_sentence=false))]
fn synthetic(pairs: usize, seed: u64, label_noise: f64, shared_first_sentence: bool) -> PyResult<PyCorpus> {
    let config = SyntheticConfig {
        pairs,
        seed,
        label_noise,
        shared_first_sentence,
        ..SyntheticConfig::default()
    };
    Ok(PyCorpus {
        inner: generate(&config).py_err()?,
    })
}

/// Lemma-disjoint train/validation split.
#[pyfunction]
#[pyo3(name = "split_by_lemma", signature = (corpus, train_fraction=0.975, seed=0))]
fn py_split_by_lemma(corpus: &PyCorpus, train_fraction: f64, seed: u64) -> PyResult<(PyCorpus, PyCorpus)> {
    let config = SplitConfig::new(train_fraction, seed).py_err()?;
    let (train, validation) = split_by_lemma(&corpus.inner, &config).py_err()?;
    Ok((PyCorpus { inner: train }, PyCorpus { inner: validation }))
}

#[pyfunction]
#[pyo3(name = "max_pool")]
fn py_max_pool(vectors: Vec<Vec<f64>>, indices: Vec<usize>) -> PyResult<Vec<f64>> {
    wic_core::max_pool(&vectors, &indices).py_err()
}

/// Cosine-head score of two target vectors.
#[pyfunction]
#[pyo3(signature = (u, v, activation="relu"))]
fn cosine_score(u: Vec<f64>, v: Vec<f64>, activation: &str) -> PyResult<f64> {
    let config: HeadConfig = format!("cosine-{activation}").parse().py_err()?;
    let HeadConfig::Cosine(cosine) = config else {
        unreachable!("parsed a cosine head")
    };
    let embedding = wic_core::PairEmbedding::targets("", u, v);
    wic_core::heads::cosine_forward(&cosine, &embedding).py_err()
}

/// ROC points as `(threshold, tpr, fpr)` tuples in increasing threshold order.
#[pyfunction]
#[pyo3(name = "roc_curve")]
fn py_roc_curve(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Vec<(f64, f64, f64)>> {
    let curve = wic_core::roc_curve(&scores, &labels).py_err()?;
    Ok(curve.points.iter().map(|p| (p.threshold, p.tpr, p.fpr)).collect())
}

/// Youden-J threshold as `(threshold, j_statistic)`.
#[pyfunction]
#[pyo3(name = "youden_threshold")]
fn py_youden_threshold(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    let result = wic_core::calibration::calibrate(&scores, &labels).py_err()?;
    Ok((result.threshold, result.j_statistic))
}

#[pyfunction]
#[pyo3(name = "bce_loss", signature = (prediction, label, clamp_epsilon=1e-7))]
fn py_bce_loss(prediction: f64, label: bool, clamp_epsilon: f64) -> PyResult<f64> {
    wic_core::bce_loss(prediction, label, clamp_epsilon).py_err()
}

/// Accuracy and confusion counts of `(id, label)` predictions against a labeled corpus.
#[pyfunction]
#[pyo3(name = "evaluate")]
fn py_evaluate<'py>(
    py: Python<'py>,
    predictions: Vec<(String, bool)>,
    gold: &PyCorpus,
) -> PyResult<Bound<'py, PyDict>> {
    let report = wic_core::evaluate(&predictions, &gold.inner).py_err()?;
    let dict = PyDict::new(py);
    dict.set_item("accuracy", report.accuracy)?;
    dict.set_item("true_positives", report.true_positives)?;
    dict.set_item("false_positives", report.false_positives)?;
    dict.set_item("true_negatives", report.true_negatives)?;
    dict.set_item("false_negatives", report.false_negatives)?;
    dict.set_item("error_ids", report.error_ids().into_iter().collect::<Vec<_>>())?;
    Ok(dict)
}

/// Writes `(id, label)` predictions in the MCL-WiC submission format.
#[pyfunction]
#[pyo3(name = "write_submission")]
fn py_write_submission(path: PathBuf, predictions: Vec<(String, bool)>) -> PyResult<()> {
    write_submission(&path, &predictions).py_err()
}

#[pyfunction]
#[pyo3(name = "known_encoders")]
fn py_known_encoders() -> Vec<&'static str> {
    known_encoders()
}

/// A trained encoder + head with its decision threshold.
#[pyclass(name = "Model", module = "wic", frozen)]
struct PyModel {
    checkpoint: Checkpoint,
}

#[pymethods]
impl PyModel {
    /// Loads a checkpoint directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            checkpoint: Checkpoint::load(&path).py_err()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.checkpoint.save(&path).py_err()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.checkpoint.threshold()
    }

    #[getter]
    fn head(&self) -> String {
        self.checkpoint.head.to_string()
    }

    /// Validation losses of each check, in order.
    #[getter]
    fn validation_losses(&self) -> Vec<f64> {
        self.checkpoint
            .history
            .iter()
            .flat_map(|h| h.records.iter().map(|r| r.validation_loss))
            .collect()
    }

    /// 1-based index of the restored check.
    #[getter]
    fn best_check(&self) -> Option<usize> {
        self.checkpoint.history.as_ref().map(|h| h.best_check)
    }

    /// `(id, score)` for every pair, in corpus order.
    fn scores(&self, corpus: &PyCorpus) -> PyResult<Vec<(String, f64)>> {
        wic_core::predict_scores(&self.checkpoint, &corpus.inner, &self.checkpoint.train_config).py_err()
    }

    /// `(id, label)` decisions for every pair, in corpus order.
    fn predict(&self, corpus: &PyCorpus) -> PyResult<Vec<(String, bool)>> {
        let threshold = self.checkpoint.threshold();
        Ok(self
            .scores(corpus)?
            .into_iter()
            .map(|(id, s)| (id, wic_core::decide(s, threshold)))
            .collect())
    }
}

/// Trains the toy encoder with the given head and returns the restored best model.
#[pyfunction]
#[pyo3(signature = (
    train,
    validation,
    head="cosine-relu",
    dimension=16,
    learning_rate=1e-2,
    max_epochs=8,
    batch_size=8,
    freeze_encoder=false,
    seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn train_toy(
    py: Python<'_>,
    train: &PyCorpus,
    validation: &PyCorpus,
    head: &str,
    dimension: usize,
    learning_rate: f64,
    max_epochs: usize,
    batch_size: usize,
    freeze_encoder: bool,
    seed: u64,
) -> PyResult<PyModel> {
    let head_config: HeadConfig = head.parse().py_err()?;
    let config = TrainConfig {
        learning_rate,
        max_epochs,
        batch_size,
        freeze_encoder,
        seed,
        ..TrainConfig::default()
    };
    let options = ToyOptions {
        dimension,
        seed,
        ..ToyOptions::default()
    };
    let (train, validation) = (&train.inner, &validation.inner);
    let checkpoint = py
        .detach(|| {
            let encoder = build_encoder("toy", options)?;
            let head = Head::new(head_config, encoder.dimension(), seed)?;
            wic_core::train(encoder, head, train, validation, &config)
        })
        .py_err()?
        .0;
    Ok(PyModel { checkpoint })
}

#[pymodule]
fn wic(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("WicError", py.get_type::<WicError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    m.add_class::<PyPair>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_mclwic_files, m)?)?;
    m.add_function(wrap_pyfunction!(load_superglue, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(py_split_by_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(py_max_pool, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_score, m)?)?;
    m.add_function(wrap_pyfunction!(py_roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(py_youden_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(py_bce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(py_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(py_write_submission, m)?)?;
    m.add_function(wrap_pyfunction!(py_known_encoders, m)?)?;
    m.add_function(wrap_pyfunction!(train_toy, m)?)?;
    Ok(())
}
