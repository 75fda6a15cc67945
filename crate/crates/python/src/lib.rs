//! Python bindings for the person-name tagger: synthetic corpus building,
//! training, checkpoint I/O, prediction, evaluation, and the gradient
//! self-check.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use nametag_core::data::{
    build_dataset, generate_synthetic_corpus, load_dataset, tokenize, PipelineConfig,
    SyntheticSpec,
};
use nametag_core::evaluation::{evaluate, extract_spans};
use nametag_core::layers::{gradcheck_dims, gradient_check, Architecture, Dims};
use nametag_core::training::{
    load_checkpoint, save_checkpoint, train_model, ModelCheckpoint, TrainConfig,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn parse_arch(arch: &str) -> PyResult<Architecture> {
    arch.parse().map_err(value_err)
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match value {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

/// A trained tagger checkpoint.
#[pyclass]
struct Checkpoint {
    inner: ModelCheckpoint,
}

#[pymethods]
impl Checkpoint {
    /// Architecture name: "word" or "wordchar".
    #[getter]
    fn architecture(&self) -> &'static str {
        self.inner.config.architecture.as_str()
    }

    /// Per-epoch mean training loss.
    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.inner.train_loss_history.clone()
    }

    /// Extract person names from one utterance. Returns a list of
    /// {"text", "start", "end"} dicts with token indices.
    fn predict(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let tokens = tokenize(text);
        let tags = self.inner.predict_tags(&tokens).map_err(value_err)?;
        let list = PyList::empty(py);
        for span in extract_spans(&tokens, &tags) {
            let dict = PyDict::new(py);
            dict.set_item("text", span.text)?;
            dict.set_item("start", span.start)?;
            dict.set_item("end", span.end)?;
            list.append(dict)?;
        }
        list.into_py_any(py)
    }

    /// Per-token labels ("O", "B-PER", "I-PER") for one utterance.
    fn predict_tags(&self, text: &str) -> PyResult<Vec<&'static str>> {
        let tokens = tokenize(text);
        let tags = self.inner.predict_tags(&tokens).map_err(value_err)?;
        Ok(tags.into_iter().map(|t| t.as_str()).collect())
    }

    /// Evaluate on a JSONL test set; returns the full report as a dict.
    fn evaluate(&self, py: Python<'_>, test_path: PathBuf) -> PyResult<Py<PyAny>> {
        let test = load_dataset(&test_path).map_err(io_err)?;
        let report = evaluate(&self.inner, &test).map_err(value_err)?;
        let value: serde_json::Value =
            serde_json::from_str(&report.to_json()).map_err(value_err)?;
        json_to_py(py, &value)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(io_err)
    }
}

/// Generate a synthetic corpus and write train/test JSONL splits plus the
/// generated name pool and templates into `out_dir`. Returns
/// `(n_train, n_test)`.
#[pyfunction]
#[pyo3(signature = (
    out_dir,
    countries = 10,
    names_per_country = 100,
    n_templates = 120,
    test_fraction = 0.2,
    seed = 42,
    allow_nameless = false,
))]
fn build_synthetic_data(
    out_dir: PathBuf,
    countries: usize,
    names_per_country: usize,
    n_templates: usize,
    test_fraction: f64,
    seed: u64,
    allow_nameless: bool,
) -> PyResult<(usize, usize)> {
    let spec = SyntheticSpec {
        n_templates,
        n_names_per_country: names_per_country,
        countries,
        rng_seed: seed,
    };
    let (templates, pool) = generate_synthetic_corpus(&spec).map_err(value_err)?;
    let config = PipelineConfig {
        test_fraction,
        seed,
        allow_nameless,
    };
    let (split, _report) = build_dataset(&pool, &templates, &config).map_err(value_err)?;
    std::fs::create_dir_all(&out_dir).map_err(io_err)?;
    nametag_core::data::write_name_pool(&out_dir.join("names.csv"), &pool).map_err(io_err)?;
    nametag_core::data::write_templates(&out_dir.join("templates.jsonl"), &templates)
        .map_err(io_err)?;
    nametag_core::data::write_dataset(&out_dir.join("train.jsonl"), &split.train)
        .map_err(io_err)?;
    nametag_core::data::write_dataset(&out_dir.join("test.jsonl"), &split.test).map_err(io_err)?;
    Ok((split.train.len(), split.test.len()))
}

/// Train a tagger on a JSONL dataset and return the checkpoint.
#[pyfunction]
#[pyo3(signature = (
    train_path,
    arch = "wordchar",
    epochs = 30,
    batch_size = 32,
    lr = 1e-3,
    seed = 42,
    dev_path = None,
    word_dim = 64,
    char_dim = 16,
    char_hidden = 20,
    word_hidden = 50,
    max_word_len = 25,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    train_path: PathBuf,
    arch: &str,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
    dev_path: Option<PathBuf>,
    word_dim: usize,
    char_dim: usize,
    char_hidden: usize,
    word_hidden: usize,
    max_word_len: usize,
) -> PyResult<Checkpoint> {
    let data = load_dataset(&train_path).map_err(io_err)?;
    let dev = dev_path
        .as_deref()
        .map(Path::to_path_buf)
        .map(|p| load_dataset(&p))
        .transpose()
        .map_err(io_err)?;
    let mut config = TrainConfig::new(parse_arch(arch)?);
    config.epochs = epochs;
    config.batch_size = batch_size;
    config.lr = lr;
    config.seed = seed;
    config.dims = Dims {
        word_dim,
        char_dim,
        char_hidden,
        word_hidden,
    };
    config.max_word_len = max_word_len;
    let ckpt = train_model(&config, &data, dev.as_deref()).map_err(value_err)?;
    Ok(Checkpoint { inner: ckpt })
}

/// Load a checkpoint written by `train` or the CLI.
#[pyfunction]
#[pyo3(signature = (path, arch = None))]
fn load(path: PathBuf, arch: Option<&str>) -> PyResult<Checkpoint> {
    let expected = arch.map(parse_arch).transpose()?;
    let inner = load_checkpoint(&path, expected).map_err(io_err)?;
    Ok(Checkpoint { inner })
}

/// Finite-difference gradient check over both architectures; returns the
/// max relative error.
#[pyfunction]
#[pyo3(signature = (seed = 42))]
fn gradcheck(seed: u64) -> PyResult<f64> {
    let dims = gradcheck_dims();
    let mut worst = 0.0f64;
    for arch in [Architecture::Word, Architecture::WordChar] {
        worst = worst.max(gradient_check(arch, dims, seed).map_err(value_err)?);
    }
    Ok(worst)
}

/// Tokenize one utterance the way the training pipeline does.
#[pyfunction]
#[pyo3(name = "tokenize")]
fn tokenize_py(text: &str) -> Vec<String> {
    tokenize(text)
}

#[pymodule]
fn nametag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(build_synthetic_data, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize_py, m)?)?;
    Ok(())
}
