//! Python bindings for the Neural Bloom Filter workbench.
//!
//! Exposes the classical filters, the one-shot neural memory, episode
//! sampling, and the command runner that backs the CLI.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nbf_core::cli::{parse_config_str, run_command, Command, RunContext};
use nbf_core::diffcore::ParamStore;
use nbf_core::evalbench::CalibratedModel;
use nbf_core::item::Item;
use nbf_core::metatrain::{AnyModel, ModelConfig, ModelMemory};
use nbf_core::tasks::{sample_episode as sample_episode_rs, DatasetSource, TaskSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Items cross the boundary as str (byte-string keys) or list[float]
/// (dense vectors).
#[derive(FromPyObject)]
enum PyItem {
    #[pyo3(transparent)]
    Text(String),
    #[pyo3(transparent)]
    Vector(Vec<f64>),
}

impl From<PyItem> for Item {
    fn from(value: PyItem) -> Self {
        match value {
            PyItem::Text(s) => Item::from_str(&s),
            PyItem::Vector(v) => Item::Vector(v),
        }
    }
}

fn item_to_py(py: Python<'_>, item: &Item) -> PyObject {
    match item {
        Item::Bytes(b) => String::from_utf8_lossy(b).into_py(py),
        Item::Vector(v) => v.clone().into_py(py),
    }
}

/// Bloom sizing m = ceil(n log2(1/eps) log2 e), k = ceil(log2(1/eps)).
#[pyfunction]
fn bloom_size_for(n: usize, epsilon: f64) -> PyResult<(u64, u32)> {
    nbf_core::filters::bloom_size_for(n, epsilon).map_err(value_err)
}

/// Information-theoretic lower bound n log2(1/eps) in bits.
#[pyfunction]
fn optimal_space_bound(n: usize, epsilon: f64) -> PyResult<f64> {
    nbf_core::filters::optimal_space_bound(n, epsilon).map_err(value_err)
}

/// Analytical Bloom false-positive rate (1 - e^{-kn/m})^k.
#[pyfunction]
fn analytical_fpr(m: u64, n: usize, k: u32) -> f64 {
    nbf_core::filters::analytical_fpr(m, n, k)
}

#[pyclass]
struct BloomFilter {
    inner: nbf_core::filters::BloomFilter,
}

#[pymethods]
impl BloomFilter {
    #[new]
    #[pyo3(signature = (n, epsilon, seed = 0))]
    fn new(n: usize, epsilon: f64, seed: u64) -> PyResult<Self> {
        Ok(BloomFilter {
            inner: nbf_core::filters::BloomFilter::for_config(n, epsilon, seed)
                .map_err(value_err)?,
        })
    }

    fn insert(&mut self, item: PyItem) {
        self.inner.insert(&Item::from(item).key_bytes());
    }

    fn query(&self, item: PyItem) -> bool {
        self.inner.query(&Item::from(item).key_bytes())
    }

    #[getter]
    fn bit_count(&self) -> u64 {
        self.inner.bit_count()
    }

    #[getter]
    fn hash_count(&self) -> u32 {
        self.inner.hash_count()
    }

    fn to_bytes(&self, py: Python<'_>) -> PyObject {
        pyo3::types::PyBytes::new_bound(py, &self.inner.to_bytes()).into()
    }

    #[staticmethod]
    fn from_bytes(bytes: &[u8]) -> PyResult<Self> {
        Ok(BloomFilter {
            inner: nbf_core::filters::BloomFilter::from_bytes(bytes).map_err(value_err)?,
        })
    }
}

#[pyclass]
struct CuckooFilter {
    inner: nbf_core::filters::CuckooFilter,
}

#[pymethods]
impl CuckooFilter {
    #[new]
    #[pyo3(signature = (n, epsilon, seed = 0))]
    fn new(n: usize, epsilon: f64, seed: u64) -> PyResult<Self> {
        Ok(CuckooFilter {
            inner: nbf_core::filters::CuckooFilter::for_config(n, epsilon, seed)
                .map_err(value_err)?,
        })
    }

    /// Returns False when displacement gives up (capacity exceeded).
    fn insert(&mut self, item: PyItem) -> bool {
        self.inner.insert(&Item::from(item).key_bytes())
    }

    fn query(&self, item: PyItem) -> bool {
        self.inner.query(&Item::from(item).key_bytes())
    }

    fn delete(&mut self, item: PyItem) -> bool {
        self.inner.delete(&Item::from(item).key_bytes())
    }

    #[getter]
    fn table_bits(&self) -> u64 {
        self.inner.table_bits()
    }
}

/// A one-shot familiarity model (NBF, LSTM, or Memory Network) plus its
/// parameters and a written memory.
#[pyclass]
struct FamiliarityModel {
    model: AnyModel,
    params: ParamStore,
    memory: Option<ModelMemory>,
}

#[pymethods]
impl FamiliarityModel {
    /// Build from a model-config JSON document (same schema as the CLI's
    /// "model" section). Fresh parameters unless a checkpoint is given.
    #[new]
    #[pyo3(signature = (config_json, seed = 0, checkpoint = None))]
    fn new(config_json: &str, seed: u64, checkpoint: Option<&str>) -> PyResult<Self> {
        let config: ModelConfig = serde_json::from_str(config_json).map_err(value_err)?;
        let mut model = AnyModel::from_config(&config, seed).map_err(value_err)?;
        model.set_training(false);
        let params = match checkpoint {
            Some(path) => {
                ParamStore::load_from_path(std::path::Path::new(path)).map_err(value_err)?
            }
            None => model.init_params(seed.wrapping_add(1)),
        };
        Ok(FamiliarityModel {
            model,
            params,
            memory: None,
        })
    }

    /// One-shot write of a storage set.
    fn write_set(&mut self, items: Vec<PyItem>) -> PyResult<()> {
        let items: Vec<Item> = items.into_iter().map(Item::from).collect();
        self.memory = Some(
            self.model
                .store_set(&self.params, &items, false)
                .map_err(runtime_err)?,
        );
        Ok(())
    }

    /// Familiarity logit for one query against the written set.
    fn query_logit(&self, item: PyItem) -> PyResult<f64> {
        let memory = self
            .memory
            .as_ref()
            .ok_or_else(|| runtime_err("write_set must run before queries"))?;
        self.model
            .query_logit(&self.params, memory, &Item::from(item))
            .map_err(runtime_err)
    }

    /// Membership decision at threshold tau.
    #[pyo3(signature = (item, tau = 0.0))]
    fn query(&self, item: PyItem, tau: f64) -> PyResult<bool> {
        Ok(self.query_logit(item)? >= tau)
    }

    /// State size in bits at the declared precision.
    #[pyo3(signature = (precision_bits = 32))]
    fn state_bits(&self, precision_bits: u32) -> PyResult<u64> {
        let memory = self
            .memory
            .as_ref()
            .ok_or_else(|| runtime_err("write_set must run before accounting"))?;
        Ok(memory.value_count() as u64 * precision_bits as u64)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.params.value_count()
    }

    fn save_checkpoint(&self, path: &str) -> PyResult<()> {
        self.params
            .save_to_path(std::path::Path::new(path))
            .map_err(runtime_err)
    }

    /// Composite membership check with a backup filter built over a stored
    /// set: (decisions for queries, total_bits, n_false_negatives).
    #[pyo3(signature = (items, queries, alpha = 0.01, tau = 0.0, precision_bits = 32))]
    fn composite_check(
        &self,
        items: Vec<PyItem>,
        queries: Vec<PyItem>,
        alpha: f64,
        tau: f64,
        precision_bits: u32,
    ) -> PyResult<(Vec<bool>, u64, usize)> {
        let items: Vec<Item> = items.into_iter().map(Item::from).collect();
        let queries: Vec<Item> = queries.into_iter().map(Item::from).collect();
        let calibrated =
            CalibratedModel::new(self.model.clone(), self.params.clone(), tau, precision_bits)
                .map_err(runtime_err)?;
        let composite = nbf_core::evalbench::build_composite(&calibrated, &items, alpha / 2.0, 0)
            .map_err(runtime_err)?;
        let decisions = queries
            .iter()
            .map(|q| composite.query(q))
            .collect::<Result<Vec<_>, _>>()
            .map_err(runtime_err)?;
        Ok((
            decisions,
            composite.total_bits(),
            composite.n_false_negatives(),
        ))
    }
}

/// Sample one episode from a task-spec JSON document; returns
/// (storage, queries, labels).
#[pyfunction]
#[pyo3(signature = (task_json, seed = 0))]
fn sample_episode(
    py: Python<'_>,
    task_json: &str,
    seed: u64,
) -> PyResult<(Vec<PyObject>, Vec<PyObject>, Vec<bool>)> {
    let spec: TaskSpec = serde_json::from_str(task_json).map_err(value_err)?;
    let source = DatasetSource::from_spec(&spec.source).map_err(value_err)?;
    let mut rng = nbf_core::rng::chacha(seed, 0);
    let episode = sample_episode_rs(&mut rng, &spec, &source).map_err(runtime_err)?;
    Ok((
        episode.storage.iter().map(|i| item_to_py(py, i)).collect(),
        episode.queries.iter().map(|i| item_to_py(py, i)).collect(),
        episode.labels,
    ))
}

/// Run a workbench command (train/eval/sweep/bench/compare/gen-data) with a
/// config JSON document; artifacts land in out_dir.
#[pyfunction]
#[pyo3(signature = (command, config_json, out_dir, seed = None, workers = 1))]
fn run(
    command: &str,
    config_json: &str,
    out_dir: &str,
    seed: Option<u64>,
    workers: usize,
) -> PyResult<()> {
    let command = match command {
        "train" => Command::Train,
        "eval" => Command::Eval,
        "sweep" => Command::Sweep,
        "bench" => Command::Bench,
        "compare" => Command::Compare,
        "gen-data" => Command::GenData,
        other => return Err(value_err(format!("unknown command {other:?}"))),
    };
    let (config, hash) = parse_config_str(config_json, &[], seed).map_err(value_err)?;
    let ctx = RunContext {
        out_dir: out_dir.into(),
        workers: workers.max(1),
    };
    run_command(command, &config, &hash, &ctx).map_err(runtime_err)
}

#[pymodule]
fn nbf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bloom_size_for, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_space_bound, m)?)?;
    m.add_function(wrap_pyfunction!(analytical_fpr, m)?)?;
    m.add_function(wrap_pyfunction!(sample_episode, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<BloomFilter>()?;
    m.add_class::<CuckooFilter>()?;
    m.add_class::<FamiliarityModel>()?;
    Ok(())
}
