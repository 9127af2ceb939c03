//! Python bindings. Build with
//! `cargo build -p hinsim-py --release --features extension-module`
//! and copy `target/release/libhinsim_py.so` to `hinsim_py.so` on the import path.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use hinsim::eval as metrics;
use hinsim::hin::{load_graph_dir, synth_apc};
use hinsim::model::forward_all;
use hinsim::train::{self, Dataset, TrainConfig};
use hinsim::{Aggregator, Error, ErrorKind, HinGraph, MetaPath, ModelConfig, ModelParams, NodeId, PathSimEngine};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Usage => PyValueError::new_err(e.to_string()),
        ErrorKind::Data => PyIOError::new_err(e.to_string()),
        ErrorKind::Numeric => PyArithmeticError::new_err(e.to_string()),
    }
}

type Scored = Vec<(String, f64)>;

#[pyclass(frozen, module = "hinsim_py")]
struct Graph {
    inner: Arc<HinGraph>,
}

impl Graph {
    fn node(&self, id: &str) -> PyResult<NodeId> {
        self.inner.find_node(id).ok_or_else(|| PyValueError::new_err(format!("unknown node `{id}`")))
    }

    fn named(&self, scored: Vec<(NodeId, f64)>) -> Scored {
        scored.into_iter().map(|(v, s)| (self.inner.external_id(v).to_string(), s)).collect()
    }
}

#[pymethods]
impl Graph {
    /// Reads `nodes.tsv`, `edges.tsv` and `schema.json` from a directory.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Graph { inner: Arc::new(load_graph_dir(&dir).map_err(py_err)?) })
    }

    /// Seeded author/paper/venue graph.
    #[staticmethod]
    #[pyo3(signature = (nodes, seed=0))]
    fn synth(nodes: usize, seed: u64) -> PyResult<Self> {
        Ok(Graph { inner: Arc::new(synth_apc(nodes, seed).map_err(py_err)?) })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn nodes_of_type(&self, ty: &str) -> PyResult<Vec<String>> {
        let t = self
            .inner
            .schema()
            .node_type_id(ty)
            .ok_or_else(|| PyValueError::new_err(format!("unknown node type `{ty}`")))?;
        Ok(self.inner.nodes_of_type(t).iter().map(|&v| self.inner.external_id(v).to_string()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.num_nodes(), self.inner.num_edges())
    }
}

/// Exact scores for one symmetric meta-path.
#[pyclass(frozen, module = "hinsim_py")]
struct PathSim {
    graph: Py<Graph>,
    path: MetaPath,
}

impl PathSim {
    fn with<R>(&self, py: Python<'_>, f: impl FnOnce(&Graph, &PathSimEngine) -> PyResult<R>) -> PyResult<R> {
        let g = self.graph.bind(py).get();
        let engine = PathSimEngine::new(&g.inner, &self.path).map_err(py_err)?;
        f(g, &engine)
    }
}

#[pymethods]
impl PathSim {
    #[new]
    fn new(graph: Py<Graph>, metapath: &str, py: Python<'_>) -> PyResult<Self> {
        let g = &graph.bind(py).get().inner;
        let path = MetaPath::parse(metapath, g.schema()).map_err(py_err)?;
        // rejects asymmetric paths up front
        PathSimEngine::new(g, &path).map_err(py_err)?;
        Ok(PathSim { graph, path })
    }

    fn score(&self, py: Python<'_>, x: &str, y: &str) -> PyResult<f64> {
        self.with(py, |g, e| e.score(g.node(x)?, g.node(y)?).map_err(py_err))
    }

    /// Nonzero entries of the query's row.
    fn row(&self, py: Python<'_>, x: &str) -> PyResult<Scored> {
        self.with(py, |g, e| Ok(g.named(e.row(g.node(x)?).map_err(py_err)?)))
    }

    #[pyo3(signature = (x, k=10, include_self=false))]
    fn topk(&self, py: Python<'_>, x: &str, k: usize, include_self: bool) -> PyResult<Scored> {
        self.with(py, |g, e| Ok(g.named(e.topk(g.node(x)?, k, include_self).map_err(py_err)?.entries)))
    }
}

#[pyclass(module = "hinsim_py")]
struct Model {
    params: ModelParams,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { params: ModelParams::load(&path).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (graph, d=32, slots=2, layers=2, aggregator="topt", seed=0))]
    fn init(graph: &Graph, d: usize, slots: usize, layers: usize, aggregator: &str, seed: u64) -> PyResult<Self> {
        let config = ModelConfig {
            d,
            slots,
            layers,
            aggregator: Aggregator::parse(aggregator).map_err(py_err)?,
            ..ModelConfig::default()
        };
        Ok(Model { params: ModelParams::init(graph.inner.schema(), config, seed).map_err(py_err)? })
    }

    /// Trains on a dataset directory written by `hinsim make-dataset`.
    /// Returns the best model and the graph stored with the dataset.
    #[staticmethod]
    #[pyo3(signature = (dataset, epochs=10, lr=1e-3, d=32, slots=2, layers=2, seed=0))]
    fn train(
        dataset: PathBuf,
        epochs: usize,
        lr: f64,
        d: usize,
        slots: usize,
        layers: usize,
        seed: u64,
    ) -> PyResult<(Self, Graph)> {
        let (g, ds) = Dataset::load(&dataset).map_err(py_err)?;
        let cfg = TrainConfig {
            epochs,
            lr_max: lr,
            seed,
            model: ModelConfig { d, slots, layers, ..ModelConfig::default() },
            ..TrainConfig::default()
        };
        let out = train::train(&g, &ds, &cfg).map_err(py_err)?;
        Ok((Model { params: out.best }, Graph { inner: Arc::new(g) }))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.params.save(&path).map_err(py_err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Predicted scores from the query to every node of its type.
    fn forward_all(&self, graph: &Graph, query: &str) -> PyResult<Scored> {
        let q = graph.node(query)?;
        Ok(graph.named(forward_all(&graph.inner, q, &self.params).map_err(py_err)?))
    }

    #[pyo3(signature = (graph, query, k=10, include_self=false))]
    fn topk(&self, graph: &Graph, query: &str, k: usize, include_self: bool) -> PyResult<Scored> {
        let q = graph.node(query)?;
        let mut scored: Vec<_> = forward_all(&graph.inner, q, &self.params)
            .map_err(py_err)?
            .into_iter()
            .filter(|&(v, _)| include_self || v != q)
            .collect();
        hinsim::util::sort_ranked(&mut scored);
        scored.truncate(k);
        Ok(graph.named(scored))
    }
}

#[pyfunction]
fn rmse(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&pred, &truth).map_err(py_err)
}

/// nDCG@k of a ranking of ids against continuous relevance (missing ids count as 0).
#[pyfunction]
#[pyo3(signature = (ranking, relevance, k=10))]
fn ndcg(ranking: Vec<String>, relevance: HashMap<String, f64>, k: usize) -> f64 {
    let mut ids: HashMap<&str, NodeId> = HashMap::new();
    for r in ranking.iter().map(String::as_str).chain(relevance.keys().map(String::as_str)) {
        let n = NodeId(ids.len() as u32);
        ids.entry(r).or_insert(n);
    }
    let rel = relevance.iter().map(|(id, &v)| (ids[id.as_str()], v)).collect();
    let order: Vec<NodeId> = ranking.iter().map(|r| ids[r.as_str()]).collect();
    metrics::ndcg_at_k(&order, &rel, k)
}

#[pymodule]
fn hinsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<PathSim>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    Ok(())
}
