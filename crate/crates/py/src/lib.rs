//! Python bindings for the `wfcolor` simulator.
//!
//! Colors cross the boundary as `(a, b)` tuples for the pair protocols and as
//! plain integers for `slow5`/`fast5`; processes that never returned map to
//! `None`.

use std::fmt::Display;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wfcolor::analysis::{self, AuditReport};
use wfcolor::cointoss;
use wfcolor::engine::Execution;
use wfcolor::model::{self, IdAssignment};
use wfcolor::protocols::Color;
use wfcolor::schedulers::{self, Scheduler, SchedulerDescriptor};

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn color_to_py(py: Python<'_>, c: Option<Color>) -> PyResult<Py<PyAny>> {
    Ok(match c {
        None => py.None(),
        Some(Color::Pair(a, b)) => (a, b).into_pyobject(py)?.into_any().unbind(),
        Some(Color::Scalar(c)) => c.into_pyobject(py)?.into_any().unbind(),
    })
}

/// An undirected connected graph.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: Arc<model::Graph>,
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        Ok(PyGraph { inner: Arc::new(model::Graph::cycle(n).map_err(value_err)?) })
    }

    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph { inner: Arc::new(model::Graph::from_edges(n, edges).map_err(value_err)?) })
    }

    #[staticmethod]
    #[pyo3(signature = (n, max_degree, extra_edges, seed=0))]
    fn random_bounded_degree(n: usize, max_degree: usize, extra_edges: usize, seed: u64) -> PyResult<Self> {
        let g = model::Graph::random_bounded_degree(n, max_degree, extra_edges, seed).map_err(value_err)?;
        Ok(PyGraph { inner: Arc::new(g) })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn max_degree(&self) -> usize {
        self.inner.max_degree()
    }

    fn neighbors(&self, p: usize) -> PyResult<Vec<usize>> {
        if p >= self.inner.node_count() {
            return Err(value_err(format!("unknown node {p}")));
        }
        Ok(self.inner.neighbors(p).to_vec())
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn is_cycle(&self) -> bool {
        self.inner.is_cycle()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("Graph({})", self.inner)
    }
}

/// A finished run together with the inputs that produced it.
#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: wfcolor::Trace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn protocol(&self) -> String {
        self.inner.header.protocol.to_string()
    }

    #[getter]
    fn ids(&self) -> Vec<u64> {
        self.inner.header.ids.clone()
    }

    #[getter]
    fn sched(&self) -> String {
        self.inner.header.sched.clone()
    }

    #[getter]
    fn outputs(&self, py: Python<'_>) -> PyResult<Vec<Py<PyAny>>> {
        self.inner.outcome.outputs.iter().map(|&c| color_to_py(py, c)).collect()
    }

    #[getter]
    fn activations(&self) -> Vec<u32> {
        self.inner.outcome.activations.clone()
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.inner.outcome.terminated
    }

    #[getter]
    fn tstar(&self) -> Option<u64> {
        self.inner.outcome.tstar
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.outcome.steps
    }

    #[getter]
    fn max_activations(&self) -> u32 {
        self.inner.outcome.max_activations()
    }

    /// Activated set of every step, in order.
    fn schedule(&self) -> Vec<Vec<usize>> {
        self.inner.steps.iter().map(|s| s.activated.clone()).collect()
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Ok(PyTrace { inner: wfcolor::Trace::read_jsonl(text.as_bytes()).map_err(value_err)? })
    }

    /// Re-executes the recorded inputs.
    fn replay(&self) -> PyResult<Self> {
        Ok(PyTrace { inner: self.inner.replay().map_err(value_err)? })
    }

    /// Every audit applicable to this trace, as `{name: passed}`.
    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for r in audits(&self.inner).map_err(value_err)? {
            d.set_item(r.audit.clone(), r.pass())?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(protocol={}, n={}, steps={}, terminated={})",
            self.inner.header.protocol,
            self.inner.node_count(),
            self.inner.outcome.steps,
            self.inner.outcome.terminated
        )
    }
}

fn audits(tr: &wfcolor::Trace) -> Result<Vec<AuditReport>, analysis::AnalysisError> {
    use wfcolor::Protocol::*;
    let g = &tr.header.graph;
    let mut out = vec![
        analysis::check_proper_coloring(g, &tr.outcome.outputs),
        analysis::check_palette(&tr.outcome.outputs, tr.header.protocol, g.max_degree()),
    ];
    match tr.header.protocol {
        Slow6 => {
            out.push(analysis::activation_bound_audit(tr)?);
            out.push(analysis::parity_audit(tr)?);
            out.push(analysis::sets_ab_exclude_audit(tr)?);
            out.push(analysis::ab_monotone_audit(tr)?);
        }
        Slow5 => {
            out.push(analysis::activation_bound_audit(tr)?);
            out.push(analysis::stop_rule_audit(tr)?);
        }
        Fast5 => out.push(analysis::xhat_coloring_audit(tr)?),
        DeltaSq => {}
    }
    Ok(out)
}

fn assignment(graph: &model::Graph, ids: Vec<u64>) -> PyResult<IdAssignment> {
    IdAssignment::infer(graph, ids).map_err(value_err)
}

/// Runs `protocol` on `graph` with identifiers `ids` under the scheduler
/// descriptor `sched` (e.g. `"sync"`, `"rr"`, `"rand:0.5:7"`).
#[pyfunction]
#[pyo3(signature = (protocol, graph, ids, sched="sync", horizon=None, seed=0))]
fn run(
    protocol: &str,
    graph: &PyGraph,
    ids: Vec<u64>,
    sched: &str,
    horizon: Option<u64>,
    seed: u64,
) -> PyResult<PyTrace> {
    let protocol: wfcolor::Protocol = protocol.parse().map_err(value_err)?;
    let ids = assignment(&graph.inner, ids)?;
    let desc: SchedulerDescriptor = sched.parse().map_err(value_err)?;
    let n = graph.inner.node_count();
    let horizon = horizon.unwrap_or_else(|| wfcolor::engine::default_horizon(protocol, n, &desc));
    let sched = Scheduler::new(desc, n).map_err(value_err)?;
    let mut ex = Execution::new(graph.inner.clone(), ids, protocol).map_err(value_err)?.with_seed(seed);
    Ok(PyTrace { inner: ex.run(&sched, horizon).map_err(value_err)? })
}

#[pyfunction]
#[pyo3(signature = (graph, bound=None, seed=0))]
fn random_unique_ids(graph: &PyGraph, bound: Option<u64>, seed: u64) -> PyResult<Vec<u64>> {
    let bound = bound.unwrap_or_else(|| model::default_id_bound(graph.inner.node_count()));
    Ok(model::random_unique_ids(&graph.inner, bound, seed).map_err(value_err)?.ids)
}

#[pyfunction]
fn monotone_chain_ids(n: usize) -> PyResult<Vec<u64>> {
    Ok(model::monotone_chain_ids(n).map_err(value_err)?.ids)
}

#[pyfunction]
#[pyo3(signature = (graph, k, seed=0))]
fn proper_coloring_ids(graph: &PyGraph, k: u64, seed: u64) -> PyResult<Vec<u64>> {
    Ok(model::proper_coloring_ids(&graph.inner, k, seed).map_err(value_err)?.ids)
}

#[pyfunction]
fn cv_reduce(x: u64, y: u64) -> u64 {
    cointoss::cv_reduce(x, y)
}

#[pyfunction]
fn contraction(x: u64) -> u64 {
    cointoss::contraction(x)
}

#[pyfunction]
fn logstar_steps(x: u64) -> PyResult<u32> {
    cointoss::logstar_steps(x).map_err(value_err)
}

/// `[(name, checked, passed)]` for the default property suites.
#[pyfunction]
fn lemma_suite() -> Vec<(String, u64, bool)> {
    cointoss::lemma_suite().into_iter().map(|r| (r.name.to_string(), r.checked, r.passed())).collect()
}

/// Explores every schedule of a ring of at most five nodes.
#[pyfunction]
fn exhaustive_check<'py>(py: Python<'py>, protocol: &str, ids: Vec<u64>, bound: u32) -> PyResult<Bound<'py, PyDict>> {
    let protocol: wfcolor::Protocol = protocol.parse().map_err(value_err)?;
    let graph = Arc::new(model::Graph::cycle(ids.len()).map_err(value_err)?);
    let ids = assignment(&graph, ids)?;
    let r = py.detach(|| schedulers::exhaustive_check(&graph, &ids, protocol, bound)).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("explored", r.explored)?;
    d.set_item("max_activations", r.max_activations)?;
    d.set_item("safety_violations", r.safety_violations.len())?;
    d.set_item("bound_violations", r.bound_violations.len())?;
    d.set_item("pass", r.pass)?;
    Ok(d)
}

/// Hill-climbing search for a schedule maximizing activations on a ring.
/// Returns `(max_activations, schedule)`.
#[pyfunction]
#[pyo3(signature = (protocol, ids, budget=1000, seed=0))]
fn worst_case(
    py: Python<'_>,
    protocol: &str,
    ids: Vec<u64>,
    budget: usize,
    seed: u64,
) -> PyResult<(u32, Vec<Vec<usize>>)> {
    let protocol: wfcolor::Protocol = protocol.parse().map_err(value_err)?;
    let graph = Arc::new(model::Graph::cycle(ids.len()).map_err(value_err)?);
    let ids = assignment(&graph, ids)?;
    let found = py.detach(|| schedulers::worst_case_search(&graph, &ids, protocol, budget, seed)).map_err(value_err)?;
    let sets = match found.descriptor {
        SchedulerDescriptor::Replay { sets, .. } => sets,
        _ => Vec::new(),
    };
    Ok((found.max_activations, sets))
}

#[pymodule]
fn pywfcolor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(random_unique_ids, m)?)?;
    m.add_function(wrap_pyfunction!(monotone_chain_ids, m)?)?;
    m.add_function(wrap_pyfunction!(proper_coloring_ids, m)?)?;
    m.add_function(wrap_pyfunction!(cv_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(contraction, m)?)?;
    m.add_function(wrap_pyfunction!(logstar_steps, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_suite, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_check, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case, m)?)?;
    Ok(())
}
