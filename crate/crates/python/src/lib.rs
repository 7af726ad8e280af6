//! Python bindings: pairs, method decisions, entropy and HSIC estimates,
//! scenario generation and accuracy / AUC scoring.

use std::path::PathBuf;

use causepair::eval::{roc_auc, weighted_accuracy, DecisionRecord, PerturbKind};
use causepair::igci::BaseMeasure;
use causepair::methods::Method;
use causepair::{Direction, PairSample, ScorePair};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(causepair_py, CausepairError, PyException);

fn err(e: causepair::Error) -> PyErr {
    CausepairError::new_err(e.to_string())
}

fn direction(s: &str) -> PyResult<Direction> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("direction must be 'X->Y', 'Y->X' or '?', got {s:?}")))
}

fn base(s: &str) -> PyResult<BaseMeasure> {
    match s {
        "uniform" => Ok(BaseMeasure::Uniform),
        "gaussian" => Ok(BaseMeasure::Gaussian),
        _ => Err(PyValueError::new_err(format!(
            "base must be 'uniform' or 'gaussian', got {s:?}"
        ))),
    }
}

/// Two aligned series with optional ground truth and weight.
#[pyclass(name = "Pair", module = "causepair_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyPair {
    pub inner: PairSample,
}

#[pymethods]
impl PyPair {
    #[new]
    #[pyo3(signature = (x, y, id = "pair".to_string(), truth = None, weight = 1.0))]
    fn new(x: Vec<f64>, y: Vec<f64>, id: String, truth: Option<&str>, weight: f64) -> PyResult<Self> {
        let mut p = PairSample::new(id, x, y)
            .map_err(err)?
            .with_weight(weight)
            .map_err(err)?;
        if let Some(t) = truth {
            p = p.with_truth(direction(t)?);
        }
        Ok(PyPair { inner: p })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn truth(&self) -> Option<&'static str> {
        self.inner.truth.map(Direction::as_str)
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.inner.weight
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Pair(id={:?}, n={}, truth={:?})",
            self.inner.id,
            self.inner.len(),
            self.truth()
        )
    }
}

/// Scores of both directions; the lower one wins.
#[pyclass(name = "Score", module = "causepair_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyScore {
    #[pyo3(get)]
    pub c_xy: f64,
    #[pyo3(get)]
    pub c_yx: f64,
    #[pyo3(get)]
    pub decision: &'static str,
    #[pyo3(get)]
    pub confidence: f64,
}

impl From<ScorePair> for PyScore {
    fn from(s: ScorePair) -> Self {
        PyScore {
            c_xy: s.c_xy,
            c_yx: s.c_yx,
            decision: s.dir.as_str(),
            confidence: s.confidence,
        }
    }
}

#[pymethods]
impl PyScore {
    fn __repr__(&self) -> String {
        format!(
            "Score(c_xy={}, c_yx={}, decision={:?}, confidence={})",
            self.c_xy, self.c_yx, self.decision, self.confidence
        )
    }
}

/// Every accepted method name.
#[pyfunction]
pub fn method_names() -> Vec<String> {
    causepair::methods::method_names()
}

/// Run one method on one pair.
#[pyfunction]
#[pyo3(signature = (pair, method, seed = 0, base = "uniform"))]
pub fn decide(py: Python<'_>, pair: &PyPair, method: &str, seed: u64, base: &str) -> PyResult<PyScore> {
    let m = Method::parse(method, self::base(base)?).map_err(err)?;
    let p = pair.inner.clone();
    py.detach(move || m.decide(&p, seed)).map(PyScore::from).map_err(err)
}

/// Differential entropy of a sample; `method` is one of 1sp, sp1, 3NN, Gau, ME1, ME2.
#[pyfunction]
#[pyo3(signature = (x, method = "3NN"))]
pub fn entropy(x: Vec<f64>, method: &str) -> PyResult<f64> {
    let m = method.parse().map_err(err)?;
    causepair::entropy::entropy_estimate(&x, m).map_err(err)
}

/// Biased HSIC and its Gamma-approximation p-value. Bandwidths default to
/// the median heuristic.
#[pyfunction]
#[pyo3(signature = (u, v, bandwidth_u = None, bandwidth_v = None))]
pub fn hsic(
    u: Vec<f64>,
    v: Vec<f64>,
    bandwidth_u: Option<f64>,
    bandwidth_v: Option<f64>,
) -> PyResult<(f64, Option<f64>)> {
    use causepair::kernel::{hsic_gamma_pvalue, median_bandwidth};
    let lu = bandwidth_u.map_or_else(|| median_bandwidth(&u), Ok).map_err(err)?;
    let lv = bandwidth_v.map_or_else(|| median_bandwidth(&v), Ok).map_err(err)?;
    let r = hsic_gamma_pvalue(&u, &v, lu, lv).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// Generate `pairs` pairs of `samples` points from a named scenario.
#[pyfunction]
#[pyo3(signature = (scenario, pairs = 100, samples = 1000, seed = 0))]
pub fn simulate(py: Python<'_>, scenario: &str, pairs: usize, samples: usize, seed: u64) -> PyResult<Vec<PyPair>> {
    let cfg = causepair::simgen::scenario_params(scenario).map_err(err)?;
    let out = py
        .detach(move || causepair::simgen::generate_pairs(&cfg, samples, pairs, seed))
        .map_err(err)?;
    Ok(out.into_iter().map(|inner| PyPair { inner }).collect())
}

/// Load a corpus directory (pair files plus pairmeta.txt).
#[pyfunction]
pub fn load_benchmark(dir: PathBuf) -> PyResult<Vec<PyPair>> {
    let pairs = causepair::cep::load_benchmark(&dir).map_err(err)?;
    Ok(pairs.into_iter().map(|inner| PyPair { inner }).collect())
}

#[pyfunction]
pub fn write_corpus(dir: PathBuf, pairs: Vec<PyPair>) -> PyResult<()> {
    let pairs: Vec<PairSample> = pairs.into_iter().map(|p| p.inner).collect();
    causepair::cep::write_corpus(&dir, &pairs).map_err(err)
}

/// Run methods over pairs in parallel. Rows are
/// `(id, method, c_xy, c_yx, decision, confidence, error)`.
#[pyfunction]
#[pyo3(signature = (pairs, methods, perturb = "unperturbed", seed = 0, base = "uniform"))]
#[allow(clippy::type_complexity)]
pub fn run(
    py: Python<'_>,
    pairs: Vec<PyPair>,
    methods: Vec<String>,
    perturb: &str,
    seed: u64,
    base: &str,
) -> PyResult<Vec<(String, String, f64, f64, &'static str, f64, Option<String>)>> {
    let b = self::base(base)?;
    let methods = methods
        .iter()
        .map(|m| Method::parse(m, b))
        .collect::<causepair::Result<Vec<_>>>()
        .map_err(err)?;
    let kind: PerturbKind = perturb.parse().map_err(err)?;
    let pairs: Vec<PairSample> = pairs.into_iter().map(|p| p.inner).collect();
    let rows = py.detach(move || causepair::runner::run_corpus(&pairs, &methods, kind, seed));
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r.id,
                r.method,
                r.score.c_xy,
                r.score.c_yx,
                r.score.dir.as_str(),
                r.score.confidence,
                r.error,
            )
        })
        .collect())
}

fn records(
    truth: &[String],
    decisions: &[String],
    confidences: &[f64],
    weights: Option<Vec<f64>>,
) -> PyResult<Vec<DecisionRecord>> {
    let n = truth.len();
    if decisions.len() != n || confidences.len() != n || weights.as_ref().is_some_and(|w| w.len() != n) {
        return Err(PyValueError::new_err(
            "truth, decisions, confidences and weights must have equal length",
        ));
    }
    (0..n)
        .map(|i| {
            let w = weights.as_ref().map_or(1.0, |w| w[i]);
            Ok(DecisionRecord::new(
                i.to_string(),
                w,
                direction(&truth[i])?,
                direction(&decisions[i])?,
                confidences[i],
            ))
        })
        .collect()
}

/// Weighted accuracy with 68% and 95% Clopper-Pearson intervals.
/// Returns `(accuracy, (lo68, hi68), (lo95, hi95))`.
#[pyfunction]
#[pyo3(signature = (truth, decisions, weights = None))]
#[allow(clippy::type_complexity)]
pub fn accuracy(
    truth: Vec<String>,
    decisions: Vec<String>,
    weights: Option<Vec<f64>>,
) -> PyResult<(f64, (f64, f64), (f64, f64))> {
    let zeros = vec![0.0; truth.len()];
    let recs = records(&truth, &decisions, &zeros, weights)?;
    let a = weighted_accuracy(&recs).map_err(err)?;
    Ok((a.accuracy, a.ci68, a.ci95))
}

/// Weighted ROC AUC with a bootstrap 95% interval: `(auc, (lo, hi))`.
/// Confidence is the signed score margin in favour of X -> Y.
#[pyfunction]
#[pyo3(signature = (truth, decisions, confidences, weights = None, bootstrap = 1000, seed = 0))]
pub fn auc(
    truth: Vec<String>,
    decisions: Vec<String>,
    confidences: Vec<f64>,
    weights: Option<Vec<f64>>,
    bootstrap: usize,
    seed: u64,
) -> PyResult<(f64, (f64, f64))> {
    let recs = records(&truth, &decisions, &confidences, weights)?;
    let r = roc_auc(&recs, bootstrap, seed).map_err(err)?;
    Ok((r.auc, r.ci95))
}

#[pymodule]
fn causepair_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CausepairError", m.py().get_type::<CausepairError>())?;
    m.add_class::<PyPair>()?;
    m.add_class::<PyScore>()?;
    m.add_function(wrap_pyfunction!(method_names, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(hsic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(load_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    Ok(())
}
