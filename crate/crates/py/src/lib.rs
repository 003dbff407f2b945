//! Python bindings: `BooleanFunction` and `MultilinearFunction` wrappers plus
//! module-level functions mirroring the CLI subcommands. Report structs cross
//! the boundary as plain dicts with the same keys as the CLI JSON payloads.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use bfr_core::{BitPoint, PartialPoint, PiConfig, ScanMode, TruthTable};

fn perr(e: bfr_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(x) => {
            if let Some(i) = x.as_i64() {
                i.into_bound_py_any(py)
            } else if let Some(u) = x.as_u64() {
                u.into_bound_py_any(py)
            } else {
                x.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)
            }
        }
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list: Vec<Bound<'py, PyAny>> =
                items.iter().map(|x| json_to_py(py, x)).collect::<PyResult<_>>()?;
            Ok(PyList::new(py, list)?.into_any())
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            Ok(d.into_any())
        }
    }
}

/// Non-finite floats serialize as None, matching the CLI's JSON output.
fn report<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn partial(n: usize, states: &[i8]) -> PyResult<PartialPoint> {
    if states.len() != n {
        return Err(PyValueError::new_err(format!(
            "expected {n} states, got {}",
            states.len()
        )));
    }
    if states.iter().any(|s| !matches!(s, -1 | 0 | 1)) {
        return Err(PyValueError::new_err("states must be -1 (true), 0 (alive), or +1 (false)"));
    }
    Ok(PartialPoint::from_states(states.to_vec()))
}

fn bitpoint(n: usize, x: u64) -> PyResult<BitPoint> {
    if n > 63 {
        return Err(PyValueError::new_err(format!(
            "index-based points support n <= 63, function has n = {n}"
        )));
    }
    if x >> n != 0 {
        return Err(PyValueError::new_err(format!("index {x:#x} out of range for n = {n}")));
    }
    Ok(BitPoint::from_index(n, x))
}

fn parse_mode(mode: &str) -> PyResult<ScanMode> {
    match mode {
        "fixed" => Ok(ScanMode::Fixed),
        "indep" | "independent" => Ok(ScanMode::Independent),
        other => Err(PyValueError::new_err(format!("unknown mode '{other}' (fixed | indep)"))),
    }
}

/// A 0/1-valued function on the signed cube. Point index convention: bit i
/// set means x_i = -1 (logical true).
#[pyclass(frozen, name = "BooleanFunction")]
struct PyBooleanFunction {
    inner: bfr_core::BooleanFunction,
}

#[pymethods]
impl PyBooleanFunction {
    /// Build from a spec string: maj:n=5, tribes:w=4, parity:n=6, and:n=3,
    /// or:n=3, dict:n=4,i=1, random:n=8,seed=0,bias=0.5, table:path=FILE.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyBooleanFunction { inner: bfr_core::BooleanFunction::from_spec(spec).map_err(perr)? })
    }

    /// Build from a truth table listed in index order; len must be 2^n.
    #[staticmethod]
    fn from_table(bits: Vec<bool>) -> PyResult<Self> {
        if !bits.len().is_power_of_two() {
            return Err(PyValueError::new_err(format!(
                "table length {} is not a power of two",
                bits.len()
            )));
        }
        let n = bits.len().trailing_zeros() as usize;
        let t = TruthTable::from_fn(n, |k| bits[k as usize]).map_err(perr)?;
        Ok(PyBooleanFunction { inner: bfr_core::BooleanFunction::table(t) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn is_monotone(&self) -> bool {
        self.inner.is_monotone()
    }

    fn eval(&self, x: u64) -> PyResult<bool> {
        Ok(self.inner.eval(&bitpoint(self.inner.n(), x)?))
    }

    /// Exact conditional mean on the subcube fixed by `states`.
    fn cond_mean(&self, states: Vec<i8>) -> PyResult<f64> {
        Ok(self.inner.cond_mean(&partial(self.inner.n(), &states)?))
    }

    fn derivative_at(&self, states: Vec<i8>, i: usize) -> PyResult<f64> {
        let p = partial(self.inner.n(), &states)?;
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("coordinate {i} out of range")));
        }
        Ok(self.inner.derivative_at(&p, i))
    }

    fn max_abs_derivative(&self, states: Vec<i8>) -> PyResult<f64> {
        Ok(self.inner.max_abs_derivative(&partial(self.inner.n(), &states)?))
    }

    fn influence_flip(&self, i: usize) -> PyResult<f64> {
        self.inner.influence_flip(i).map_err(perr)
    }

    fn influence_spectral(&self, i: usize) -> PyResult<f64> {
        self.inner.influence_spectral(i).map_err(perr)
    }

    fn influences_flip(&self) -> PyResult<Vec<f64>> {
        self.inner.influences_flip().map_err(perr)
    }

    fn max_influence_flip(&self) -> PyResult<f64> {
        self.inner.max_influence_flip().map_err(perr)
    }

    fn max_influence_spectral(&self) -> PyResult<f64> {
        self.inner.max_influence_spectral().map_err(perr)
    }

    /// Restriction to the subcube fixed by `states`, reindexed onto the
    /// alive coordinates in ascending order.
    fn restricted(&self, states: Vec<i8>) -> PyResult<Self> {
        let p = partial(self.inner.n(), &states)?;
        Ok(PyBooleanFunction { inner: self.inner.restricted(&p) })
    }

    fn negated(&self) -> Self {
        PyBooleanFunction { inner: self.inner.clone().negated() }
    }

    fn to_table(&self) -> PyResult<Vec<bool>> {
        let t = self.inner.to_table().map_err(perr)?;
        Ok((0..t.size()).map(|k| t.get(k as u32)).collect())
    }

    /// Fourier coefficients indexed by subset mask.
    fn fourier(&self) -> PyResult<Vec<f64>> {
        let t = self.inner.to_table().map_err(perr)?;
        Ok(bfr_core::FourierCoefficients::from_table(&t).coeffs().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("<BooleanFunction n={} mean={}>", self.inner.n(), self.inner.mean())
    }
}

/// A multilinear polynomial given by its Fourier coefficients (subset-mask
/// order), the domain of the biased-moment checks.
#[pyclass(frozen, name = "MultilinearFunction")]
struct PyMultilinearFunction {
    inner: bfr_core::MultilinearFunction,
}

#[pymethods]
impl PyMultilinearFunction {
    #[new]
    fn new(n: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        Ok(PyMultilinearFunction { inner: bfr_core::MultilinearFunction::new(n, coeffs).map_err(perr)? })
    }

    #[staticmethod]
    fn from_function(f: PyRef<'_, PyBooleanFunction>) -> PyResult<Self> {
        Ok(PyMultilinearFunction {
            inner: bfr_core::MultilinearFunction::from_boolean(&f.inner).map_err(perr)?,
        })
    }

    /// Standard Gaussian coefficients scaled by 2^(-|S|/2).
    #[staticmethod]
    fn random(n: usize, seed: u64) -> PyResult<Self> {
        let mut rng = bfr_core::rng::root(seed);
        Ok(PyMultilinearFunction {
            inner: bfr_core::MultilinearFunction::random(n, &mut rng).map_err(perr)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn eval(&self, x: u64) -> PyResult<f64> {
        Ok(self.inner.eval(&bitpoint(self.inner.n(), x)?))
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn influence(&self, i: usize) -> PyResult<f64> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("coordinate {i} out of range")));
        }
        Ok(self.inner.influence(i))
    }

    fn l2_squared(&self) -> f64 {
        self.inner.l2_squared()
    }

    /// E[f(X(t))^2] in closed form.
    fn second_moment(&self, t: f64) -> PyResult<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PyValueError::new_err("t must lie in [0, 1]"));
        }
        Ok(self.inner.second_moment_closed(t))
    }

    fn gradient_second_moment(&self, t: f64) -> PyResult<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PyValueError::new_err("t must lie in [0, 1]"));
        }
        Ok(self.inner.gradient_second_moment(t))
    }

    /// Exact E[|f(X(t))|^p] by enumeration.
    fn moment(&self, t: f64, p: f64) -> PyResult<f64> {
        bfr_core::exact_moment(&self.inner, t, p).map_err(perr)
    }

    /// ||f(X(t))||_{2+eps} <= ||f(X(t_upper))||_2 with eps = t_upper - t.
    fn hc_check<'py>(&self, py: Python<'py>, t: f64, t_upper: f64) -> PyResult<Bound<'py, PyAny>> {
        report(py, &bfr_core::hc_check(&self.inner, t, t_upper).map_err(perr)?)
    }

    fn prop51<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyAny>> {
        report(py, &bfr_core::prop51_check(&self.inner, t).map_err(perr)?)
    }

    fn __repr__(&self) -> String {
        format!("<MultilinearFunction n={}>", self.inner.n())
    }
}

/// P[tribes stays non-constant] under the independent 1/w-alive restriction.
#[pyfunction]
fn tribes_survival_formula(w: usize, n: usize) -> PyResult<f64> {
    bfr_core::tribes_survival_formula(w, n).map_err(perr)
}

/// Mean lower bound 2^{-(K + H(delta))/delta} from a KL budget.
#[pyfunction]
fn kl_to_mean(k: f64, delta: f64) -> PyResult<f64> {
    bfr_core::kl_to_mean(k, delta).map_err(perr)
}

/// Restriction survival scan over a grid of alive fractions.
#[pyfunction]
#[pyo3(signature = (f, rho, trials=10_000, seed=0, mode="fixed"))]
fn scan<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    rho: Vec<f64>,
    trials: u64,
    seed: u64,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = parse_mode(mode)?;
    let func = f.inner.clone();
    let rows = py
        .detach(move || bfr_core::scan(&func, &rho, trials, seed, mode))
        .map_err(perr)?;
    report(py, &rows)
}

/// One conditioned-process run; the endpoint is uniform on the preimage.
#[pyfunction]
#[pyo3(signature = (f, seed=0))]
fn run_conditioned<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    report(py, &bfr_core::run_conditioned(&f.inner, seed).map_err(perr)?)
}

/// One controlled-process run with its KL ledger.
#[pyfunction]
#[pyo3(signature = (f, eps, delta, seed=0, complement=false, emit_path=false))]
fn run_controlled<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    eps: f64,
    delta: f64,
    seed: u64,
    complement: bool,
    emit_path: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = PiConfig::new(eps, delta, seed);
    cfg.complement = complement;
    let run = bfr_core::run_controlled(&f.inner, &cfg).map_err(perr)?;
    let mut v = serde_json::to_value(&run).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if !emit_path {
        if let Value::Object(map) = &mut v {
            map.remove("y_path");
            map.remove("x_path");
        }
    }
    json_to_py(py, &v)
}

/// Stopping-time tail and ledger statistics over many runs.
#[pyfunction]
#[pyo3(signature = (f, eps, delta, trials=10_000, seed=0))]
fn stopping_stats<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    eps: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let func = f.inner.clone();
    let stats = py
        .detach(move || bfr_core::stopping_stats(&func, &PiConfig::new(eps, delta, seed), trials))
        .map_err(perr)?;
    report(py, &stats)
}

/// (eps, delta) from an alive fraction, with the side conditions reported.
#[pyfunction]
#[pyo3(signature = (f, rho, p=0.5))]
fn default_parameters<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    rho: f64,
    p: f64,
) -> PyResult<Bound<'py, PyAny>> {
    report(py, &bfr_core::default_parameters(rho, p, &f.inner).map_err(perr)?)
}

/// Exact deterministic decision-tree depth.
#[pyfunction]
fn dt_exact(py: Python<'_>, f: PyRef<'_, PyBooleanFunction>) -> PyResult<usize> {
    let func = f.inner.clone();
    py.detach(move || bfr_core::dt_exact(&func)).map_err(perr)
}

/// Exact block sensitivity at point index `x`: (bs, disjoint blocks).
#[pyfunction]
fn bs_exact(
    py: Python<'_>,
    f: PyRef<'_, PyBooleanFunction>,
    x: u64,
) -> PyResult<(usize, Vec<Vec<usize>>)> {
    let point = bitpoint(f.inner.n(), x)?;
    let func = f.inner.clone();
    let (bs, cert) = py.detach(move || bfr_core::bs_exact(&func, &point)).map_err(perr)?;
    Ok((bs, cert.blocks))
}

/// Random-partition lower-bound estimator for block sensitivity.
#[pyfunction]
#[pyo3(signature = (f, blocks, trials=10_000, seed=0))]
fn bs_partition_estimate<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    blocks: usize,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let func = f.inner.clone();
    let est = py
        .detach(move || bfr_core::bs_partition_estimate(&func, blocks, trials, seed))
        .map_err(perr)?;
    report(py, &est)
}

/// Number of sensitive coordinates at point index `x`.
#[pyfunction]
fn sensitivity(f: PyRef<'_, PyBooleanFunction>, x: u64) -> PyResult<usize> {
    let point = bitpoint(f.inner.n(), x)?;
    bfr_core::sensitivity(&f.inner, &point).map_err(perr)
}

/// mINF(f) * DT(f) >= Var[f]; influence is "flip" or "spectral".
#[pyfunction]
#[pyo3(signature = (f, influence="flip"))]
fn osss_check<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    influence: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = match influence {
        "flip" => bfr_core::InfluenceKind::Flip,
        "spectral" => bfr_core::InfluenceKind::Spectral,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown influence '{other}' (flip | spectral)"
            )))
        }
    };
    let func = f.inner.clone();
    let check = py.detach(move || bfr_core::osss_check(&func, kind)).map_err(perr)?;
    report(py, &check)
}

/// Level-1 diagnostic: |grad f(0)|^2 against alpha^2 ln(e/alpha).
#[pyfunction]
fn level1<'py>(py: Python<'py>, f: PyRef<'_, PyBooleanFunction>) -> PyResult<Bound<'py, PyAny>> {
    let t = f.inner.to_table().map_err(perr)?;
    let c = bfr_core::FourierCoefficients::from_table(&t);
    report(py, &bfr_core::fourier::level1_report(f.inner.mean(), &c.gradient_at_zero()))
}

/// Tail of the running maximum derivative on the continuous clock.
#[pyfunction]
#[pyo3(signature = (f, t, theta, trials=10_000, seed=0))]
fn beta_tail<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    t: f64,
    theta: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let func = f.inner.clone();
    let tail = py.detach(move || bfr_core::beta_tail(&func, t, theta, trials, seed)).map_err(perr)?;
    report(py, &tail)
}

/// Same tail on the discrete clock, up to (1-eps) n reveals.
#[pyfunction]
#[pyo3(signature = (f, eps, theta, trials=10_000, seed=0))]
fn discrete_beta_tail<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    eps: f64,
    theta: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let func = f.inner.clone();
    let tail = py
        .detach(move || bfr_core::discrete_beta_tail(&func, eps, theta, trials, seed))
        .map_err(perr)?;
    report(py, &tail)
}

/// Couple the continuous process to the discrete one at t = 1 - eps/2.
#[pyfunction]
#[pyo3(signature = (f, eps, trials=10_000, seed=0))]
fn couple_to_discrete<'py>(
    py: Python<'py>,
    f: PyRef<'_, PyBooleanFunction>,
    eps: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let func = f.inner.clone();
    let check = py
        .detach(move || bfr_core::couple_to_discrete(&func, eps, trials, seed))
        .map_err(perr)?;
    report(py, &check)
}

/// Boolean functions under random restrictions.
#[pymodule]
mod bfr_py {
    #[pymodule_export]
    use super::{
        beta_tail, bs_exact, bs_partition_estimate, couple_to_discrete, default_parameters,
        discrete_beta_tail, dt_exact, kl_to_mean, level1, osss_check, run_conditioned,
        run_controlled, scan, sensitivity, stopping_stats, tribes_survival_formula,
        PyBooleanFunction, PyMultilinearFunction,
    };
}
