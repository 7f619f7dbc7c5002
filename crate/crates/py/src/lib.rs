//! Python bindings for the brownshift library: grid paths, local-time
//! measures, the balancing allocation, the shift constructions, and the
//! exact discrete matching oracle.

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use brownshift::allocation::{balance_forward, balancing_discrepancy, BalanceResult};
use brownshift::measures::{
    additive_functional, local_time_at, local_time_zero, CumulativeMeasure, TargetMeasure,
};
use brownshift::path_engine::{simulate_two_sided, GridPath};
use brownshift::point_matching::{match_forward, verify_exact, PointConfig};
use brownshift::shifts::{
    atom_probability, atom_splitting, bertoin_le_jan, bertoin_le_jan_tail_sample,
    excursion_reflection, inverse_local_time_shift, non_stopping, ShiftConfig, ShiftOutcome,
    ShiftStatus,
};

fn to_py_err(e: brownshift::Error) -> PyErr {
    match e {
        brownshift::Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        brownshift::Error::OutOfWindow { .. } => PyIndexError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A two-sided path sampled on the grid `k * dt`, `B_0 = 0`.
#[pyclass(name = "GridPath", frozen)]
struct PyGridPath {
    inner: GridPath,
}

#[pymethods]
impl PyGridPath {
    /// Simulate a two-sided Brownian path. Horizons are in time units; the
    /// same `(seed, replicate)` always reproduces the same path.
    #[staticmethod]
    #[pyo3(signature = (dt, neg_horizon, pos_horizon, seed, replicate=0))]
    fn simulate(
        dt: f64,
        neg_horizon: f64,
        pos_horizon: f64,
        seed: u64,
        replicate: u64,
    ) -> PyResult<Self> {
        let inner = simulate_two_sided(dt, pos_horizon, neg_horizon, seed, replicate)
            .map_err(to_py_err)?;
        Ok(PyGridPath { inner })
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    /// Inclusive index window `(lo, hi)`.
    fn window(&self) -> (i64, i64) {
        self.inner.window()
    }

    /// Path value at grid index `k`.
    fn value(&self, k: i64) -> PyResult<f64> {
        self.inner
            .get(k)
            .ok_or_else(|| PyIndexError::new_err(format!("index {k} outside window")))
    }

    /// All values from the window start to the window end.
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Re-index the path so grid point `k` becomes the new origin, with
    /// values re-based so the new origin value is zero.
    fn shift_recenter(&self, k: i64) -> PyResult<PyGridPath> {
        Ok(PyGridPath { inner: self.inner.shift_recenter(k).map_err(to_py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        let (lo, hi) = self.inner.window();
        format!("GridPath(dt={}, window=({lo}, {hi}))", self.inner.dt())
    }
}

/// A nonnegative measure on the grid given by its cumulative function:
/// `cum(t) = mass((0, t])` for `t >= 0` and `-mass([t, 0))` for `t < 0`.
#[pyclass(name = "CumulativeMeasure", frozen)]
struct PyCumulativeMeasure {
    inner: CumulativeMeasure,
}

#[pymethods]
impl PyCumulativeMeasure {
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn window(&self) -> (i64, i64) {
        self.inner.window()
    }

    /// Cumulative value at grid index `k`.
    fn cum_at(&self, k: i64) -> PyResult<f64> {
        if !self.inner.contains(k) {
            return Err(PyIndexError::new_err(format!("index {k} outside window")));
        }
        Ok(self.inner.cum_at(k))
    }

    /// Mass of the half-open interval `(s, t]` (grid indices, `s <= t`).
    fn mass(&self, s: i64, t: i64) -> PyResult<f64> {
        if !self.inner.contains(s) || !self.inner.contains(t) {
            return Err(PyIndexError::new_err("interval outside window"));
        }
        Ok(self.inner.mass(s, t))
    }

    /// The full cumulative vector, window start to window end.
    fn cum(&self) -> Vec<f64> {
        self.inner.cum().to_vec()
    }

    fn __repr__(&self) -> String {
        let (lo, hi) = self.inner.window();
        format!("CumulativeMeasure(dt={}, window=({lo}, {hi}))", self.inner.dt())
    }
}

/// Outcome of one shift construction on one path.
#[pyclass(name = "ShiftOutcome", frozen)]
struct PyShiftOutcome {
    inner: ShiftOutcome,
    dt: f64,
}

#[pymethods]
impl PyShiftOutcome {
    #[getter]
    fn construction(&self) -> &'static str {
        self.inner.construction.as_str()
    }

    /// True when the construction matched within the horizon cap.
    #[getter]
    fn matched(&self) -> bool {
        matches!(self.inner.status, ShiftStatus::Matched)
    }

    /// Grid index of `T`, or None when censored.
    #[getter]
    fn t_index(&self) -> Option<i64> {
        self.inner.t_index
    }

    /// `T` in time units, or None when censored.
    #[getter]
    fn t(&self) -> Option<f64> {
        self.inner.t_time(self.dt)
    }

    /// Path value at `T`, or None when censored.
    #[getter]
    fn b_t(&self) -> Option<f64> {
        self.inner.b_t
    }

    /// Local time at zero accumulated over `[0, T]` (signed for `T < 0`).
    #[getter]
    fn ell0_to_t(&self) -> Option<f64> {
        self.inner.ell0_to_t
    }

    /// Forward horizon (grid index) of the final window searched.
    #[getter]
    fn horizon(&self) -> i64 {
        self.inner.horizon
    }

    #[getter]
    fn extensions_used(&self) -> u32 {
        self.inner.extensions_used
    }

    fn __repr__(&self) -> String {
        format!(
            "ShiftOutcome(construction={:?}, matched={}, t={:?})",
            self.inner.construction.as_str(),
            matches!(self.inner.status, ShiftStatus::Matched),
            self.inner.t_time(self.dt),
        )
    }
}

fn shift_config(
    dt: f64,
    bandwidth: Option<f64>,
    base_horizon: f64,
    max_horizon: f64,
) -> PyResult<ShiftConfig> {
    let bw = bandwidth.unwrap_or_else(|| dt.sqrt());
    ShiftConfig::new(dt, bw, base_horizon, max_horizon).map_err(to_py_err)
}

/// Local time of the path at level `x`, as a cumulative measure on the grid.
#[pyfunction(name = "local_time_at")]
#[pyo3(signature = (path, x, bandwidth=None))]
fn py_local_time_at(
    path: &PyGridPath,
    x: f64,
    bandwidth: Option<f64>,
) -> PyResult<PyCumulativeMeasure> {
    let bw = bandwidth.unwrap_or_else(|| path.inner.dt().sqrt());
    let inner = local_time_at(&path.inner, x, bw).map_err(to_py_err)?;
    Ok(PyCumulativeMeasure { inner })
}

/// Local time of the path at zero.
#[pyfunction(name = "local_time_zero")]
#[pyo3(signature = (path, bandwidth=None))]
fn py_local_time_zero(path: &PyGridPath, bandwidth: Option<f64>) -> PyResult<PyCumulativeMeasure> {
    let bw = bandwidth.unwrap_or_else(|| path.inner.dt().sqrt());
    let inner = local_time_zero(&path.inner, bw).map_err(to_py_err)?;
    Ok(PyCumulativeMeasure { inner })
}

/// The target-weighted additive functional `l^nu`: mix of local times at the
/// atoms of `nu` plus the occupation integral of its density part. `nu` is
/// given in the inline syntax, e.g. `"atoms:1=0.5;density:uniform,-1,1,0.5"`.
#[pyfunction(name = "additive_functional")]
#[pyo3(signature = (path, nu, bandwidth=None))]
fn py_additive_functional(
    path: &PyGridPath,
    nu: &str,
    bandwidth: Option<f64>,
) -> PyResult<PyCumulativeMeasure> {
    let target = TargetMeasure::parse(nu).map_err(to_py_err)?;
    let bw = bandwidth.unwrap_or_else(|| path.inner.dt().sqrt());
    let inner = additive_functional(&path.inner, &target, bw).map_err(to_py_err)?;
    Ok(PyCumulativeMeasure { inner })
}

/// First grid index `t > s` where the source measure accumulated since `s`
/// is balanced by the target measure, or None when the window runs out.
#[pyfunction(name = "balance_forward")]
#[pyo3(signature = (xi, eta, s, tol=0.0))]
fn py_balance_forward(
    xi: &PyCumulativeMeasure,
    eta: &PyCumulativeMeasure,
    s: i64,
    tol: f64,
) -> PyResult<Option<i64>> {
    match balance_forward(&xi.inner, &eta.inner, s, tol).map_err(to_py_err)? {
        BalanceResult::Matched { at } => Ok(Some(at)),
        BalanceResult::Censored { .. } => Ok(None),
    }
}

/// Relative error between the mass transported into `(target_lo, target_hi]`
/// by the balancing rule and the target measure of that interval.
#[pyfunction(name = "balancing_discrepancy")]
fn py_balancing_discrepancy(
    xi: &PyCumulativeMeasure,
    eta: &PyCumulativeMeasure,
    target_lo: i64,
    target_hi: i64,
) -> PyResult<f64> {
    balancing_discrepancy(&xi.inner, &eta.inner, (target_lo, target_hi), 0).map_err(to_py_err)
}

/// Run one shift construction on a freshly simulated path and return the
/// outcome. `construction` is one of `bertoin_le_jan`, `inverse_local_time`,
/// `atom_splitting`, `atom_probability`, `non_stopping`,
/// `excursion_reflection`; `param` is the construction-specific number
/// (level `r`, auxiliary level `y`, atom probability `p`, or level `x`).
#[pyfunction(name = "run_shift")]
#[pyo3(signature = (construction, dt, seed, replicate=0, nu="atoms:1=1", param=None,
                    bandwidth=None, base_horizon=8.0, max_horizon=1000.0))]
#[allow(clippy::too_many_arguments)]
fn py_run_shift(
    construction: &str,
    dt: f64,
    seed: u64,
    replicate: u64,
    nu: &str,
    param: Option<f64>,
    bandwidth: Option<f64>,
    base_horizon: f64,
    max_horizon: f64,
) -> PyResult<PyShiftOutcome> {
    let cfg = shift_config(dt, bandwidth, base_horizon, max_horizon)?;
    let target = TargetMeasure::parse(nu).map_err(to_py_err)?;
    let outcome = match construction {
        "bertoin_le_jan" | "blj" => bertoin_le_jan(&target, &cfg, seed, replicate),
        "inverse_local_time" | "ilt" => {
            inverse_local_time_shift(param.unwrap_or(1.0), &cfg, seed, replicate)
        }
        "atom_splitting" => atom_splitting(&target, param.unwrap_or(-1.0), &cfg, seed, replicate),
        "atom_probability" => atom_probability(param.unwrap_or(0.5), &cfg, seed, replicate),
        "non_stopping" => non_stopping(param.unwrap_or(1.0), &cfg, seed, replicate),
        "excursion_reflection" => excursion_reflection(&cfg, seed, replicate),
        other => {
            return Err(PyValueError::new_err(format!("unknown construction: {other}")));
        }
    }
    .map_err(to_py_err)?;
    Ok(PyShiftOutcome { inner: outcome, dt })
}

/// Streaming tail sample for the first-crossing construction: returns
/// `(t_index, ell0)` where `t_index` is None when censored at the horizon
/// cap and `ell0` is the local time at zero accumulated up to the match or
/// the horizon.
#[pyfunction(name = "tail_sample")]
#[pyo3(signature = (dt, seed, replicate=0, nu="atoms:1=1", bandwidth=None,
                    base_horizon=8.0, max_horizon=1000.0))]
fn py_tail_sample(
    dt: f64,
    seed: u64,
    replicate: u64,
    nu: &str,
    bandwidth: Option<f64>,
    base_horizon: f64,
    max_horizon: f64,
) -> PyResult<(Option<i64>, f64)> {
    let cfg = shift_config(dt, bandwidth, base_horizon, max_horizon)?;
    let target = TargetMeasure::parse(nu).map_err(to_py_err)?;
    let sample = bertoin_le_jan_tail_sample(&target, &cfg, seed, replicate).map_err(to_py_err)?;
    Ok((sample.t_index, sample.ell0))
}

/// Exact matching oracle on finite point sets: smallest `t >= s` with equal
/// positive counts of source and target points in `[s, t]`, or None.
#[pyfunction(name = "match_points")]
fn py_match_points(xi: Vec<i64>, eta: Vec<i64>, s: i64) -> PyResult<Option<i64>> {
    let cfg = PointConfig::new(xi, eta).map_err(to_py_err)?;
    Ok(match_forward(&cfg, s))
}

/// Run the exact oracle over every source point and check the count
/// identity, minimality, and injectivity. Returns
/// `(pairs, unmatched, exact)`.
#[pyfunction(name = "verify_point_matching")]
fn py_verify_point_matching(
    xi: Vec<i64>,
    eta: Vec<i64>,
) -> PyResult<(Vec<(i64, i64)>, Vec<i64>, bool)> {
    let cfg = PointConfig::new(xi, eta).map_err(to_py_err)?;
    let report = verify_exact(&cfg, None).map_err(to_py_err)?;
    Ok((report.pairs, report.unmatched, report.exact))
}

#[pymodule]
fn brownshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridPath>()?;
    m.add_class::<PyCumulativeMeasure>()?;
    m.add_class::<PyShiftOutcome>()?;
    m.add_function(wrap_pyfunction!(py_local_time_at, m)?)?;
    m.add_function(wrap_pyfunction!(py_local_time_zero, m)?)?;
    m.add_function(wrap_pyfunction!(py_additive_functional, m)?)?;
    m.add_function(wrap_pyfunction!(py_balance_forward, m)?)?;
    m.add_function(wrap_pyfunction!(py_balancing_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_shift, m)?)?;
    m.add_function(wrap_pyfunction!(py_tail_sample, m)?)?;
    m.add_function(wrap_pyfunction!(py_match_points, m)?)?;
    m.add_function(wrap_pyfunction!(py_verify_point_matching, m)?)?;
    Ok(())
}
