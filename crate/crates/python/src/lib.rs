//! Python bindings: problem files, epiderivatives, cones and certificates.
//!
//! Points and directions are accepted as `"2,1"` strings or sequences of
//! ints, floats or rational strings (`"-7/2"`); rationals come back as strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use radepi_core::certificates::{
    basis_select, check_fj_necessary, geometric_from, gordan_alternative, kkt_sufficient_from, AlternativeMatrix,
    FjOptions, GordanOutcome, KktMode, SufficiencyConfig,
};
use radepi_core::cli::{self, ProblemFile};
use radepi_core::cones::{analyze, ConeConfig, SetKind};
use radepi_core::epiderivative::{constraint_epiderivative, objective_epiderivative};
use radepi_core::number::{format_rational, from_f64, parse_rational};
use radepi_core::point::parse_csv;
use radepi_core::{radial_epiderivative, Direction, EpiderivativeValue, Error, EstimatorConfig, Number, Point, Q};

fn err(e: Error) -> PyErr {
    match e {
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rational(item: &Bound<'_, PyAny>) -> PyResult<Q> {
    if let Ok(i) = item.extract::<i64>() {
        return Ok(Q::from_integer(i.into()));
    }
    if let Ok(s) = item.extract::<String>() {
        return parse_rational(&s).map_err(err);
    }
    let f: f64 = item.extract()?;
    from_f64(f).ok_or_else(|| PyValueError::new_err(format!("not a finite number: {f}")))
}

fn coords(obj: &Bound<'_, PyAny>) -> PyResult<Vec<Q>> {
    if let Ok(s) = obj.extract::<String>() {
        return parse_csv(&s).map_err(err);
    }
    obj.try_iter()?.map(|item| rational(&item?)).collect()
}

fn strings(v: &[Q]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// One epiderivative value with its method tag.
#[pyclass(frozen, module = "radepi")]
pub struct EpiValue {
    inner: EpiderivativeValue,
}

#[pymethods]
impl EpiValue {
    /// The value as a float.
    #[getter]
    fn value(&self) -> f64 {
        self.inner.value.to_f64()
    }

    /// The exact rational as `"p/q"`, or `None` for estimates.
    #[getter]
    fn exact(&self) -> Option<String> {
        match &self.inner.value {
            Number::Exact(r) if self.inner.is_exact() => Some(format_rational(r)),
            _ => None,
        }
    }

    #[getter]
    fn is_exact(&self) -> bool {
        self.inner.is_exact()
    }

    /// `exact-rule`, `finite-domain-enumeration` or `estimator`.
    #[getter]
    fn method(&self) -> String {
        let v = serde_json::to_value(&self.inner.method).expect("methods serialize");
        v["method"].as_str().unwrap_or_default().to_string()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("values serialize")
    }

    fn __repr__(&self) -> String {
        match self.exact() {
            Some(r) => format!("EpiValue({r}, {})", self.method()),
            None => format!("EpiValue({}, {})", self.value(), self.method()),
        }
    }
}

#[pyclass(frozen, module = "radepi")]
pub struct Problem {
    file: ProblemFile,
    problem: radepi_core::Problem,
}

impl Problem {
    fn wrap(file: ProblemFile) -> PyResult<Self> {
        let problem = radepi_core::Problem::new(
            file.dimension,
            file.objective.clone(),
            file.constraints.clone(),
            file.domain.clone(),
        )
        .map_err(err)?;
        Ok(Problem { file, problem })
    }

    fn point(&self, obj: &Bound<'_, PyAny>) -> PyResult<Point> {
        let p = Point::new(coords(obj)?);
        self.problem.check_point(&p).map_err(err)?;
        Ok(p)
    }

    fn direction(&self, obj: &Bound<'_, PyAny>) -> PyResult<Direction> {
        let d = Direction::new(coords(obj)?);
        self.problem.check_direction(&d).map_err(err)?;
        Ok(d)
    }

    fn estimator(&self, seed: u64) -> EstimatorConfig {
        EstimatorConfig { seed, ..self.file.estimator.clone().unwrap_or_default() }
    }

    fn cones(&self, samples: Option<usize>, seed: u64) -> ConeConfig {
        ConeConfig {
            estimator: self.estimator(seed),
            samples,
            seed,
            candidates: self.file.directions.clone(),
            ..ConeConfig::default()
        }
    }
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::wrap(cli::parse_problem(text).map_err(err)?)
    }

    /// A path to a problem file, or `"ex1"` / `"ex2"`.
    #[staticmethod]
    fn load(source: &str) -> PyResult<Self> {
        Self::wrap(cli::load_problem(source).map_err(err)?)
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.file.dimension
    }

    #[getter]
    fn constraint_count(&self) -> usize {
        self.file.constraints.len()
    }

    /// Feasible points on finite domains, `None` otherwise.
    fn feasible_points(&self) -> Option<Vec<Vec<String>>> {
        self.problem.feasible_points().map(|s| s.iter().map(|p| strings(&p.0)).collect())
    }

    fn objective_value(&self, point: &Bound<'_, PyAny>) -> PyResult<f64> {
        Ok(self.problem.objective_value(&self.point(point)?).to_f64())
    }

    /// `which`: `"objective"` (restricted to the domain), `"feasible"`
    /// (restricted to the feasible set) or a 0-based constraint index.
    #[pyo3(signature = (point, direction, which = None, seed = 0))]
    fn epiderivative(
        &self,
        point: &Bound<'_, PyAny>,
        direction: &Bound<'_, PyAny>,
        which: Option<&Bound<'_, PyAny>>,
        seed: u64,
    ) -> PyResult<EpiValue> {
        let (x, d) = (self.point(point)?, self.direction(direction)?);
        let cfg = self.estimator(seed);
        let p = &self.problem;
        let inner = match which {
            None => radial_epiderivative(&p.objective, &x, &d, &p.domain, &cfg),
            Some(w) => match (w.extract::<usize>(), w.extract::<String>()) {
                (Ok(i), _) if i < p.constraints.len() => constraint_epiderivative(p, i, &x, &d, &cfg),
                (Ok(i), _) => return Err(PyValueError::new_err(format!("no constraint {i}"))),
                (_, Ok(s)) if s == "objective" => radial_epiderivative(&p.objective, &x, &d, &p.domain, &cfg),
                (_, Ok(s)) if s == "feasible" => objective_epiderivative(p, &x, &d, &cfg),
                _ => return Err(PyValueError::new_err("which must be 'objective', 'feasible' or a constraint index")),
            },
        };
        Ok(EpiValue { inner: inner.map_err(err)? })
    }

    /// Generators of the cone of feasible directions `D(x̄)`.
    #[pyo3(signature = (point, samples = None, seed = 0))]
    fn feasible_directions(&self, point: &Bound<'_, PyAny>, samples: Option<usize>, seed: u64) -> PyResult<Vec<Vec<String>>> {
        let x = self.point(point)?;
        let a = analyze(&self.problem, &x, &self.cones(samples, seed)).map_err(err)?;
        Ok(a.set(SetKind::FeasibleD).directions.iter().map(|d| strings(&d.0)).collect())
    }

    /// Geometric, Fritz John and KKT certificates as a dict.
    #[pyo3(signature = (point, mode = "active", samples = None, seed = 0))]
    fn certify<'py>(
        &self,
        py: Python<'py>,
        point: &Bound<'py, PyAny>,
        mode: &str,
        samples: Option<usize>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mode = match mode {
            "active" => KktMode::Active,
            "all" => KktMode::All,
            other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
        };
        let x = self.point(point)?;
        let cones = self.cones(samples, seed);
        let a = analyze(&self.problem, &x, &cones).map_err(err)?;
        let geometric = geometric_from(&a);
        let d = a.set(SetKind::FeasibleD);
        let basis = if d.is_empty() { Vec::new() } else { basis_select(&d).map_err(err)? };
        let fj = check_fj_necessary(&self.problem, &x, &basis, &cones.estimator, &FjOptions::default()).map_err(err)?;
        let suff = SufficiencyConfig { cones, ..SufficiencyConfig::default() };
        let kkt = kkt_sufficient_from(&self.problem, &a, mode, &suff).map_err(err)?;
        let out = serde_json::json!({
            "global_min_geometric": geometric,
            "fj_necessary": fj,
            "kkt_sufficient": kkt,
        });
        json_to_py(py, &out.to_string())
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({}, n={}, m={})",
            self.file.name.as_deref().unwrap_or("unnamed"),
            self.file.dimension,
            self.file.constraints.len()
        )
    }
}

/// Gordan alternative for a rational matrix: `(1, x)` with `x ≥ 0`, `Ax < 0`,
/// or `(2, v)` with `v ≥ 0`, `v ≠ 0`, `Aᵀv ≥ 0`.
#[pyfunction]
fn gordan(rows: &Bound<'_, PyAny>) -> PyResult<(u8, Vec<String>)> {
    let rows: Vec<Vec<Q>> = rows.try_iter()?.map(|r| coords(&r?)).collect::<PyResult<_>>()?;
    let a = AlternativeMatrix::new(rows).map_err(err)?;
    Ok(match gordan_alternative(&a).map_err(err)? {
        GordanOutcome::System1 { x } => (1, strings(&x)),
        GordanOutcome::System2 { v } => (2, strings(&v)),
    })
}

/// Runs the `radepi` command line; returns `(exit_code, report_json)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, Option<String>) {
    let out = cli::run(std::iter::once("radepi".to_string()).chain(args));
    (out.code, out.report)
}

#[pymodule]
fn radepi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Problem>()?;
    m.add_class::<EpiValue>()?;
    m.add_function(wrap_pyfunction!(gordan, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
