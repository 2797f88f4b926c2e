//! Python bindings: Rado triples, forms, multiplicative functions, Folner
//! families, grid witnesses, rotation experiments and the experiment runner.

use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use pretlab_core::equations::{self, RadoTriple as CoreTriple};
use pretlab_core::experiment::{self, ExperimentConfig, Format};
use pretlab_core::folner::{self, FolnerSpec};
use pretlab_core::gridwitness::{self, CaseKind, CaseTag, GridParams};
use pretlab_core::multfun::{self, DirichletCharacter, MultiplicativeFunction as CoreFunction};
use pretlab_core::numeric::UnitComplex;
use pretlab_core::quadforms::{self, BinaryQuadraticForm as CoreForm};
use pretlab_core::rotation::{self, Arc, ArcSet, FiniteProbSpace, RotationSystem};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> PyResult<T> {
    serde_json::from_str(s).map_err(err)
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (s,))
}

/// A Rado triple (a, b, c) with its class.
#[pyclass(frozen, module = "pretlab")]
struct RadoTriple {
    inner: CoreTriple,
}

#[pymethods]
impl RadoTriple {
    #[new]
    fn new(a: u64, b: u64, c: u64) -> PyResult<Self> {
        Ok(Self {
            inner: equations::classify_rado(a, b, c).map_err(err)?,
        })
    }

    #[getter]
    fn coefficients(&self) -> (u64, u64, u64) {
        (self.inner.a, self.inner.b, self.inner.c)
    }

    #[getter]
    fn class_name(&self) -> String {
        format!("{:?}", self.inner.class)
    }

    /// The three forms as ((alpha, beta, gamma), coordinate).
    fn forms(&self) -> PyResult<Vec<((i64, i64, i64), String)>> {
        let ft = equations::forms_for(&self.inner).map_err(err)?;
        Ok(ft
            .forms
            .iter()
            .zip(ft.map)
            .map(|(f, c)| {
                let [a, b, g] = f.coefficients();
                ((a, b, g), format!("{c:?}"))
            })
            .collect())
    }

    fn solution(&self, k: u64, m: u64, n: u64) -> PyResult<(i128, i128, i128)> {
        let s = equations::solution(&self.inner, k, m, n).map_err(err)?;
        Ok((s.x, s.y, s.z))
    }

    fn __repr__(&self) -> String {
        format!("RadoTriple({}, {}, {}, {:?})", self.inner.a, self.inner.b, self.inner.c, self.inner.class)
    }
}

/// "AC", "BC", "APlusB" or "NotRado".
#[pyfunction]
fn classify_rado(a: u64, b: u64, c: u64) -> String {
    match equations::classify_rado(a, b, c) {
        Ok(t) => format!("{:?}", t.class),
        Err(_) => "NotRado".into(),
    }
}

/// P(m, n) = alpha m^2 + beta m n + gamma n^2.
#[pyclass(frozen, module = "pretlab")]
struct BinaryQuadraticForm {
    inner: CoreForm,
}

#[pymethods]
impl BinaryQuadraticForm {
    #[new]
    fn new(alpha: i64, beta: i64, gamma: i64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreForm::new(alpha, beta, gamma).map_err(err)?,
        })
    }

    #[getter]
    fn coefficients(&self) -> (i64, i64, i64) {
        let [a, b, g] = self.inner.coefficients();
        (a, b, g)
    }

    fn discriminant(&self) -> i128 {
        self.inner.discriminant()
    }

    fn is_irreducible(&self) -> bool {
        self.inner.is_irreducible()
    }

    fn eval(&self, m: i64, n: i64) -> i128 {
        self.inner.eval_i128(m as i128, n as i128)
    }

    /// Number of n mod r with P(1, n) = 0 mod r.
    fn omega(&self, r: u64) -> u64 {
        quadforms::omega(&self.inner, r)
    }

    fn omega_partial_sum(&self, x: u64) -> PyResult<f64> {
        quadforms::omega_partial_sum(&self.inner, x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("BinaryQuadraticForm({})", self.inner)
    }
}

/// Completely multiplicative f: N -> S^1 given by a JSON descriptor.
#[pyclass(frozen, module = "pretlab")]
struct MultiplicativeFunction {
    inner: CoreFunction,
}

#[pymethods]
impl MultiplicativeFunction {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner: CoreFunction = from_json(s)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Lift of the index-th character mod q with value e(fill) at primes
    /// dividing q.
    #[staticmethod]
    #[pyo3(signature = (q, index, fill = 0.0))]
    fn character_lift(q: u64, index: usize, fill: f64) -> PyResult<Self> {
        let chi = DirichletCharacter::new(q, index).map_err(err)?;
        Ok(Self {
            inner: CoreFunction::lift(chi, UnitComplex::from_turns(fill)),
        })
    }

    #[staticmethod]
    fn archimedean(t: f64) -> Self {
        Self {
            inner: CoreFunction::archimedean(t),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    /// f(n) in turns, in [0, 1).
    fn eval(&self, n: BigUint) -> PyResult<f64> {
        Ok(self.inner.eval_big(&n).map_err(err)?.turns())
    }

    /// D(f, chi n^{it}; a, b) for the index-th character mod q.
    #[pyo3(signature = (q = 1, index = 0, t = 0.0, a = 1.0, b = 1e5))]
    fn distance(&self, q: u64, index: usize, t: f64, a: f64, b: f64) -> PyResult<f64> {
        let chi = DirichletCharacter::new(q, index).map_err(err)?;
        multfun::distance_to_target(&self.inner, &chi, t, a, b).map_err(err)
    }
}

/// Elements of a Folner family given as JSON, e.g. {"kind": "phi_r", "r": 3}.
#[pyfunction]
#[pyo3(signature = (spec, samples = 50, seed = 0))]
fn folner_elements(spec: &str, samples: usize, seed: u64) -> PyResult<(String, Vec<BigUint>)> {
    let spec: FolnerSpec = from_json(spec)?;
    let (mode, elems) = folner::elements(&spec, samples, seed).map_err(err)?;
    Ok((format!("{mode:?}"), elems.into_iter().map(|e| e.value).collect()))
}

/// (n_shift, value, chord) of Q_{delta,L}.
#[pyfunction]
fn q_delta_l(delta: f64, l: u64) -> PyResult<(u64, BigUint, f64)> {
    let q = folner::find_q_delta_l(delta, l, gridwitness::QDL_SEARCH_CAP).map_err(err)?;
    Ok((q.n_shift, q.value, q.chord))
}

/// Grid witnesses at the smallest admissible levels, as parsed JSON records.
#[pyfunction]
#[pyo3(signature = (case, a, b, c, delta = 0.5, count = 1, samples = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn grid_witnesses<'py>(
    py: Python<'py>,
    case: &str,
    a: u64,
    b: u64,
    c: u64,
    delta: f64,
    count: usize,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = CaseKind::parse(case).ok_or_else(|| PyValueError::new_err(format!("unknown case {case:?}")))?;
    let tag = CaseTag::new(kind, a, b, c).map_err(err)?;
    let lv = gridwitness::smallest_levels(&tag).map_err(err)?;
    let (_, combos) = gridwitness::element_combinations(&tag, &lv, folner::ENUMERATION_CAP, samples, seed).map_err(err)?;
    let qdl = folner::find_q_delta_l(delta, lv.l, gridwitness::QDL_SEARCH_CAP).map_err(err)?;
    let mut records = Vec::new();
    for q in combos.into_iter().take(count) {
        let params = GridParams::with_qdl(tag, delta, lv, q, qdl.clone()).map_err(err)?;
        let witness = gridwitness::construct_v(&params).map_err(err)?;
        records.push(gridwitness::WitnessRecord { params, witness });
    }
    to_py(py, &records)
}

/// mu(A ∩ T_x^{-1} A ∩ T_y^{-1} A ∩ T_z^{-1} A) for arcs given as
/// (center, half_width) in turns.
#[pyfunction]
fn joint_measure(functions: Vec<PyRef<'_, MultiplicativeFunction>>, arcs: Vec<(f64, f64)>, x: u64, y: u64, z: u64) -> PyResult<f64> {
    let sys = RotationSystem::new(functions.iter().map(|f| f.inner.clone()).collect()).map_err(err)?;
    let arcs = arcs
        .into_iter()
        .map(|(c, h)| Arc::new(c, h))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    rotation::joint_measure(&sys, &ArcSet::new(arcs).map_err(err)?, x, y, z).map_err(err)
}

/// (lhs, rhs, holds) of the Chu inequality; partitions are cell labels per atom.
#[pyfunction]
fn chu_check(weights: Vec<f64>, f: Vec<f64>, partitions: Vec<Vec<usize>>) -> PyResult<(f64, f64, bool)> {
    let r = rotation::chu_check(&FiniteProbSpace { weights, f, partitions }).map_err(err)?;
    Ok((r.lhs, r.rhs, r.holds))
}

/// (single, double, holds) for an even sequence given in turns at 0..=lN.
#[pyfunction]
fn bilinear_defect(values: Vec<f64>, v_n: f64, l1: i64, l2: i64, n: u64) -> PyResult<(f64, f64, bool)> {
    let vals: Vec<UnitComplex> = values.into_iter().map(UnitComplex::from_turns).collect();
    let r = rotation::bilinear_defect(&vals, UnitComplex::from_turns(v_n), l1, l2, n).map_err(err)?;
    Ok((r.single, r.double, r.holds))
}

/// Runs a CLI experiment; returns (summary, rendered output).
#[pyfunction]
#[pyo3(signature = (command, params = "{}", seed = 0, format = "csv"))]
fn run_experiment(command: &str, params: &str, seed: u64, format: &str) -> PyResult<(String, String)> {
    let mut config = ExperimentConfig::new(command, from_json(params)?);
    config.seed = seed;
    config.format = match format {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    };
    let run = experiment::run(&config).map_err(err)?;
    let bytes = experiment::render(&run).map_err(err)?;
    Ok((run.report.summary, String::from_utf8(bytes).map_err(err)?))
}

#[pymodule]
fn pretlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiment::VERSION)?;
    m.add_class::<RadoTriple>()?;
    m.add_class::<BinaryQuadraticForm>()?;
    m.add_class::<MultiplicativeFunction>()?;
    m.add_function(wrap_pyfunction!(classify_rado, m)?)?;
    m.add_function(wrap_pyfunction!(folner_elements, m)?)?;
    m.add_function(wrap_pyfunction!(q_delta_l, m)?)?;
    m.add_function(wrap_pyfunction!(grid_witnesses, m)?)?;
    m.add_function(wrap_pyfunction!(joint_measure, m)?)?;
    m.add_function(wrap_pyfunction!(chu_check, m)?)?;
    m.add_function(wrap_pyfunction!(bilinear_defect, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
