//! Reproducible experiment runs: a command name plus a JSON parameter block
//! resolves to typed parameters, runs, and renders as CSV or JSON with the
//! resolved config in the header.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::equations::{self, EquationError};
use crate::folner::{self, FolnerError, FolnerSpec};
use crate::gridwitness::{self, CaseKind, CaseTag, GridParams, Levels, WitnessError, WitnessRecord};
use crate::multfun::{self, CharacterSpec, DirichletCharacter, MultError, MultiplicativeFunction};
use crate::numeric::Factorization;
use crate::quadforms::{self, BinaryQuadraticForm, FormError};
use crate::rotation::{self, Arc, ArcSet, FactorKind, FiniteProbSpace, Grid, RotationError, RotationSystem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COMMANDS: [&str; 15] = [
    "rado",
    "forms",
    "solve",
    "omega",
    "distance",
    "folner",
    "qdelta",
    "witness",
    "sdelta",
    "mono",
    "recur",
    "conc-lin",
    "conc-quad",
    "factor-crit",
    "chu",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Io: {0}")]
    Io(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Mult(#[from] MultError),
    #[error(transparent)]
    Folner(#[from] FolnerError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

impl ExperimentError {
    /// Usage problems as opposed to domain errors.
    pub fn is_usage(&self) -> bool {
        matches!(self, ExperimentError::InvalidConfig(_))
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn empty_object() -> Value {
    json!({})
}

impl ExperimentConfig {
    pub fn new(command: &str, params: Value) -> Self {
        Self {
            command: command.to_string(),
            params,
            seed: 0,
            output: None,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Short human-readable result.
    pub summary: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Full certificates.
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    pub config: ExperimentConfig,
    pub report: Report,
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("parameter blocks serialize")
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

macro_rules! cells {
    ($($e:expr),* $(,)?) => { vec![$($e.to_string()),*] };
}

fn factored(f: &Factorization) -> String {
    f.factors.iter().map(|(p, e)| format!("{p}^{e}")).collect::<Vec<_>>().join("*")
}

fn character(spec: CharacterSpec) -> Result<DirichletCharacter> {
    Ok(DirichletCharacter::new(spec.modulus, spec.index)?)
}

fn principal() -> CharacterSpec {
    CharacterSpec { modulus: 1, index: 0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    #[serde(default = "one")]
    pub k: u64,
    #[serde(default = "two")]
    pub m: u64,
    #[serde(default = "one")]
    pub n: u64,
}

fn one() -> u64 {
    1
}
fn two() -> u64 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaParams {
    pub form: BinaryQuadraticForm,
    #[serde(default = "default_omega_limit")]
    pub limit: u64,
}

fn default_omega_limit() -> u64 {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceParams {
    pub f: MultiplicativeFunction,
    #[serde(default = "principal")]
    pub chi: CharacterSpec,
    #[serde(default)]
    pub t: f64,
    #[serde(default = "default_from")]
    pub from: f64,
    #[serde(default = "default_to")]
    pub to: f64,
}

fn default_from() -> f64 {
    1.0
}
fn default_to() -> f64 {
    rotation::DISTANCE_TRUNCATION as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FolnerParams {
    pub spec: FolnerSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QDeltaParams {
    pub delta: f64,
    pub l: u64,
    #[serde(default = "default_qdl_cap")]
    pub cap: u64,
    #[serde(default = "default_bits")]
    pub bits: u32,
}

fn default_qdl_cap() -> u64 {
    gridwitness::QDL_SEARCH_CAP
}
fn default_bits() -> u32 {
    folner::CERTIFICATE_BITS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<u64>,
    #[serde(default = "default_witness_delta")]
    pub delta: f64,
    /// Smallest admissible levels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Levels>,
    /// Number of (Q1, Q2, Q3) combinations to construct.
    #[serde(default = "one_usize")]
    pub count: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Verify the records stored in this file instead of constructing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<String>,
}

fn default_witness_delta() -> f64 {
    1.9
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SDeltaParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    #[serde(default = "default_sdelta")]
    pub delta: f64,
    #[serde(default = "default_sdelta_n")]
    pub n: u64,
    /// Cone parameter alpha^2; the triple's default cone when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_sq: Option<u64>,
}

fn default_sdelta() -> f64 {
    0.3
}
fn default_sdelta_n() -> u64 {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub functions: Vec<MultiplicativeFunction>,
    /// Arc half-width in turns.
    #[serde(default = "default_arc")]
    pub delta_i: f64,
    #[serde(default = "default_bound")]
    pub k_max: u64,
    #[serde(default = "default_bound")]
    pub m_max: u64,
    /// Also run the parametrization-free scan up to this bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_bound: Option<u64>,
}

fn default_arc() -> f64 {
    0.1
}
fn default_bound() -> u64 {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub functions: Vec<MultiplicativeFunction>,
    pub arcs: Vec<Arc>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_bound")]
    pub k_max: u64,
    #[serde(default = "default_bound")]
    pub m_max: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

fn default_eps() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcLinParams {
    pub f: MultiplicativeFunction,
    #[serde(default = "principal")]
    pub chi: CharacterSpec,
    #[serde(default)]
    pub t: f64,
    pub q: u64,
    #[serde(default = "one")]
    pub a: u64,
    pub k: u64,
    #[serde(default = "default_conc_n")]
    pub n: u64,
    #[serde(default = "default_truncation")]
    pub truncation: u64,
}

fn default_conc_n() -> u64 {
    10_000
}
fn default_truncation() -> u64 {
    rotation::DISTANCE_TRUNCATION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcQuadParams {
    pub f: MultiplicativeFunction,
    #[serde(default = "principal")]
    pub chi: CharacterSpec,
    #[serde(default)]
    pub t: f64,
    pub form: BinaryQuadraticForm,
    pub q: u64,
    #[serde(default = "one")]
    pub a: u64,
    #[serde(default = "one")]
    pub b: u64,
    pub k: u64,
    #[serde(default = "default_quad_n")]
    pub n: u64,
    #[serde(default = "default_truncation")]
    pub truncation: u64,
}

fn default_quad_n() -> u64 {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCritParams {
    pub f: MultiplicativeFunction,
    pub kind: FactorKind,
    pub r: u64,
    #[serde(default)]
    pub k: u64,
    #[serde(default = "default_factor_n")]
    pub n: u64,
    #[serde(default = "default_factor_samples")]
    pub samples: usize,
}

fn default_factor_n() -> u64 {
    1000
}
fn default_factor_samples() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChuParams {
    #[serde(default = "default_chu_count")]
    pub count: usize,
    #[serde(default = "default_atoms")]
    pub max_atoms: usize,
    #[serde(default = "default_partitions")]
    pub max_partitions: usize,
}

fn default_chu_count() -> usize {
    1000
}
fn default_atoms() -> usize {
    16
}
fn default_partitions() -> usize {
    3
}

/// Runs a config and returns it with defaults filled in, plus the report.
pub fn run(config: &ExperimentConfig) -> Result<Run> {
    let seed = config.seed;
    let (params, report) = match config.command.as_str() {
        "rado" => {
            let p: TripleParams = parse(&config.params)?;
            (to_value(&p), run_rado(&p))
        }
        "forms" => {
            let p: TripleParams = parse(&config.params)?;
            (to_value(&p), run_forms(&p)?)
        }
        "solve" => {
            let p: SolveParams = parse(&config.params)?;
            (to_value(&p), run_solve(&p)?)
        }
        "omega" => {
            let p: OmegaParams = parse(&config.params)?;
            (to_value(&p), run_omega(&p)?)
        }
        "distance" => {
            let p: DistanceParams = parse(&config.params)?;
            (to_value(&p), run_distance(&p)?)
        }
        "folner" => {
            let p: FolnerParams = parse(&config.params)?;
            (to_value(&p), run_folner(&p, seed)?)
        }
        "qdelta" => {
            let p: QDeltaParams = parse(&config.params)?;
            (to_value(&p), run_qdelta(&p)?)
        }
        "witness" => {
            let p: WitnessParams = parse(&config.params)?;
            (to_value(&p), run_witness(&p, seed)?)
        }
        "sdelta" => {
            let p: SDeltaParams = parse(&config.params)?;
            (to_value(&p), run_sdelta(&p)?)
        }
        "mono" => {
            let p: MonoParams = parse(&config.params)?;
            (to_value(&p), run_mono(&p)?)
        }
        "recur" => {
            let p: RecurParams = parse(&config.params)?;
            (to_value(&p), run_recur(&p)?)
        }
        "conc-lin" => {
            let p: ConcLinParams = parse(&config.params)?;
            (to_value(&p), run_conc_lin(&p)?)
        }
        "conc-quad" => {
            let p: ConcQuadParams = parse(&config.params)?;
            (to_value(&p), run_conc_quad(&p)?)
        }
        "factor-crit" => {
            let p: FactorCritParams = parse(&config.params)?;
            (to_value(&p), run_factor_crit(&p, seed)?)
        }
        "chu" => {
            let p: ChuParams = parse(&config.params)?;
            (to_value(&p), run_chu(&p, seed)?)
        }
        other => {
            return Err(ExperimentError::InvalidConfig(format!(
                "unknown command {other:?}; expected one of {}",
                COMMANDS.join(", ")
            )))
        }
    };
    Ok(Run {
        config: ExperimentConfig {
            params,
            ..config.clone()
        },
        report,
    })
}

fn run_rado(p: &TripleParams) -> Report {
    let class = match equations::classify_rado(p.a, p.b, p.c) {
        Ok(t) => format!("{:?}", t.class),
        Err(_) => "NotRado".to_string(),
    };
    Report {
        summary: class.clone(),
        columns: cols(&["a", "b", "c", "class"]),
        rows: vec![cells![p.a, p.b, p.c, class]],
        detail: json!({ "class": class }),
    }
}

fn run_forms(p: &TripleParams) -> Result<Report> {
    let t = equations::classify_rado(p.a, p.b, p.c)?;
    let ft = equations::forms_for(&t)?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (j, (form, coord)) in ft.forms.iter().zip(ft.map).enumerate() {
        let [al, be, ga] = form.coefficients();
        rows.push(cells![j + 1, format!("{coord:?}"), al, be, ga, form.discriminant(), form.is_irreducible()]);
        lines.push(format!("P{} = {} -> {:?}", j + 1, form, coord));
    }
    Ok(Report {
        summary: lines.join("\n"),
        columns: cols(&["j", "coordinate", "alpha", "beta", "gamma", "discriminant", "irreducible"]),
        rows,
        detail: json!({ "forms": ft, "identity": equations::verify_identity(&t, &ft) }),
    })
}

fn run_solve(p: &SolveParams) -> Result<Report> {
    let t = equations::classify_rado(p.a, p.b, p.c)?;
    let s = equations::solution(&t, p.k, p.m, p.n)?;
    Ok(Report {
        summary: format!("{} {} {}", s.x, s.y, s.z),
        columns: cols(&["k", "m", "n", "x", "y", "z", "positive", "distinct", "satisfies"]),
        rows: vec![cells![p.k, p.m, p.n, s.x, s.y, s.z, s.positive, s.distinct, s.satisfies(&t)]],
        detail: to_value(&s),
    })
}

fn run_omega(p: &OmegaParams) -> Result<Report> {
    let rows: Vec<Vec<String>> = crate::numeric::sieve_primes(p.limit)
        .into_iter()
        .map(|q| cells![q, quadforms::omega_prime(&p.form, q)])
        .collect();
    let sum = quadforms::omega_partial_sum(&p.form, p.limit)?;
    Ok(Report {
        summary: format!("sum_{{p <= {}}} omega(p)/p = {sum}", p.limit),
        columns: cols(&["p", "omega"]),
        rows,
        detail: json!({ "partial_sum": sum, "exceptional_primes": p.form.exceptional_primes() }),
    })
}

fn run_distance(p: &DistanceParams) -> Result<Report> {
    let chi = character(p.chi)?;
    let d = multfun::distance_to_target(&p.f, &chi, p.t, p.from, p.to)?;
    Ok(Report {
        summary: d.to_string(),
        columns: cols(&["from", "to", "t", "distance"]),
        rows: vec![cells![p.from, p.to, p.t, d]],
        detail: json!({ "distance": d }),
    })
}

fn run_folner(p: &FolnerParams, seed: u64) -> Result<Report> {
    let (mode, elems) = folner::elements(&p.spec, p.samples, seed)?;
    let rows = elems
        .iter()
        .enumerate()
        .map(|(i, e)| cells![i, e.value, factored(&e.factorization())])
        .collect();
    Ok(Report {
        summary: format!("{} {:?} elements of {}", elems.len(), mode, p.spec.label()),
        columns: cols(&["index", "value", "factorization"]),
        rows,
        detail: json!({
            "mode": mode,
            "cardinality": p.spec.cardinality().to_string(),
            "window": p.spec.window(),
            "elements": elems,
        }),
    })
}

fn run_qdelta(p: &QDeltaParams) -> Result<Report> {
    let q = folner::find_q_delta_l(p.delta, p.l, p.cap)?;
    let (ok, cert) = folner::certify_q_delta_l(&q, p.bits);
    Ok(Report {
        summary: format!("n = {}, chord = {}, certified = {ok}", q.n_shift, q.chord),
        columns: cols(&["delta", "l", "n_shift", "angle", "angle_error", "chord", "certified"]),
        rows: vec![cells![p.delta, p.l, q.n_shift, q.angle, q.angle_error, q.chord, ok]],
        detail: json!({ "q": q, "certificate": cert }),
    })
}

fn read_records(path: &str) -> Result<Vec<WitnessRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io(format!("{path}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    // accept a record, a list of records, or a witness run's JSON output
    let v = v.pointer("/report/detail/records").cloned().unwrap_or(v);
    if v.is_array() {
        parse(&v)
    } else {
        Ok(vec![parse(&v)?])
    }
}

fn run_witness(p: &WitnessParams, seed: u64) -> Result<Report> {
    let columns = cols(&["index", "q1", "q2", "q3", "v", "conditions", "passed"]);
    if let Some(path) = &p.verify {
        let records = read_records(path)?;
        let mut rows = Vec::new();
        let mut reports = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let rep = gridwitness::verify_witness(&r.params, &r.witness);
            rows.push(cells![
                i,
                r.params.q1.value,
                r.params.q2.value,
                r.params.q3.value,
                r.witness.v,
                rep.conditions.len(),
                rep.all_passed()
            ]);
            reports.push(rep);
        }
        let good = reports.iter().filter(|r| r.all_passed()).count();
        return Ok(Report {
            summary: format!("{good}/{} records verified", records.len()),
            columns,
            rows,
            detail: json!({ "reports": reports }),
        });
    }
    let (Some(kind), Some(a), Some(b), Some(c)) = (p.case, p.a, p.b, p.c) else {
        return Err(ExperimentError::InvalidConfig("witness needs case, a, b, c (or verify)".into()));
    };
    let case = CaseTag::new(kind, a, b, c)?;
    let lv = match p.levels {
        Some(lv) => lv,
        None => gridwitness::smallest_levels(&case)?,
    };
    lv.check_ordering(&case)?;
    let (mode, combos) = gridwitness::element_combinations(&case, &lv, folner::ENUMERATION_CAP, p.samples, seed)?;
    let qdl = folner::find_q_delta_l(p.delta, lv.l, gridwitness::QDL_SEARCH_CAP)?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, q) in combos.into_iter().take(p.count).enumerate() {
        let params = GridParams::with_qdl(case, p.delta, lv, q, qdl.clone())?;
        let w = gridwitness::construct_v(&params)?;
        rows.push(cells![
            i,
            params.q1.value,
            params.q2.value,
            params.q3.value,
            w.v,
            w.report.conditions.len(),
            w.report.all_passed()
        ]);
        records.push(WitnessRecord { params, witness: w });
    }
    let good = records.iter().filter(|r| r.witness.report.all_passed()).count();
    Ok(Report {
        summary: format!(
            "{} at s={:?} r={} K={} L={}: {good}/{} witnesses pass",
            kind.name(),
            lv.s,
            lv.r,
            lv.k,
            lv.l,
            records.len()
        ),
        columns,
        rows,
        detail: json!({ "mode": mode, "levels": lv, "records": records }),
    })
}

fn run_sdelta(p: &SDeltaParams) -> Result<Report> {
    let t = equations::classify_rado(p.a, p.b, p.c)?;
    let spec = match p.alpha_sq {
        None => equations::SDeltaSpec::for_triple(&t, p.delta)?,
        Some(a2) => equations::SDeltaSpec::new(equations::forms_for(&t)?, a2, p.delta)?,
    };
    let d = equations::s_delta_density(&spec, p.n)?;
    let cone = equations::cone_count(spec.alpha_sq, p.n);
    Ok(Report {
        summary: format!("count = {}, density = {}, cone = {cone}", d.count, d.density),
        columns: cols(&["n", "delta", "alpha_sq", "count", "density", "cone_count"]),
        rows: vec![cells![p.n, p.delta, spec.alpha_sq, d.count, d.density, cone]],
        detail: json!({ "density": d, "cone_count": cone }),
    })
}

fn run_mono(p: &MonoParams) -> Result<Report> {
    let t = equations::classify_rado(p.a, p.b, p.c)?;
    let w = equations::monochromatic_search(&t, &p.functions, p.delta_i, p.k_max, p.m_max)?;
    let mut rows = vec![cells!["param", w.x, w.y, w.z, w.scanned]];
    let mut detail = json!({ "witness": w });
    if let Some(bound) = p.raw_bound {
        let r = equations::raw_monochromatic_scan(&t, &p.functions, p.delta_i, bound)?;
        rows.push(cells!["raw", r.x, r.y, r.z, r.scanned]);
        detail["raw"] = to_value(&r);
    }
    Ok(Report {
        summary: format!("{} {} {}", w.x, w.y, w.z),
        columns: cols(&["search", "x", "y", "z", "scanned"]),
        rows,
        detail,
    })
}

fn run_recur(p: &RecurParams) -> Result<Report> {
    let t = equations::classify_rado(p.a, p.b, p.c)?;
    let sys = RotationSystem::new(p.functions.clone())?;
    let arcs = ArcSet::new(p.arcs.clone())?;
    let w = rotation::recurrence_search(&sys, &arcs, &t, p.eps, p.k_max, p.m_max, p.grid)?;
    Ok(Report {
        summary: format!("{} {} {} measure = {} >= {}", w.x, w.y, w.z, w.measure, w.target),
        columns: cols(&["x", "y", "z", "k", "m", "n", "measure", "target", "arc_measure"]),
        rows: vec![cells![w.x, w.y, w.z, w.k, w.m, w.n, w.measure, w.target, rotation::arc_measure(&arcs)]],
        detail: to_value(&w),
    })
}

fn conc_report(r: &rotation::ConcentrationResult) -> Report {
    Report {
        summary: format!("lhs = {}, rhs = {}, audited = {}", r.lhs, r.rhs, r.holds),
        columns: cols(&["lhs", "rhs", "distance", "distance_from_one", "truncation", "audit_constant", "holds"]),
        rows: vec![cells![r.lhs, r.rhs, r.distance, r.distance_from_one, r.truncation, r.audit_constant, r.holds]],
        detail: to_value(r),
    }
}

fn run_conc_lin(p: &ConcLinParams) -> Result<Report> {
    let chi = character(p.chi)?;
    let r = rotation::concentration_linear(&p.f, &chi, p.t, p.q, p.a, p.k, p.n, p.truncation)?;
    Ok(conc_report(&r))
}

fn run_conc_quad(p: &ConcQuadParams) -> Result<Report> {
    let chi = character(p.chi)?;
    let r = rotation::concentration_quadratic(&p.f, &chi, p.t, &p.form, p.q, p.a, p.b, p.k, p.n, p.truncation)?;
    Ok(conc_report(&r))
}

fn run_factor_crit(p: &FactorCritParams, seed: u64) -> Result<Report> {
    let s = rotation::factor_criterion(&p.f, &p.kind, p.r, p.k, p.n, p.samples, seed)?;
    Ok(Report {
        summary: format!("statistic = {}", s.statistic),
        columns: cols(&["q", "average"]),
        rows: s.per_q.iter().map(|(q, v)| cells![q, v]).collect(),
        detail: to_value(&s),
    })
}

fn run_chu(p: &ChuParams, seed: u64) -> Result<Report> {
    if p.max_atoms == 0 {
        return Err(ExperimentError::InvalidConfig("max_atoms must be positive".into()));
    }
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(p.count);
    let mut violations = 0;
    for i in 0..p.count {
        let atoms = rng.gen_range(1..=p.max_atoms);
        let l = rng.gen_range(0..=p.max_partitions);
        let space = FiniteProbSpace::random(&mut rng, atoms, l);
        let r = rotation::chu_check(&space)?;
        violations += usize::from(!r.holds);
        rows.push(cells![i, atoms, l, r.lhs, r.rhs, r.holds]);
    }
    Ok(Report {
        summary: format!("{violations} violations in {} spaces", p.count),
        columns: cols(&["index", "atoms", "partitions", "lhs", "rhs", "holds"]),
        rows,
        detail: json!({ "violations": violations }),
    })
}

/// CSV with two comment lines: the library version and the resolved config.
pub fn write_csv<W: Write>(run: &Run, out: W) -> Result<()> {
    let mut out = out;
    let io = |e: std::io::Error| ExperimentError::Io(e.to_string());
    writeln!(out, "# pretlab {VERSION}").map_err(io)?;
    writeln!(out, "# config: {}", serde_json::to_string(&run.config).expect("config serializes")).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| ExperimentError::Io(e.to_string());
    w.write_record(&run.report.columns).map_err(csv_err)?;
    for r in &run.report.rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub fn to_json(run: &Run) -> String {
    let v = json!({
        "pretlab": VERSION,
        "config": run.config,
        "report": run.report,
    });
    serde_json::to_string_pretty(&v).expect("report serializes")
}

pub fn render(run: &Run) -> Result<Vec<u8>> {
    match run.config.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(run, &mut buf)?;
            Ok(buf)
        }
        Format::Json => Ok((to_json(run) + "\n").into_bytes()),
    }
}

/// Caps the global rayon pool from PRETLAB_THREADS when set.
pub fn configure_threads_from_env() -> Result<()> {
    let Ok(v) = std::env::var("PRETLAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .map_err(|_| ExperimentError::InvalidConfig(format!("PRETLAB_THREADS={v:?} is not a count")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cmd: &str, params: Value) -> ExperimentConfig {
        ExperimentConfig::new(cmd, params)
    }

    #[test]
    fn rado_and_solve() {
        let r = run(&cfg("rado", json!({"a": 9, "b": 16, "c": 25}))).unwrap();
        assert_eq!(r.report.summary, "APlusB");
        let r = run(&cfg("rado", json!({"a": 1, "b": 1, "c": 4}))).unwrap();
        assert_eq!(r.report.summary, "NotRado");
        let r = run(&cfg("solve", json!({"a": 1, "b": 1, "c": 1, "k": 1, "m": 2, "n": 1}))).unwrap();
        assert_eq!(r.report.summary, "3 4 5");
    }

    #[test]
    fn defaults_are_resolved_into_config() {
        let r = run(&cfg("sdelta", json!({"a": 1, "b": 1, "c": 1, "n": 50}))).unwrap();
        assert_eq!(r.config.params["delta"], json!(0.3));
        let csv = String::from_utf8(render(&r).unwrap()).unwrap();
        assert!(csv.starts_with(&format!("# pretlab {VERSION}\n# config: ")));
        assert!(csv.contains("\"delta\":0.3"));
    }

    #[test]
    fn bad_params_are_usage_errors() {
        assert!(run(&cfg("rado", json!({"a": 1}))).unwrap_err().is_usage());
        assert!(run(&cfg("rado", json!({"a": 1, "b": 1, "c": 1, "d": 2}))).unwrap_err().is_usage());
        assert!(run(&cfg("nope", json!({}))).unwrap_err().is_usage());
        let e = run(&cfg("forms", json!({"a": 1, "b": 1, "c": 4}))).unwrap_err();
        assert!(!e.is_usage());
        assert!(e.to_string().starts_with("NotRado"));
    }

    #[test]
    fn sampled_runs_are_byte_identical() {
        let mut c = cfg(
            "witness",
            json!({"case": "APB_AllIrreducible", "a": 1, "b": 1, "c": 2, "count": 2, "samples": 5}),
        );
        c.seed = 11;
        let a = render(&run(&c).unwrap()).unwrap();
        let b = render(&run(&c).unwrap()).unwrap();
        assert_eq!(a, b);
        c.params = json!({"count": 20, "max_atoms": 6});
        c.command = "chu".into();
        assert_eq!(render(&run(&c).unwrap()).unwrap(), render(&run(&c).unwrap()).unwrap());
    }

    #[test]
    fn config_round_trips() {
        let mut c = cfg("mono", json!({"a": 1}));
        c.format = Format::Json;
        c.output = Some("out.json".into());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
