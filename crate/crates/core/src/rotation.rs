//! Multiplicative rotation actions T_n z = (f_1(n) z_1, ..., f_s(n) z_s) on
//! the torus, exact arc measures, recurrence search, and the finite-stage
//! concentration, factor, Chu and bilinear diagnostics.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equations::{self, EquationError, RadoTriple};
use crate::folner::{self, AveragingMode, FolnerError, FolnerSpec};
use crate::gridwitness::{self, WitnessError};
use crate::multfun::{self, DirichletCharacter, MultError, MultiplicativeFunction};
use crate::numeric::{self, sieve_primes, unit_power, UnitComplex};
use crate::quadforms::BinaryQuadraticForm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error("InvalidArc: {0}")]
    InvalidArc(String),
    #[error("DimensionMismatch: {functions} functions, {arcs} arcs")]
    DimensionMismatch { functions: usize, arcs: usize },
    #[error("HypothesisViolation: {0}")]
    HypothesisViolation(String),
    #[error("NotFound: exhausted k <= {k_max}, m, n <= {m_max}")]
    NotFound { k_max: u64, m_max: u64 },
    #[error("BothZero: l1 and l2 cannot both vanish")]
    BothZero,
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Mult(#[from] MultError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Folner(#[from] FolnerError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
}

pub type Result<T> = std::result::Result<T, RotationError>;

/// Comparison slack used by the recurrence and Chu checks.
pub const MEASURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSystem {
    pub functions: Vec<MultiplicativeFunction>,
}

impl RotationSystem {
    pub fn new(functions: Vec<MultiplicativeFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(RotationError::InvalidArgument("need at least one function".into()));
        }
        for f in &functions {
            f.validate()?;
        }
        Ok(Self { functions })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// The rotation vector of T_n.
    pub fn act(&self, n: u64) -> Result<Vec<UnitComplex>> {
        self.functions.iter().map(|f| Ok(f.eval(n)?)).collect()
    }
}

/// Closed arc e([center - half_width, center + half_width]), in turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub half_width: f64,
}

impl Arc {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= 0.5) {
            return Err(RotationError::InvalidArc(format!("half-width {half_width} turns outside (0, 1/2]")));
        }
        Ok(Self {
            center: UnitComplex::from_turns(center).turns(),
            half_width,
        })
    }

    /// Center and half-width in radians.
    pub fn from_radians(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center / std::f64::consts::TAU, half_width / std::f64::consts::TAU)
    }

    pub fn measure(&self) -> f64 {
        2.0 * self.half_width
    }

    /// {w : u w in A} = A rotated by conj(u).
    pub fn pullback(&self, u: UnitComplex) -> Arc {
        Arc {
            center: (UnitComplex::from_turns(self.center) * u.conj()).turns(),
            half_width: self.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    pub arcs: Vec<Arc>,
}

impl ArcSet {
    pub fn new(arcs: Vec<Arc>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(RotationError::InvalidArc("empty arc set".into()));
        }
        Ok(Self { arcs })
    }

    /// The same arc I_delta = e((-delta, delta)) in every coordinate.
    pub fn centered(s: usize, delta_turns: f64) -> Result<Self> {
        Self::new(vec![Arc::new(0.0, delta_turns)?; s])
    }
}

pub fn arc_measure(a: &ArcSet) -> f64 {
    a.arcs.iter().map(Arc::measure).product()
}

/// Length (in turns) of the intersection of arcs on the circle, by interval
/// arithmetic on lifts to the real line.
pub fn intersection_length(arcs: &[Arc]) -> f64 {
    let Some(first) = arcs.first() else { return 1.0 };
    let mut pieces = vec![(first.center - first.half_width, first.center + first.half_width)];
    for a in &arcs[1..] {
        let mut next = Vec::new();
        for &(lo, hi) in &pieces {
            for k in -2..=2 {
                let c = a.center + k as f64;
                let (alo, ahi) = (c - a.half_width, c + a.half_width);
                let (l, h) = (lo.max(alo), hi.min(ahi));
                if h > l {
                    next.push((l, h));
                }
            }
        }
        pieces = next;
        if pieces.is_empty() {
            return 0.0;
        }
    }
    // a full circle arc has copies touching at endpoints; pieces never overlap
    // in positive measure, so the lengths add
    pieces.iter().map(|(l, h)| h - l).sum::<f64>().min(1.0)
}

/// mu(A ∩ T_x^{-1} A ∩ T_y^{-1} A ∩ T_z^{-1} A).
pub fn joint_measure(sys: &RotationSystem, a: &ArcSet, x: u64, y: u64, z: u64) -> Result<f64> {
    if sys.dim() != a.arcs.len() {
        return Err(RotationError::DimensionMismatch {
            functions: sys.dim(),
            arcs: a.arcs.len(),
        });
    }
    if x == 0 || y == 0 || z == 0 {
        return Err(RotationError::InvalidArgument("x, y, z must be positive".into()));
    }
    let mut total = 1.0;
    for (f, arc) in sys.functions.iter().zip(&a.arcs) {
        let arcs = [*arc, arc.pullback(f.eval(x)?), arc.pullback(f.eval(y)?), arc.pullback(f.eval(z)?)];
        total *= intersection_length(&arcs);
        if total == 0.0 {
            break;
        }
    }
    Ok(total)
}

/// Restricts the recurrence search to m = Q m' + m_shift, n = Q n' + n_shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub modulus: u64,
    pub m_shift: u64,
    pub n_shift: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceWitness {
    pub x: u64,
    pub y: u64,
    pub z: u64,
    pub k: u64,
    pub m: u64,
    pub n: u64,
    pub measure: f64,
    pub target: f64,
    pub scanned: u64,
}

/// First parametrized solution (k outer, then m, then n) that is positive,
/// distinct and has joint measure >= mu(A)^4 - eps.
pub fn recurrence_search(
    sys: &RotationSystem,
    a: &ArcSet,
    triple: &RadoTriple,
    eps: f64,
    k_max: u64,
    m_max: u64,
    grid: Option<Grid>,
) -> Result<RecurrenceWitness> {
    triple.ensure_rado()?;
    if eps <= 0.0 {
        return Err(RotationError::InvalidArgument("eps must be positive".into()));
    }
    let mu = arc_measure(a);
    let target = mu.powi(4) - eps;
    let mut scanned = 0;
    for k in 1..=k_max {
        for m0 in 1..=m_max {
            for n0 in 1..=m_max {
                scanned += 1;
                let (m, n) = match grid {
                    None => (m0, n0),
                    Some(g) => (g.modulus * (m0 - 1) + g.m_shift.max(1), g.modulus * (n0 - 1) + g.n_shift.max(1)),
                };
                let s = equations::solution(triple, k, m, n)?;
                if !(s.positive && s.distinct) {
                    continue;
                }
                let (Ok(x), Ok(y), Ok(z)) = (u64::try_from(s.x), u64::try_from(s.y), u64::try_from(s.z)) else {
                    continue;
                };
                let measure = joint_measure(sys, a, x, y, z)?;
                if measure >= target - MEASURE_TOL {
                    return Ok(RecurrenceWitness {
                        x,
                        y,
                        z,
                        k,
                        m,
                        n,
                        measure,
                        target,
                        scanned,
                    });
                }
            }
        }
    }
    Err(RotationError::NotFound { k_max, m_max })
}

/// Pairwise sum in a fixed tree shape.
pub fn tree_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => tree_sum(&v[..n / 2]) + tree_sum(&v[n / 2..]),
    }
}

const CHUNK: u64 = 1024;

/// Sum of `term(i)` over 0 <= i < count: chunks in parallel, chunk results
/// combined by `tree_sum`, so the value does not depend on the thread count.
fn parallel_sum<F>(count: u64, term: F) -> Result<f64>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    parallel_sum_with(count, || (), |_, i| term(i))
}

/// As `parallel_sum`, with scratch state created once per chunk.
fn parallel_sum_with<S, I, F>(count: u64, init: I, term: F) -> Result<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, u64) -> Result<f64> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(count);
            let mut state = init();
            let mut s = Vec::with_capacity((hi - lo) as usize);
            for i in lo..hi {
                s.push(term(&mut state, i)?);
            }
            Ok(tree_sum(&s))
        })
        .collect::<Result<_>>()?;
    Ok(tree_sum(&partial))
}

/// |u - target| memoized on the bits of u; functions built from characters
/// take few distinct values.
struct DistanceCache {
    target: Complex64,
    keys: [u64; 64],
    values: [f64; 64],
}

impl DistanceCache {
    fn new(target: Complex64) -> Self {
        Self {
            target,
            keys: [u64::MAX; 64],
            values: [0.0; 64],
        }
    }

    fn distance(&mut self, u: UnitComplex) -> f64 {
        let k = u.turns().to_bits();
        let slot = (k.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 58) as usize;
        if self.keys[slot] != k {
            self.keys[slot] = k;
            self.values[slot] = (u.to_complex() - self.target).norm();
        }
        self.values[slot]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub lhs: f64,
    /// D(f, chi n^{it}; K, X) + K^{-1/2}.
    pub rhs: f64,
    pub distance: f64,
    /// D(f, chi n^{it}; 1, X), the pretension diagnostic.
    pub distance_from_one: f64,
    pub truncation: u64,
    pub audit_constant: f64,
    pub holds: bool,
    /// exp(F_N) or exp(G_{P,N}).
    pub correction: [f64; 2],
    /// gcd(P(a, b), Q) in the quadratic case.
    pub c: u64,
}

/// Default truncation X of the pretentious distance.
pub const DISTANCE_TRUNCATION: u64 = 100_000;

fn primorial_divides(k: u64, q: u64) -> bool {
    sieve_primes(k).into_iter().all(|p| q % p == 0)
}

fn target_value(chi: &DirichletCharacter, n: u64) -> Complex64 {
    chi.value(n).map_or(Complex64::new(0.0, 0.0), |u| u.to_complex())
}

/// E_{n <= N} |f(Qn + a) - chi(a) (Qn)^{it} exp(F_N(f, K))|.
#[allow(clippy::too_many_arguments)]
pub fn concentration_linear(
    f: &MultiplicativeFunction,
    chi: &DirichletCharacter,
    t: f64,
    q: u64,
    a: u64,
    k: u64,
    n_max: u64,
    truncation: u64,
) -> Result<ConcentrationResult> {
    f.validate()?;
    if n_max == 0 || q == 0 || k < 2 {
        return Err(RotationError::InvalidArgument("need N >= 1, Q >= 1, K >= 2".into()));
    }
    let hyp = |m: String| Err(RotationError::HypothesisViolation(m));
    if !primorial_divides(k, q) {
        return hyp(format!("prod of primes <= K = {k} does not divide Q = {q}"));
    }
    if q % chi.modulus() != 0 {
        return hyp(format!("q = {} does not divide Q = {q}", chi.modulus()));
    }
    if numeric::factorize_u64(q).expect("q >= 1").primes().any(|p| p > k) {
        return hyp(format!("Q = {q} has a prime factor above K = {k}"));
    }
    if a.gcd(&q) != 1 {
        return hyp(format!("(a, Q) = ({a}, {q}) is not 1"));
    }
    let corr = multfun::f_partial(f, chi, t, k, n_max)?.exp();
    let lead = target_value(chi, a) * corr;
    let sum = parallel_sum_with(
        n_max,
        || DistanceCache::new(lead),
        |cache, i| {
            let n = i + 1;
            let arg = q
                .checked_mul(n)
                .and_then(|x| x.checked_add(a))
                .ok_or_else(|| RotationError::InvalidArgument("Qn + a overflows".into()))?;
            let lhs = f.eval(arg)?;
            if t == 0.0 {
                return Ok(cache.distance(lhs));
            }
            Ok((lhs.to_complex() - lead * unit_power(q * n, t).to_complex()).norm())
        },
    )?;
    let distance = multfun::distance_to_target(f, chi, t, k as f64, truncation as f64)?;
    let distance_from_one = multfun::distance_to_target(f, chi, t, 1.0, truncation as f64)?;
    let rhs = distance + 1.0 / (k as f64).sqrt();
    let lhs = sum / n_max as f64;
    let audit_constant = 10.0;
    Ok(ConcentrationResult {
        lhs,
        rhs,
        distance,
        distance_from_one,
        truncation,
        audit_constant,
        holds: lhs <= audit_constant * rhs,
        correction: [corr.re, corr.im],
        c: 1,
    })
}

/// E_{m, n <= N} |f(P_c(Qm + a, Qn + b)) - chi(P_c(a, b)) P_c(Qm, Qn)^{it}
/// exp(G_{P,N}(f, K))| with c = (P(a, b), Q) and P_c = P / c.
#[allow(clippy::too_many_arguments)]
pub fn concentration_quadratic(
    f: &MultiplicativeFunction,
    chi: &DirichletCharacter,
    t: f64,
    form: &BinaryQuadraticForm,
    q: u64,
    a: u64,
    b: u64,
    k: u64,
    n_max: u64,
    truncation: u64,
) -> Result<ConcentrationResult> {
    f.validate()?;
    if n_max == 0 || q == 0 || k < 2 {
        return Err(RotationError::InvalidArgument("need N >= 1, Q >= 1, K >= 2".into()));
    }
    let hyp = |m: String| Err(RotationError::HypothesisViolation(m));
    if !form.is_irreducible() {
        return hyp(format!("{form} is reducible"));
    }
    let pab = form.eval_i128(a as i128, b as i128);
    if pab == 0 {
        return hyp("P(a, b) = 0".into());
    }
    let c = (pab.unsigned_abs() as u64).gcd(&q);
    let qc = q / c;
    if !primorial_divides(k, qc) {
        return hyp(format!("prod of primes <= K = {k} does not divide Q/c = {qc}"));
    }
    if qc % chi.modulus() != 0 {
        return hyp(format!("q = {} does not divide Q/c = {qc}", chi.modulus()));
    }
    let distance = multfun::distance_to_target(f, chi, t, k as f64, truncation as f64)?;
    if distance > 1.0 {
        return hyp(format!("D(f, chi n^(it); K, X) = {distance} exceeds 1"));
    }
    let distance_from_one = multfun::distance_to_target(f, chi, t, 1.0, truncation as f64)?;
    let corr = multfun::g_partial(f, chi, t, form, k, n_max)?.exp();
    let pc_ab = pab.unsigned_abs() / c as u128;
    let chi_ab = u64::try_from(pc_ab)
        .map(|x| target_value(chi, x))
        .unwrap_or_else(|_| target_value(chi, (pc_ab % chi.modulus() as u128) as u64));
    let lead = chi_ab * corr;
    let (qi, ai, bi, ci) = (q as i128, a as i128, b as i128, c as i128);
    let sum = parallel_sum(n_max, |i| {
        let m = i as i128 + 1;
        let mut row = Vec::with_capacity(n_max as usize);
        let mut cache = DistanceCache::new(lead);
        for n in 1..=n_max as i128 {
            let v = form.eval_i128(qi * m + ai, qi * n + bi).unsigned_abs();
            let arg = u64::try_from(v).map_err(|_| RotationError::InvalidArgument("P value overflows u64".into()))?;
            let arg = if c == 1 { arg } else { arg / c };
            let lhs = f.eval(arg)?;
            if t == 0.0 {
                row.push(cache.distance(lhs));
                continue;
            }
            let base = form.eval_i128(qi * m, qi * n).unsigned_abs() / ci as u128;
            let rhs = lead * UnitComplex::from_turns(t * (base as f64).ln() / std::f64::consts::TAU).to_complex();
            row.push((lhs.to_complex() - rhs).norm());
        }
        Ok(tree_sum(&row))
    })?;
    let lhs = sum / (n_max as f64 * n_max as f64);
    let rhs = distance + 1.0 / (k as f64).sqrt();
    let audit_constant = 10.0 * (1.0 + form.coefficient_norm() as f64);
    Ok(ConcentrationResult {
        lhs,
        rhs,
        distance,
        distance_from_one,
        truncation,
        audit_constant,
        holds: lhs <= audit_constant * rhs,
        correction: [corr.re, corr.im],
        c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    Archimedean,
    FinSupp,
    FinSuppP { form: BinaryQuadraticForm },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorStatistic {
    /// max over Q of the per-Q averages.
    pub statistic: f64,
    pub per_q: Vec<(String, f64)>,
    pub mode: AveragingMode,
}

/// Finite-stage factor criteria for a rank-one rotation by f, where
/// ||T_r F - F|| = |f(r) - 1|:
/// Archimedean: max_{Q in Phi_r} E_n |f((Qn + 1)/(Qn)) - 1|;
/// FinSupp(P): max_Q E_n |f(Q (Q_K Q n + v)/(Q_K Q^2 n + 1)) - 1| with
/// Q in Phi_{r,K} (Phi_{r,K,P}) and v from `gridwitness::factor_shift`.
#[allow(clippy::too_many_arguments)]
pub fn factor_criterion(
    f: &MultiplicativeFunction,
    kind: &FactorKind,
    r: u64,
    k: u64,
    n_max: u64,
    samples: usize,
    seed: u64,
) -> Result<FactorStatistic> {
    f.validate()?;
    if n_max == 0 {
        return Err(RotationError::InvalidArgument("N must be positive".into()));
    }
    let spec = match kind {
        FactorKind::Archimedean => FolnerSpec::PhiR { r },
        FactorKind::FinSupp => FolnerSpec::PhiRK { r, k },
        FactorKind::FinSuppP { form } => FolnerSpec::PhiRKP { r, k, form: *form },
    };
    let (mode, qs) = folner::elements(&spec, samples, seed)?;
    let (q_k, _) = folner::q_l(k);
    let mut per_q = Vec::with_capacity(qs.len());
    for q in &qs {
        let avg = match kind {
            FactorKind::Archimedean => {
                let qv = &q.value;
                parallel_sum(n_max, |i| {
                    let n = BigUint::from(i + 1);
                    let num = qv * &n + 1u32;
                    let den = qv * &n;
                    Ok((f.eval_rational_big(&num, &den)?.to_complex() - 1.0).norm())
                })?
            }
            FactorKind::FinSupp | FactorKind::FinSuppP { .. } => {
                let shift = gridwitness::factor_shift(&spec, q)?;
                let fq = f.eval_big(&q.value)?;
                let kq = &q_k * &q.value;
                let kq2 = &kq * &q.value;
                parallel_sum(n_max, |i| {
                    let n = BigUint::from(i + 1);
                    let num = &kq * &n + &shift.v;
                    let den = &kq2 * &n + 1u32;
                    let w = fq * f.eval_big(&num)? * f.eval_big(&den)?.conj();
                    Ok((w.to_complex() - 1.0).norm())
                })?
            }
        } / n_max as f64;
        per_q.push((q.value.to_string(), avg));
    }
    let statistic = per_q.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    Ok(FactorStatistic { statistic, per_q, mode })
}

/// Atoms with weights, a nonnegative F, and partitions given as a cell label
/// per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProbSpace {
    pub weights: Vec<f64>,
    pub f: Vec<f64>,
    pub partitions: Vec<Vec<usize>>,
}

impl FiniteProbSpace {
    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 || self.f.len() != n || self.partitions.iter().any(|p| p.len() != n) {
            return Err(RotationError::InvalidArgument("atom counts disagree".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) || self.f.iter().any(|&x| x < 0.0) {
            return Err(RotationError::InvalidArgument("weights and F must be nonnegative".into()));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(RotationError::InvalidArgument("weights must sum to 1".into()));
        }
        Ok(())
    }

    /// E(F | partition) evaluated at every atom.
    pub fn conditional(&self, partition: &[usize]) -> Vec<f64> {
        let cells = partition.iter().copied().max().map_or(0, |m| m + 1);
        let mut mass = vec![0.0; cells];
        let mut integral = vec![0.0; cells];
        for ((&c, &w), &x) in partition.iter().zip(&self.weights).zip(&self.f) {
            mass[c] += w;
            integral[c] += w * x;
        }
        partition
            .iter()
            .map(|&c| if mass[c] > 0.0 { integral[c] / mass[c] } else { 0.0 })
            .collect()
    }

    /// Random space with `atoms` atoms and `l` partitions.
    pub fn random<R: Rng>(rng: &mut R, atoms: usize, l: usize) -> Self {
        let raw: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let f = (0..atoms).map(|_| rng.gen_range(0.0..3.0)).collect();
        let partitions = (0..l)
            .map(|_| {
                let cells = rng.gen_range(1..=atoms);
                (0..atoms).map(|_| rng.gen_range(0..cells)).collect()
            })
            .collect();
        Self { weights, f, partitions }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChuResult {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// int F E(F|X_1) ... E(F|X_l) dmu >= (int F dmu)^{l + 1}.
pub fn chu_check(space: &FiniteProbSpace) -> Result<ChuResult> {
    space.validate()?;
    let conds: Vec<Vec<f64>> = space.partitions.iter().map(|p| space.conditional(p)).collect();
    let lhs = (0..space.weights.len())
        .map(|i| space.weights[i] * space.f[i] * conds.iter().map(|c| c[i]).product::<f64>())
        .sum::<f64>();
    let mean: f64 = space.weights.iter().zip(&space.f).map(|(w, x)| w * x).sum();
    let rhs = mean.powi(space.partitions.len() as i32 + 1);
    Ok(ChuResult {
        lhs,
        rhs,
        holds: lhs >= rhs - MEASURE_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearResult {
    /// E over the reachable index set of |v(k) - v_N|.
    pub single: f64,
    /// E_{m, n in [N]} |v(l1 m + l2 n) - v_N|.
    pub double: f64,
    pub ratio: Option<f64>,
    pub bound: f64,
    pub holds: bool,
}

/// Lemma-style bilinear bound for an even sequence: `values[k]` is v(k) for
/// 0 <= k <= (|l1| + |l2|) N and v(-k) = v(k). The single average runs over
/// k in [lN] (together with k = 0 when l1, l2 have opposite signs).
pub fn bilinear_defect(values: &[UnitComplex], v_n: UnitComplex, l1: i64, l2: i64, n: u64) -> Result<BilinearResult> {
    if l1 == 0 && l2 == 0 {
        return Err(RotationError::BothZero);
    }
    if n == 0 {
        return Err(RotationError::InvalidArgument("N must be positive".into()));
    }
    let l = l1.unsigned_abs() + l2.unsigned_abs();
    let top = l * n;
    if (values.len() as u64) <= top {
        return Err(RotationError::InvalidArgument(format!("need values up to index {top}")));
    }
    let target = v_n.to_complex();
    let dev = |k: u64| (values[k as usize].to_complex() - target).norm();
    let opposite = (l1 > 0 && l2 < 0) || (l1 < 0 && l2 > 0);
    let start = if opposite { 0 } else { 1 };
    let singles: Vec<f64> = (start..=top).map(dev).collect();
    let single = tree_sum(&singles) / singles.len() as f64;
    let mut rows = Vec::with_capacity(n as usize);
    for m in 1..=n as i64 {
        let row: Vec<f64> = (1..=n as i64).map(|k| dev((l1 * m + l2 * k).unsigned_abs())).collect();
        rows.push(tree_sum(&row));
    }
    let double = tree_sum(&rows) / (n as f64 * n as f64);
    let bound = 4.0 * l as f64 * single + 1e-9;
    Ok(BilinearResult {
        single,
        double,
        ratio: (single > 0.0).then(|| double / single),
        bound,
        holds: double <= bound,
    })
}

/// Values of f on 0..=len-1 with v(0) := 1.
pub fn sequence_from(f: &MultiplicativeFunction, len: u64) -> Result<Vec<UnitComplex>> {
    let mut out = Vec::with_capacity(len as usize);
    out.push(UnitComplex::ONE);
    for k in 1..len {
        out.push(f.eval(k)?);
    }
    Ok(out)
}
