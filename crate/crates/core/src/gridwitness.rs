//! CRT/Hensel constructions of the grid shift v, their verification, and the
//! cofactors R_j with P_j(Q m + 1, Q n + v) = Q_j R_j, Q = Q_{delta,L}.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equations::{classify_rado, forms_for, RadoClass};
use crate::folner::{self, FolnerElement, FolnerError, FolnerSpec, QDeltaL};
use crate::numeric::{self, factorize_u64, mod_inverse, mod_inverse_int, sieve_primes, NumericError};
use crate::quadforms::{omega_prime, roots_mod_prime_power, split_reducible, BinaryQuadraticForm, FormError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("InvalidCase: {0}")]
    InvalidCase(String),
    #[error("BelowThreshold: {level} = {value} must exceed the admissibility threshold {threshold}")]
    BelowThreshold { level: &'static str, value: u64, threshold: u64 },
    #[error("BadOrdering: {0}")]
    BadOrdering(String),
    #[error("WrongFamily: Q{j} is not in {family}")]
    WrongFamily { j: usize, family: String },
    #[error("HenselFailure: {0}")]
    HenselFailure(String),
    #[error("IndexOutOfRange: j = {0}")]
    IndexOutOfRange(usize),
    #[error("DivisibilityFailure: Q{j} does not divide P{j} at (m, n) = ({m}, {n})")]
    DivisibilityFailure { j: usize, m: u64, n: u64 },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Folner(#[from] FolnerError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Form(#[from] FormError),
}

pub type Result<T> = std::result::Result<T, WitnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseKind {
    #[serde(rename = "AC_P2Reducible")]
    AcP2Reducible,
    #[serde(rename = "AC_P2Irreducible")]
    AcP2Irreducible,
    #[serde(rename = "APB_AllIrreducible")]
    ApbAllIrreducible,
    #[serde(rename = "APB_P2Reducible")]
    ApbP2Reducible,
    #[serde(rename = "APB_BothReducible")]
    ApbBothReducible,
}

impl CaseKind {
    pub const ALL: [CaseKind; 5] = [
        CaseKind::AcP2Reducible,
        CaseKind::AcP2Irreducible,
        CaseKind::ApbAllIrreducible,
        CaseKind::ApbP2Reducible,
        CaseKind::ApbBothReducible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::AcP2Reducible => "AC_P2Reducible",
            CaseKind::AcP2Irreducible => "AC_P2Irreducible",
            CaseKind::ApbAllIrreducible => "APB_AllIrreducible",
            CaseKind::ApbP2Reducible => "APB_P2Reducible",
            CaseKind::ApbBothReducible => "APB_BothReducible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn is_ac(self) -> bool {
        matches!(self, CaseKind::AcP2Reducible | CaseKind::AcP2Irreducible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseTag {
    pub kind: CaseKind,
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl CaseTag {
    pub fn new(kind: CaseKind, a: u64, b: u64, c: u64) -> Result<Self> {
        let tag = Self { kind, a, b, c };
        let triple = classify_rado(a, b, c).map_err(|e| WitnessError::InvalidCase(e.to_string()))?;
        let bad = |why: &str| Err(WitnessError::InvalidCase(format!("{} for ({a}, {b}, {c}): {why}", kind.name())));
        if kind.is_ac() && a != c {
            return bad("a != c");
        }
        if !kind.is_ac() && triple.class != RadoClass::APlusB {
            return bad("a + b != c");
        }
        let [_, p2, p3] = tag.forms();
        let ok = match kind {
            CaseKind::AcP2Reducible => !p2.is_irreducible(),
            CaseKind::AcP2Irreducible => p2.is_irreducible(),
            CaseKind::ApbAllIrreducible => p2.is_irreducible() && p3.is_irreducible(),
            CaseKind::ApbP2Reducible => !p2.is_irreducible() && p3.is_irreducible(),
            CaseKind::ApbBothReducible => !p2.is_irreducible() && !p3.is_irreducible(),
        };
        if !ok {
            return bad("reducibility of P2, P3 does not match");
        }
        Ok(tag)
    }

    /// The case for a Rado triple with a = c or a + b = c. When only P3
    /// splits in the a + b = c family, a and b are exchanged so that P2
    /// is the split form.
    pub fn detect(a: u64, b: u64, c: u64) -> Result<Self> {
        let triple = classify_rado(a, b, c).map_err(|e| WitnessError::InvalidCase(e.to_string()))?;
        match triple.class {
            RadoClass::AC => {
                let ab = a * b;
                let kind = if ab.sqrt_floor_sq() { CaseKind::AcP2Reducible } else { CaseKind::AcP2Irreducible };
                Self::new(kind, a, b, c)
            }
            RadoClass::APlusB => {
                let p2 = BinaryQuadraticForm::new(1, -2 * b as i64, -((a * b) as i64))?;
                let p3 = BinaryQuadraticForm::new(1, 2 * a as i64, -((a * b) as i64))?;
                match (p2.is_irreducible(), p3.is_irreducible()) {
                    (true, true) => Self::new(CaseKind::ApbAllIrreducible, a, b, c),
                    (false, true) => Self::new(CaseKind::ApbP2Reducible, a, b, c),
                    (true, false) => Self::new(CaseKind::ApbP2Reducible, b, a, c),
                    (false, false) => Self::new(CaseKind::ApbBothReducible, a, b, c),
                }
            }
            RadoClass::BC => Err(WitnessError::InvalidCase(format!(
                "({a}, {b}, {c}) has b = c; use ({b}, {a}, {c})"
            ))),
            RadoClass::NotRado => Err(WitnessError::InvalidCase(format!("({a}, {b}, {c}) is not a Rado triple"))),
        }
    }

    /// P1, P2, P3 in the order used by the constructions.
    pub fn forms(&self) -> [BinaryQuadraticForm; 3] {
        let class = if self.kind.is_ac() { RadoClass::AC } else { RadoClass::APlusB };
        let triple = crate::equations::RadoTriple {
            a: self.a,
            b: self.b,
            c: self.c,
            class,
        };
        forms_for(&triple).expect("Rado class").forms
    }
}

trait PerfectSquare {
    fn sqrt_floor_sq(self) -> bool;
}

impl PerfectSquare for u64 {
    fn sqrt_floor_sq(self) -> bool {
        let s = num_integer::Roots::sqrt(&self);
        s * s == self
    }
}

/// kappa, gamma and lambda_1..lambda_4 as used by a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseParameters {
    pub kappa: Option<i64>,
    /// sqrt(ab) when ab is a square (a = c family).
    pub gamma: Option<i64>,
    /// gamma^2 = max(16 b^2, 2ab), the cone parameter of the a + b = c family.
    pub cone_gamma_sq: Option<u64>,
    /// P2 = (m + lambda1 n)(m + lambda2 n), P3 = (m + lambda3 n)(m + lambda4 n).
    pub lambdas: Vec<i64>,
}

pub fn choose_parameters(case: &CaseTag) -> Result<CaseParameters> {
    let (a, b) = (case.a as i64, case.b as i64);
    let ab = a * b;
    let [_, p2, p3] = case.forms();
    let mut out = CaseParameters {
        kappa: None,
        gamma: None,
        cone_gamma_sq: None,
        lambdas: Vec::new(),
    };
    match case.kind {
        CaseKind::AcP2Reducible => {
            let gamma = num_integer::Roots::sqrt(&ab);
            let kappa = (1..).find(|&k| 1 - k * gamma != 0).expect("exists");
            out.gamma = Some(gamma);
            out.kappa = Some(kappa);
        }
        CaseKind::AcP2Irreducible => {
            out.kappa = Some((1..).find(|&k| 1 - ab * k * k != 0).expect("exists"));
        }
        _ => {
            out.cone_gamma_sq = Some((16 * case.b * case.b).max(2 * case.a * case.b));
            if case.kind != CaseKind::ApbAllIrreducible {
                let s = split_reducible(&p2)?;
                out.lambdas.extend([s.lambda1, s.lambda2]);
            }
            if case.kind == CaseKind::ApbBothReducible {
                let s = split_reducible(&p3)?;
                out.lambdas.extend([s.lambda3(), s.lambda4()]);
            }
        }
    }
    Ok(out)
}

trait SplitNames {
    fn lambda3(&self) -> i64;
    fn lambda4(&self) -> i64;
}

impl SplitNames for crate::quadforms::ReducibleSplit {
    fn lambda3(&self) -> i64 {
        self.lambda1
    }
    fn lambda4(&self) -> i64 {
        self.lambda2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threshold {
    /// Factors whose product is the excluded constant.
    pub factors: Vec<i64>,
    /// Primes dividing the constant.
    pub constant_primes: Vec<u64>,
    /// omega-exceptional primes (dividing 2 disc) of the irreducible forms.
    pub form_primes: Vec<u64>,
    pub threshold: u64,
}

impl Threshold {
    pub fn constant(&self) -> BigInt {
        self.factors.iter().map(|&f| BigInt::from(f)).product()
    }
}

/// Largest excluded prime; r (a = c) or s (a + b = c) must exceed it.
pub fn admissibility_threshold(case: &CaseTag) -> Result<Threshold> {
    let params = choose_parameters(case)?;
    let (a, b, c) = (case.a as i64, case.b as i64, case.c as i64);
    let ab = a * b;
    let [p1, p2, p3] = case.forms();
    let (mut factors, irreducible): (Vec<i64>, Vec<BinaryQuadraticForm>) = match case.kind {
        CaseKind::AcP2Reducible => {
            let (k, g) = (params.kappa.unwrap(), params.gamma.unwrap());
            (vec![2, k, g, a, b, 1 + ab, 1 - k * g, 1 + k * g, 1 + k * k * ab], vec![p3])
        }
        CaseKind::AcP2Irreducible => {
            let k = params.kappa.unwrap();
            (vec![2, k, a, b, 1 + ab, 1 - ab * k * k, 1 + ab * k * k], vec![p2, p3])
        }
        CaseKind::ApbAllIrreducible => (vec![2, a, b, c], vec![p1, p2, p3]),
        CaseKind::ApbP2Reducible => {
            let l = &params.lambdas;
            (
                vec![2, a, b, a + b, l[0], l[1], l[0] - l[1], ab + l[0] * l[0]],
                vec![p1, p3],
            )
        }
        CaseKind::ApbBothReducible => {
            let l = &params.lambdas;
            let mut f = vec![2, a, b, a + b, l[0], l[1], l[0] - l[1], ab + l[0] * l[0]];
            f.extend([l[2], l[3], l[2] - l[3], ab + l[2] * l[2]]);
            // cross terms keep 1 + lambda_i v a unit where v kills a factor of
            // the other split form
            for i in 0..2 {
                for j in 2..4 {
                    f.push(l[i] - l[j]);
                }
            }
            (f, vec![p1])
        }
    };
    factors.retain(|&f| f != 1);
    let mut constant_primes = Vec::new();
    for &f in &factors {
        if f == 0 {
            return Err(WitnessError::InvalidCase(format!("{} has a vanishing excluded factor", case.kind.name())));
        }
        constant_primes.extend(factorize_u64(f.unsigned_abs())?.primes());
    }
    constant_primes.sort_unstable();
    constant_primes.dedup();
    let mut form_primes: Vec<u64> = irreducible.iter().flat_map(|f| f.exceptional_primes()).collect();
    form_primes.sort_unstable();
    form_primes.dedup();
    let threshold = constant_primes.iter().chain(&form_primes).copied().max().unwrap_or(1);
    Ok(Threshold {
        factors,
        constant_primes,
        form_primes,
        threshold,
    })
}

/// Scale parameters: s (a + b = c only) < r < K < L/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levels {
    pub s: Option<u64>,
    pub r: u64,
    pub k: u64,
    pub l: u64,
}

impl Levels {
    pub fn check_ordering(&self, case: &CaseTag) -> Result<()> {
        let bad = |m: String| Err(WitnessError::BadOrdering(m));
        match (case.kind.is_ac(), self.s) {
            (true, Some(_)) => return bad("s is only used by the a + b = c cases".into()),
            (false, None) => return bad("the a + b = c cases need s".into()),
            (false, Some(s)) if s >= self.r => return bad(format!("s = {s} must be < r = {}", self.r)),
            _ => {}
        }
        if self.r < 2 {
            return bad(format!("r = {} must be at least 2", self.r));
        }
        if self.r >= self.k {
            return bad(format!("r = {} must be < K = {}", self.r, self.k));
        }
        if 2 * self.k >= self.l {
            return bad(format!("K = {} must be < L/2 = {}/2", self.k, self.l));
        }
        Ok(())
    }

    /// Level compared against the admissibility threshold.
    pub fn base(&self) -> (&'static str, u64) {
        match self.s {
            Some(s) => ("s", s),
            None => ("r", self.r),
        }
    }
}

/// The Følner boxes for Q1, Q2, Q3.
pub fn families(case: &CaseTag, lv: &Levels) -> [FolnerSpec; 3] {
    let [p1, p2, p3] = case.forms();
    let (r, k, l) = (lv.r, lv.k, lv.l);
    match case.kind {
        CaseKind::AcP2Reducible => [
            FolnerSpec::PhiR { r },
            FolnerSpec::PhiRK { r, k },
            FolnerSpec::PhiRKP { r: k, k: l, form: p3 },
        ],
        CaseKind::AcP2Irreducible => [
            FolnerSpec::PhiR { r },
            FolnerSpec::PhiRKP { r, k, form: p2 },
            FolnerSpec::PhiRKP { r: k, k: l, form: p3 },
        ],
        _ => {
            let s = lv.s.unwrap_or(1);
            let q1 = FolnerSpec::PhiRKP { r: s, k: r, form: p1 };
            let q2 = if case.kind == CaseKind::ApbAllIrreducible {
                FolnerSpec::PhiRKP { r, k, form: p2 }
            } else {
                FolnerSpec::PhiRK { r, k }
            };
            let q3 = if case.kind == CaseKind::ApbBothReducible {
                FolnerSpec::PhiRK { r: k, k: l }
            } else {
                FolnerSpec::PhiRKP { r: k, k: l, form: p3 }
            };
            [q1, q2, q3]
        }
    }
}

fn next_prime_with(after: u64, form: Option<&BinaryQuadraticForm>) -> u64 {
    let mut p = after + 1;
    loop {
        if numeric::is_prime(p) && form.map_or(true, |f| omega_prime(f, p) > 0) {
            return p;
        }
        p += 1;
    }
}

/// Smallest levels above the threshold: the base level is threshold + 1,
/// each further level up to K is the next prime giving its box a nonempty
/// support, and L is the least value above 2K with a nonempty top box.
pub fn smallest_levels(case: &CaseTag) -> Result<Levels> {
    let t = admissibility_threshold(case)?.threshold;
    let [p1, p2, p3] = case.forms();
    let base = t + 1;
    let (s, r, k) = match case.kind {
        CaseKind::AcP2Reducible => (None, base, next_prime_with(base, None)),
        CaseKind::AcP2Irreducible => (None, base, next_prime_with(base, Some(&p2))),
        CaseKind::ApbAllIrreducible => {
            let r = next_prime_with(base, Some(&p1));
            (Some(base), r, next_prime_with(r, Some(&p2)))
        }
        CaseKind::ApbP2Reducible | CaseKind::ApbBothReducible => {
            let r = next_prime_with(base, Some(&p1));
            (Some(base), r, next_prime_with(r, None))
        }
    };
    let top_form = if case.kind == CaseKind::ApbBothReducible { None } else { Some(p3) };
    let mut l = 2 * k + 1;
    while !sieve_primes(l)
        .into_iter()
        .any(|p| p > k && top_form.as_ref().map_or(true, |f| omega_prime(f, p) > 0))
    {
        l += 1;
    }
    Ok(Levels { s, r, k, l })
}

/// Everything a construction consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub case: CaseTag,
    pub delta: f64,
    pub levels: Levels,
    pub q1: FolnerElement,
    pub q2: FolnerElement,
    pub q3: FolnerElement,
    pub qdl: QDeltaL,
}

/// Default search cap for Q_{delta,L}.
pub const QDL_SEARCH_CAP: u64 = 1_000_000;

impl GridParams {
    pub fn new(
        case: CaseTag,
        delta: f64,
        levels: Levels,
        q: [FolnerElement; 3],
    ) -> Result<Self> {
        let qdl = folner::find_q_delta_l(delta, levels.l, QDL_SEARCH_CAP)?;
        Self::with_qdl(case, delta, levels, q, qdl)
    }

    pub fn with_qdl(case: CaseTag, delta: f64, levels: Levels, q: [FolnerElement; 3], qdl: QDeltaL) -> Result<Self> {
        let [q1, q2, q3] = q;
        Ok(Self {
            case,
            delta,
            levels,
            q1,
            q2,
            q3,
            qdl,
        })
    }

    pub fn q(&self, j: usize) -> &FolnerElement {
        match j {
            1 => &self.q1,
            2 => &self.q2,
            _ => &self.q3,
        }
    }

    /// Residue modulus of the congruence conditions: Q1 for a = c,
    /// Q_s = prod_{p <= s} p^{2s} otherwise.
    pub fn residue_modulus(&self) -> BigUint {
        match self.levels.s {
            None => self.q1.value.clone(),
            Some(s) => q_s(s),
        }
    }
}

pub fn q_s(s: u64) -> BigUint {
    sieve_primes(s)
        .into_iter()
        .fold(BigUint::one(), |acc, p| acc * BigUint::from(p).pow((2 * s) as u32))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HenselRoot {
    pub p: u64,
    pub j: usize,
    pub theta: u32,
    /// Root of P_j(1, x) mod p the lift starts from.
    pub seed: u64,
    #[serde(with = "crate::serde_big")]
    pub zeta: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub passed: bool,
    /// Computed gcd and expected gcd, or other certificate values.
    pub computed: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionResult> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWitness {
    #[serde(with = "crate::serde_big")]
    pub v: BigUint,
    #[serde(with = "crate::serde_big")]
    pub crt_modulus: BigUint,
    pub parameters: CaseParameters,
    pub hensel_roots: Vec<HenselRoot>,
    pub report: ConditionReport,
}

/// One congruence condition: the quadratic c0 + c1 v + c2 v^2 has
/// gcd(Q_{delta,L}, .) = expected_gcd, and the quotient is congruent to
/// target modulo the residue modulus.
struct GcdCondition {
    name: String,
    poly: [i64; 3],
    expected_gcd: BigUint,
    target: BigUint,
}

fn eval_poly(poly: [i64; 3], v: &BigInt) -> BigInt {
    BigInt::from(poly[0]) + v * (BigInt::from(poly[1]) + v * BigInt::from(poly[2]))
}

fn linear(lambda: i64) -> [i64; 3] {
    [1, lambda, 0]
}

fn conditions(params: &GridParams, cp: &CaseParameters) -> Result<Vec<GcdCondition>> {
    let modr = params.residue_modulus();
    let inv = |q: &BigUint| -> Result<BigUint> {
        if modr.is_one() {
            return Ok(BigUint::zero());
        }
        Ok(mod_inverse(q, &modr)?)
    };
    let one_target = if modr.is_one() { BigUint::zero() } else { BigUint::one() };
    let [p1, p2, p3] = params.case.forms();
    let (q1, q2, q3) = (&params.q1.value, &params.q2.value, &params.q3.value);
    let cond = |name: &str, poly: [i64; 3], g: &BigUint, target: BigUint| GcdCondition {
        name: name.to_string(),
        poly,
        expected_gcd: g.clone(),
        target,
    };
    let one = BigUint::one();
    let out = match params.case.kind {
        CaseKind::AcP2Reducible => {
            let g = cp.gamma.unwrap();
            vec![
                cond("(i) v", [0, 1, 0], q1, one_target.clone()),
                cond("(ii) 1 - gamma v", [1, -g, 0], q2, inv(q2)?),
                cond("(iii) 1 + gamma v", [1, g, 0], &one, one_target),
                cond("(iv) P3(1, v)", p3.coefficients(), q3, inv(q3)?),
            ]
        }
        CaseKind::AcP2Irreducible => vec![
            cond("(i) v", [0, 1, 0], q1, one_target),
            cond("(ii) P2(1, v)", p2.coefficients(), q2, inv(q2)?),
            cond("(iii) P3(1, v)", p3.coefficients(), q3, inv(q3)?),
        ],
        CaseKind::ApbAllIrreducible => vec![
            cond("P1(1, v)", p1.coefficients(), q1, inv(q1)?),
            cond("P2(1, v)", p2.coefficients(), q2, inv(q2)?),
            cond("P3(1, v)", p3.coefficients(), q3, inv(q3)?),
        ],
        CaseKind::ApbP2Reducible => {
            let l = &cp.lambdas;
            vec![
                cond("P1(1, v)", p1.coefficients(), q1, inv(q1)?),
                cond("1 + lambda1 v", linear(l[0]), q2, inv(q2)?),
                cond("1 + lambda2 v", linear(l[1]), &one, one_target),
                cond("P3(1, v)", p3.coefficients(), q3, inv(q3)?),
            ]
        }
        CaseKind::ApbBothReducible => {
            let l = &cp.lambdas;
            vec![
                cond("P1(1, v)", p1.coefficients(), q1, inv(q1)?),
                cond("1 + lambda1 v", linear(l[0]), q2, inv(q2)?),
                cond("1 + lambda2 v", linear(l[1]), &one, one_target.clone()),
                cond("1 + lambda3 v", linear(l[2]), q3, inv(q3)?),
                cond("1 + lambda4 v", linear(l[3]), &one, one_target),
            ]
        }
    };
    Ok(out)
}

fn check_gcd_condition(c: &GcdCondition, v: &BigInt, qdl: &BigUint, modr: &BigUint) -> ConditionResult {
    let e = eval_poly(c.poly, v);
    let g = e.magnitude().gcd(qdl);
    let gcd_ok = !e.is_zero() && g == c.expected_gcd;
    let residue = if gcd_ok {
        let q = &e / BigInt::from(c.expected_gcd.clone());
        Some(q.mod_floor(&BigInt::from(modr.clone())).to_biguint().expect("nonnegative"))
    } else {
        None
    };
    let residue_ok = residue.as_ref() == Some(&c.target);
    ConditionResult {
        name: c.name.clone(),
        passed: gcd_ok && residue_ok,
        computed: format!(
            "gcd = {g}, residue = {}",
            residue.map_or_else(|| "-".to_string(), |r| r.to_string())
        ),
        expected: format!("gcd = {}, residue = {}", c.expected_gcd, c.target),
    }
}

/// Recomputes every condition of the case from `params` and `witness.v`.
pub fn verify_witness(params: &GridParams, witness: &GridWitness) -> ConditionReport {
    let mut out = Vec::new();
    let qdl = &params.qdl.value;
    let v = &witness.v;
    out.push(ConditionResult {
        name: "0 <= v < Q_{delta,L}".into(),
        passed: v < qdl,
        computed: v.to_string(),
        expected: format!("< {qdl}"),
    });
    let qdl_ok = params.qdl.factorization.value() == *qdl;
    out.push(ConditionResult {
        name: "Q_{delta,L} factorization".into(),
        passed: qdl_ok,
        computed: params.qdl.factorization.value().to_string(),
        expected: qdl.to_string(),
    });
    for j in 1..=3 {
        let q = params.q(j);
        let ok = q.factorization().value() == q.value && q.value.is_factor_of(qdl);
        out.push(ConditionResult {
            name: format!("Q{j} divides Q_{{delta,L}}"),
            passed: ok,
            computed: q.value.to_string(),
            expected: "divisor".into(),
        });
    }
    let vi = BigInt::from(v.clone());
    let modr = params.residue_modulus();
    match choose_parameters(&params.case).and_then(|cp| conditions(params, &cp)) {
        Ok(conds) => {
            for c in &conds {
                out.push(check_gcd_condition(c, &vi, qdl, &modr));
            }
        }
        Err(e) => out.push(ConditionResult {
            name: "case parameters".into(),
            passed: false,
            computed: e.to_string(),
            expected: "valid case".into(),
        }),
    }
    let forms = params.case.forms();
    for h in &witness.hensel_roots {
        let f = forms[h.j - 1];
        let pt = BigUint::from(h.p).pow(h.theta);
        let m = &pt * h.p;
        let val = f.eval_at_one(&BigInt::from(h.zeta.clone())).mod_floor(&BigInt::from(m.clone()));
        let passed = val == BigInt::from(pt);
        out.push(ConditionResult {
            name: format!("Hensel P{}(1, zeta) at p = {}", h.j, h.p),
            passed,
            computed: val.to_string(),
            expected: format!("{}^{} mod {}^{}", h.p, h.theta, h.p, h.theta + 1),
        });
    }
    for (m, n) in [(1u64, 1u64), (2, 3), (7, 5)] {
        for j in 1..=3 {
            let ok = cofactor(params, witness, j, m, n).is_ok();
            out.push(ConditionResult {
                name: format!("Q{j} | P{j}(Qm + 1, Qn + v) at ({m}, {n})"),
                passed: ok,
                computed: if ok { "0".into() } else { "nonzero".into() },
                expected: "remainder 0".into(),
            });
        }
    }
    ConditionReport { conditions: out }
}

/// One CRT constraint per prime.
struct Constraint {
    residue: BigInt,
    modulus: BigUint,
}

fn pow_u(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// v = zeta mod p^{theta + 1} for primes in the support of `q`, v = fallback
/// mod p for the remaining primes in (lo, hi].
fn form_window(
    lo: u64,
    hi: u64,
    j: usize,
    form: &BinaryQuadraticForm,
    q: &FolnerElement,
    fallback: i64,
    roots: &mut Vec<HenselRoot>,
    out: &mut Vec<Constraint>,
) -> Result<()> {
    for p in sieve_primes(hi).into_iter().filter(|&p| p > lo) {
        let theta = q.theta(p);
        if theta == 0 {
            out.push(Constraint {
                residue: BigInt::from(fallback),
                modulus: BigUint::from(p),
            });
            continue;
        }
        let seeds = roots_mod_prime_power(form, p, 1)?;
        let seed = seeds.first().ok_or_else(|| WitnessError::HenselFailure(format!("no root of P{j}(1, x) mod {p}")))?;
        let zeta = numeric::hensel_lift(form, p, theta, seed).map_err(|e| WitnessError::HenselFailure(e.to_string()))?;
        roots.push(HenselRoot {
            p,
            j,
            theta,
            seed: seed.try_into().unwrap_or(0),
            zeta: zeta.clone(),
        });
        out.push(Constraint {
            residue: BigInt::from(zeta),
            modulus: pow_u(p, theta + 1),
        });
    }
    Ok(())
}

/// v = lambda^{-1}(p^theta - 1) mod p^{theta + 1} on every prime in (lo, hi],
/// so that 1 + lambda v = p^theta.
fn linear_window(lo: u64, hi: u64, lambda: i64, q: &FolnerElement, out: &mut Vec<Constraint>) -> Result<()> {
    for p in sieve_primes(hi).into_iter().filter(|&p| p > lo) {
        let theta = q.theta(p);
        let m = pow_u(p, theta + 1);
        let inv = mod_inverse_int(&BigInt::from(lambda), &m)?;
        let r: BigInt = (BigInt::from(inv) * (BigInt::from(pow_u(p, theta)) - 1i32)).mod_floor(&BigInt::from(m.clone()));
        out.push(Constraint { residue: r, modulus: m });
    }
    Ok(())
}

fn check_modulus_bound(lv: &Levels, qdl: &BigUint) -> Result<()> {
    let (k, l) = (lv.k, lv.l);
    let bound = sieve_primes(l).into_iter().fold(BigUint::one(), |acc, p| {
        let e = if p <= k { 4 * k } else { 1 + 3 * l / 2 };
        acc * pow_u(p, e as u32)
    });
    if &bound > qdl {
        return Err(WitnessError::BadOrdering(format!(
            "prod p^(4K) prod p^(1 + 3L/2) exceeds Q_{{delta,L}} for K = {k}, L = {l}"
        )));
    }
    Ok(())
}

/// Runs the CRT/Hensel construction of the case and verifies the result.
pub fn construct_v(params: &GridParams) -> Result<GridWitness> {
    let case = &params.case;
    let lv = &params.levels;
    lv.check_ordering(case)?;
    let th = admissibility_threshold(case)?;
    let (level, value) = lv.base();
    if value <= th.threshold {
        return Err(WitnessError::BelowThreshold {
            level,
            value,
            threshold: th.threshold,
        });
    }
    let fams = families(case, lv);
    for (j, fam) in fams.iter().enumerate() {
        if !fam.contains(&params.q(j + 1).factorization()) {
            return Err(WitnessError::WrongFamily {
                j: j + 1,
                family: fam.label(),
            });
        }
    }
    let qdl = &params.qdl.value;
    if case.kind.is_ac() {
        check_modulus_bound(lv, qdl)?;
    }
    let cp = choose_parameters(case)?;
    let [p1, p2, p3] = case.forms();
    let (q1, q2, q3) = (&params.q1, &params.q2, &params.q3);
    let (r, k, l) = (lv.r, lv.k, lv.l);
    let mut roots = Vec::new();
    let mut cs = Vec::new();
    match case.kind {
        CaseKind::AcP2Reducible | CaseKind::AcP2Irreducible => {
            for p in sieve_primes(r) {
                let theta = q1.theta(p);
                let m = pow_u(p, 2 * theta);
                cs.push(Constraint {
                    residue: BigInt::from(&q1.value % &m),
                    modulus: m,
                });
            }
            let kappa = cp.kappa.unwrap();
            if case.kind == CaseKind::AcP2Reducible {
                let g = cp.gamma.unwrap();
                // 1 - gamma v = p^theta
                linear_window(r, k, -g, q2, &mut cs)?;
            } else {
                form_window(r, k, 2, &p2, q2, kappa, &mut roots, &mut cs)?;
            }
            form_window(k, l, 3, &p3, q3, kappa, &mut roots, &mut cs)?;
        }
        _ => {
            let s = lv.s.unwrap();
            for p in sieve_primes(s) {
                cs.push(Constraint {
                    residue: BigInt::zero(),
                    modulus: pow_u(p, (2 * s) as u32),
                });
            }
            form_window(s, r, 1, &p1, q1, 0, &mut roots, &mut cs)?;
            if case.kind == CaseKind::ApbAllIrreducible {
                form_window(r, k, 2, &p2, q2, 0, &mut roots, &mut cs)?;
            } else {
                linear_window(r, k, cp.lambdas[0], q2, &mut cs)?;
            }
            if case.kind == CaseKind::ApbBothReducible {
                linear_window(k, l, cp.lambdas[2], q3, &mut cs)?;
            } else {
                form_window(k, l, 3, &p3, q3, 0, &mut roots, &mut cs)?;
            }
        }
    }
    let pairs: Vec<(BigUint, BigUint)> = cs
        .into_iter()
        .map(|c| {
            let m = BigInt::from(c.modulus.clone());
            (c.residue.mod_floor(&m).to_biguint().expect("nonnegative"), c.modulus)
        })
        .collect();
    let (v, crt_modulus) = numeric::crt_solve(&pairs)?;
    if !crt_modulus.is_factor_of(qdl) {
        return Err(WitnessError::BadOrdering(
            "CRT modulus does not divide Q_{delta,L}".into(),
        ));
    }
    let mut w = GridWitness {
        v,
        crt_modulus,
        parameters: cp,
        hensel_roots: roots,
        report: ConditionReport { conditions: Vec::new() },
    };
    w.report = verify_witness(params, &w);
    Ok(w)
}

trait FactorOf {
    fn is_factor_of(&self, n: &BigUint) -> bool;
}

impl FactorOf for BigUint {
    fn is_factor_of(&self, n: &BigUint) -> bool {
        !self.is_zero() && (n % self).is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CofactorValue {
    pub j: usize,
    pub m: u64,
    pub n: u64,
    /// R_j; signed because P_j(Qm + 1, Qn + v) can be negative.
    #[serde(with = "signed_big")]
    pub value: BigInt,
    /// Closed-form R_j where one is implemented, and whether it matched.
    pub closed_form_agrees: Option<bool>,
}

mod signed_big {
    use std::str::FromStr;

    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        BigInt::from_str(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// R_j = P_j(Q m + 1, Q n + v) / Q_j by exact division.
pub fn cofactor(params: &GridParams, witness: &GridWitness, j: usize, m: u64, n: u64) -> Result<CofactorValue> {
    if !(1..=3).contains(&j) {
        return Err(WitnessError::IndexOutOfRange(j));
    }
    if m == 0 || n == 0 {
        return Err(WitnessError::InvalidArgument("m, n must be positive".into()));
    }
    let q = BigInt::from(params.qdl.value.clone());
    let v = BigInt::from(witness.v.clone());
    let mm = &q * m + 1;
    let nn = &q * n + &v;
    let form = params.case.forms()[j - 1];
    let p = form.eval(&mm, &nn);
    let qj = BigInt::from(params.q(j).value.clone());
    let (value, rem) = p.div_rem(&qj);
    if !rem.is_zero() {
        return Err(WitnessError::DivisibilityFailure { j, m, n });
    }
    let closed = closed_form(params, witness, j, m, n);
    Ok(CofactorValue {
        j,
        m,
        n,
        closed_form_agrees: closed.map(|c| c == value),
        value,
    })
}

/// R1, R2 of the a = c case with P2 split as (m - gamma n)(m + gamma n).
fn closed_form(params: &GridParams, witness: &GridWitness, j: usize, m: u64, n: u64) -> Option<BigInt> {
    if params.case.kind != CaseKind::AcP2Reducible {
        return None;
    }
    let q = BigInt::from(params.qdl.value.clone());
    let v = BigInt::from(witness.v.clone());
    let (m, n) = (BigInt::from(m), BigInt::from(n));
    let g = BigInt::from(witness.parameters.gamma?);
    let a = BigInt::from(params.case.a);
    match j {
        1 => {
            let q1 = BigInt::from(params.q1.value.clone());
            Some(BigInt::from(2) * a * (&q * &m + 1) * (&q / &q1 * &n + &v / &q1))
        }
        2 => {
            let q2 = BigInt::from(params.q2.value.clone());
            let one_minus = BigInt::one() - &g * &v;
            let first = &q / &q2 * (&m - &g * &n) + &one_minus / &q2;
            let second = &q * (&m + &g * &n) + 1 + &g * &v;
            Some(first * second)
        }
        _ => None,
    }
}

/// Witness record exchanged through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub params: GridParams,
    pub witness: GridWitness,
}

/// Draws (or enumerates) element combinations from the three boxes.
/// Exhaustive when the product of cardinalities is at most `cap`,
/// otherwise `samples` seeded draws.
pub fn element_combinations(
    case: &CaseTag,
    lv: &Levels,
    cap: u128,
    samples: usize,
    seed: u64,
) -> Result<(folner::AveragingMode, Vec<[FolnerElement; 3]>)> {
    let fams = families(case, lv);
    let total = fams.iter().fold(BigUint::one(), |acc, f| acc * f.cardinality());
    if total <= BigUint::from(cap) {
        let lists: Vec<Vec<FolnerElement>> = fams
            .iter()
            .map(|f| folner::enumerate(f, cap).map(|it| it.collect()))
            .collect::<std::result::Result<_, _>>()?;
        let mut out = Vec::new();
        for a in &lists[0] {
            for b in &lists[1] {
                for c in &lists[2] {
                    out.push([a.clone(), b.clone(), c.clone()]);
                }
            }
        }
        return Ok((folner::AveragingMode::Exhaustive, out));
    }
    let supports: Vec<Vec<u64>> = fams.iter().map(|f| f.support()).collect();
    let out = (0..samples as u64)
        .map(|i| {
            [0usize, 1, 2].map(|j| folner::sample_at(&fams[j], &supports[j], seed.wrapping_add(j as u64), i))
        })
        .collect();
    Ok((folner::AveragingMode::Sampled, out))
}

/// Shift of the factor criteria: v = Q^{-1} mod p^r for p <= r and
/// v = 1 mod p for r < p <= K.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorShift {
    #[serde(with = "crate::serde_big")]
    pub v: BigUint,
    #[serde(with = "crate::serde_big")]
    pub modulus: BigUint,
}

pub fn factor_shift(spec: &FolnerSpec, q: &FolnerElement) -> Result<FactorShift> {
    let (r, k) = match spec {
        FolnerSpec::PhiRK { r, k } | FolnerSpec::PhiRKP { r, k, .. } => (*r, *k),
        FolnerSpec::PhiR { .. } => {
            return Err(WitnessError::WrongFamily {
                j: 0,
                family: "Phi_{r,K} or Phi_{r,K,P}".into(),
            })
        }
    };
    if !spec.contains(&q.factorization()) {
        return Err(WitnessError::WrongFamily { j: 0, family: spec.label() });
    }
    let mut pairs = Vec::new();
    let mut low = BigUint::one();
    let mut rad = BigUint::one();
    for p in sieve_primes(k) {
        rad *= p;
        if p <= r {
            let m = pow_u(p, r as u32);
            low *= &m;
            pairs.push((mod_inverse(&(&q.value % &m), &m)?, m));
        } else {
            pairs.push((BigUint::from(1 % p), BigUint::from(p)));
        }
    }
    let (v, modulus) = numeric::crt_solve(&pairs)?;
    debug_assert!(v.gcd(&rad).is_one());
    debug_assert!((&v * &q.value % &low).is_one() || low.is_one());
    Ok(FactorShift { v, modulus })
}

/// Re-checks gcd(v, prod_{p <= K} p) = 1 and v Q = 1 mod prod_{p <= r} p^r.
pub fn check_factor_shift(spec: &FolnerSpec, q: &FolnerElement, shift: &FactorShift) -> bool {
    let (r, k) = match spec {
        FolnerSpec::PhiRK { r, k } | FolnerSpec::PhiRKP { r, k, .. } => (*r, *k),
        FolnerSpec::PhiR { .. } => return false,
    };
    let rad: BigUint = sieve_primes(k).into_iter().map(BigUint::from).product();
    let low: BigUint = sieve_primes(r).into_iter().map(|p| pow_u(p, r as u32)).product();
    shift.v.gcd(&rad).is_one() && (&shift.v * &q.value % &low) == (BigUint::one() % &low)
}
