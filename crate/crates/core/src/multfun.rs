//! Completely multiplicative S^1-valued functions, Dirichlet characters and
//! their lifts, pretentious distance and the partial sums F_N, G_{P,N}.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{
    self, factorize, factorize_u64, is_prime, sieve_primes, unit_power, unit_power_big, valuation_u64,
    valuation_unchecked, Factorization, NumericError, UnitComplex,
};
use crate::quadforms::{omega_prime, BinaryQuadraticForm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultError {
    #[error("MissingFill: no value supplied at prime {0} dividing the modulus")]
    MissingFill(u64),
    #[error("ZeroArgument: evaluation needs n >= 1")]
    ZeroArgument,
    #[error("InvalidCharacter: modulus {modulus} has no character with index {index}")]
    InvalidCharacter { modulus: u64, index: usize },
    #[error("ReducibleForm: {0}")]
    ReducibleForm(String),
    #[error("InvalidRange: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

pub type Result<T> = std::result::Result<T, MultError>;

/// One cyclic factor of (Z/q)^x: a generator of order `order` modulo
/// `modulus`, with a discrete-log table.
struct Component {
    modulus: u64,
    order: u64,
    dlog: Vec<Option<u64>>,
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let (mut r, mut b) = (1u128 % m as u128, b as u128 % m as u128);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m as u128;
        }
        b = b * b % m as u128;
        e >>= 1;
    }
    r as u64
}

fn primitive_root_prime_power(p: u64, e: u32) -> u64 {
    let ell: Vec<u64> = factorize_u64(p - 1).expect("p >= 2").primes().collect();
    let g = (2..p.max(3))
        .find(|&g| ell.iter().all(|&l| pow_mod(g, (p - 1) / l, p) != 1))
        .unwrap_or(1);
    if p == 2 {
        return 1;
    }
    if e >= 2 && pow_mod(g, p - 1, p * p) == 1 {
        g + p
    } else {
        g
    }
}

fn cyclic_component(modulus: u64, generator: u64, order: u64) -> Component {
    let mut dlog = vec![None; modulus as usize];
    let mut x = 1 % modulus;
    for k in 0..order {
        dlog[x as usize] = Some(k);
        x = x * generator % modulus;
    }
    Component { modulus, order, dlog }
}

fn components(q: u64) -> Vec<Component> {
    let mut out = Vec::new();
    for &(p, e) in &factorize_u64(q).expect("q >= 1").factors {
        let m = p.pow(e);
        if p == 2 {
            match e {
                1 => {}
                2 => out.push(cyclic_component(4, 3, 2)),
                _ => {
                    // n = (-1)^a 5^b mod 2^e
                    let mut sign = vec![None; m as usize];
                    let five = cyclic_component(m, 5, m / 4);
                    let mut pos = vec![None; m as usize];
                    for n in (1..m).step_by(2) {
                        let a = u64::from(n % 4 == 3);
                        sign[n as usize] = Some(a);
                        let unsigned = if a == 1 { m - n } else { n };
                        pos[n as usize] = five.dlog[unsigned as usize];
                    }
                    out.push(Component { modulus: m, order: 2, dlog: sign });
                    out.push(Component { modulus: m, order: m / 4, dlog: pos });
                }
            }
        } else {
            let g = primitive_root_prime_power(p, e);
            out.push(cyclic_component(m, g, m / p * (p - 1)));
        }
    }
    out
}

fn euler_phi(q: u64) -> u64 {
    factorize_u64(q)
        .expect("q >= 1")
        .factors
        .iter()
        .map(|&(p, e)| p.pow(e - 1) * (p - 1))
        .product()
}

/// A Dirichlet character mod q. Values on units are e(k / order); non-units
/// map to zero (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CharacterSpec", into = "CharacterSpec")]
pub struct DirichletCharacter {
    modulus: u64,
    index: usize,
    order: u64,
    table: Vec<Option<u64>>,
    prime_divisors: Vec<u64>,
}

/// Serialized handle: the modulus and the position in `characters_mod`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterSpec {
    pub modulus: u64,
    pub index: usize,
}

impl TryFrom<CharacterSpec> for DirichletCharacter {
    type Error = MultError;
    fn try_from(s: CharacterSpec) -> Result<Self> {
        DirichletCharacter::new(s.modulus, s.index)
    }
}

impl From<DirichletCharacter> for CharacterSpec {
    fn from(c: DirichletCharacter) -> Self {
        CharacterSpec {
            modulus: c.modulus,
            index: c.index,
        }
    }
}

impl DirichletCharacter {
    /// The `index`-th character mod q in the order used by `characters_mod`.
    /// Index 0 is the principal character.
    pub fn new(q: u64, index: usize) -> Result<Self> {
        if q == 0 || index as u64 >= euler_phi(q.max(1)) {
            return Err(MultError::InvalidCharacter { modulus: q, index });
        }
        Ok(Self::build(q, &components(q), index))
    }

    pub fn principal(q: u64) -> Self {
        Self::new(q, 0).expect("q >= 1")
    }

    fn build(q: u64, comps: &[Component], index: usize) -> Self {
        let order = comps.iter().fold(1u64, |acc, c| acc.lcm(&c.order));
        // mixed radix digits, first component most significant
        let mut digits = vec![0u64; comps.len()];
        let mut rest = index as u64;
        for (i, c) in comps.iter().enumerate().rev() {
            digits[i] = rest % c.order;
            rest /= c.order;
        }
        let table = (0..q)
            .map(|n| {
                if n.gcd(&q) != 1 {
                    return None;
                }
                let mut k = 0u64;
                for (c, &j) in comps.iter().zip(&digits) {
                    let d = c.dlog[(n % c.modulus) as usize].expect("unit");
                    k = (k + j * d % c.order * (order / c.order)) % order;
                }
                Some(k)
            })
            .collect();
        let prime_divisors = factorize_u64(q).expect("q >= 1").primes().collect();
        Self {
            modulus: q,
            index,
            order,
            table,
            prime_divisors,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Exponent of the group of values: every value is a root of unity of
    /// this order.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn prime_divisors(&self) -> &[u64] {
        &self.prime_divisors
    }

    pub fn is_principal(&self) -> bool {
        self.table.iter().flatten().all(|&k| k == 0)
    }

    /// chi(n) as a residue-class lookup; `None` off the units.
    pub fn value(&self, n: u64) -> Option<UnitComplex> {
        self.value_exponent(n % self.modulus)
            .map(|k| UnitComplex::from_turns(k as f64 / self.order as f64))
    }

    /// chi(n) for a signed argument.
    pub fn value_signed(&self, n: i128) -> Option<UnitComplex> {
        self.value(n.rem_euclid(self.modulus as i128) as u64)
    }

    pub fn value_big(&self, n: &BigUint) -> Option<UnitComplex> {
        let r = (n % self.modulus).to_u64().expect("reduced");
        self.value(r)
    }

    fn value_exponent(&self, r: u64) -> Option<u64> {
        self.table[r as usize]
    }

    /// Complex value, zero off the units.
    pub fn value_complex(&self, n: u64) -> Complex64 {
        self.value(n).map(UnitComplex::to_complex).unwrap_or_default()
    }
}

/// All phi(q) characters mod q; the first is principal.
pub fn characters_mod(q: u64) -> Vec<DirichletCharacter> {
    assert!(q >= 1, "modulus must be positive");
    let comps = components(q);
    (0..euler_phi(q) as usize)
        .map(|i| DirichletCharacter::build(q, &comps, i))
        .collect()
}

/// Smallest period of n -> chi(n) on all of N, zeros included.
pub fn conductor(chi: &DirichletCharacter) -> u64 {
    let q = chi.modulus;
    let mut divisors: Vec<u64> = (1..=q).filter(|d| q % d == 0).collect();
    divisors.sort_unstable();
    for d in divisors {
        if (0..q).all(|n| chi.table[n as usize] == chi.table[((n + d) % q) as usize]) {
            return d;
        }
    }
    q
}

/// Formula rules for `PrimeFormula`; each is evaluated for p >= 3 and
/// gives 1 at p = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimeRule {
    /// p -> e(1 / ln ln p)
    InverseLogLog,
    /// p -> e(1 / ln p)
    InverseLog,
}

impl PrimeRule {
    fn turns(self, p: u64) -> f64 {
        if p < 3 {
            return 0.0;
        }
        let lp = (p as f64).ln();
        match self {
            PrimeRule::InverseLogLog => 1.0 / lp.ln(),
            PrimeRule::InverseLog => 1.0 / lp,
        }
    }
}

/// Descriptor of a completely multiplicative f: N -> S^1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplicativeFunction {
    One,
    Archimedean {
        t: f64,
    },
    CharacterLift {
        chi: DirichletCharacter,
        /// Values (in turns) at the primes dividing the modulus.
        #[serde(with = "prime_map")]
        fill: BTreeMap<u64, UnitComplex>,
    },
    PrimeFormula {
        rule: PrimeRule,
    },
    Tweaked {
        base: Box<MultiplicativeFunction>,
        #[serde(with = "prime_map")]
        overrides: BTreeMap<u64, UnitComplex>,
    },
    Product {
        left: Box<MultiplicativeFunction>,
        right: Box<MultiplicativeFunction>,
    },
    Power {
        base: Box<MultiplicativeFunction>,
        k: i64,
    },
    Conjugate {
        base: Box<MultiplicativeFunction>,
    },
}

// Internally tagged enums buffer their content, which loses integer map keys,
// so prime-indexed maps travel as lists of [p, turns] pairs.
mod prime_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::numeric::UnitComplex;

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, UnitComplex>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, UnitComplex>, D::Error> {
        Ok(Vec::<(u64, UnitComplex)>::deserialize(d)?.into_iter().collect())
    }
}

/// Syntactic class of a descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescriptorClass {
    Archimedean,
    FiniteSupportLift,
    FiniteSupportLiftForForm(BinaryQuadraticForm),
    DeclaredOscillating,
    Unknown,
}

use MultiplicativeFunction as MF;

impl MultiplicativeFunction {
    pub fn archimedean(t: f64) -> Self {
        MF::Archimedean { t }
    }

    /// Lift of chi with the same fill value at every prime dividing q.
    pub fn lift(chi: DirichletCharacter, fill: UnitComplex) -> Self {
        let fill = chi.prime_divisors().iter().map(|&p| (p, fill)).collect();
        MF::CharacterLift { chi, fill }
    }

    pub fn character_lift(chi: DirichletCharacter, fill: BTreeMap<u64, UnitComplex>) -> Result<Self> {
        for &p in chi.prime_divisors() {
            if !fill.contains_key(&p) {
                return Err(MultError::MissingFill(p));
            }
        }
        Ok(MF::CharacterLift { chi, fill })
    }

    pub fn tweaked(base: MultiplicativeFunction, overrides: BTreeMap<u64, UnitComplex>) -> Self {
        MF::Tweaked {
            base: Box::new(base),
            overrides,
        }
    }

    pub fn product(left: MultiplicativeFunction, right: MultiplicativeFunction) -> Self {
        MF::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn power(base: MultiplicativeFunction, k: i64) -> Self {
        MF::Power {
            base: Box::new(base),
            k,
        }
    }

    pub fn conjugate(base: MultiplicativeFunction) -> Self {
        MF::Conjugate { base: Box::new(base) }
    }

    /// Checks that every character lift has a fill at each prime of its
    /// modulus and that overrides sit on primes.
    pub fn validate(&self) -> Result<()> {
        match self {
            MF::One | MF::Archimedean { .. } | MF::PrimeFormula { .. } => Ok(()),
            MF::CharacterLift { chi, fill } => {
                for &p in chi.prime_divisors() {
                    if !fill.contains_key(&p) {
                        return Err(MultError::MissingFill(p));
                    }
                }
                Ok(())
            }
            MF::Tweaked { base, overrides } => {
                for &p in overrides.keys() {
                    if !is_prime(p) {
                        return Err(NumericError::NotPrime(p).into());
                    }
                }
                base.validate()
            }
            MF::Product { left, right } => {
                left.validate()?;
                right.validate()
            }
            MF::Power { base, .. } | MF::Conjugate { base } => base.validate(),
        }
    }

    /// f(n) for n >= 1.
    pub fn eval(&self, n: u64) -> Result<UnitComplex> {
        if n == 0 {
            return Err(MultError::ZeroArgument);
        }
        self.eval_nz(n)
    }

    fn eval_nz(&self, n: u64) -> Result<UnitComplex> {
        Ok(match self {
            MF::One => UnitComplex::ONE,
            MF::Archimedean { t } => unit_power(n, *t),
            MF::CharacterLift { chi, fill } => {
                let mut rest = n;
                let mut acc = UnitComplex::ONE;
                for &p in chi.prime_divisors() {
                    let w = *fill.get(&p).ok_or(MultError::MissingFill(p))?;
                    let mut e = 0;
                    while rest % p == 0 {
                        rest /= p;
                        e += 1;
                    }
                    if e > 0 {
                        acc = acc * w.pow(e);
                    }
                }
                acc * chi.value(rest).expect("coprime to the modulus")
            }
            MF::PrimeFormula { rule } => {
                let f = factorize_u64(n)?;
                UnitComplex::from_turns(f.factors.iter().map(|&(p, e)| e as f64 * rule.turns(p)).sum())
            }
            MF::Tweaked { base, overrides } => {
                let mut acc = base.eval_nz(n)?;
                for (&p, &w) in overrides {
                    let e = valuation_u64(p, n);
                    if e > 0 {
                        acc = acc * (w * base.eval_nz(p)?.conj()).pow(e as i64);
                    }
                }
                acc
            }
            MF::Product { left, right } => left.eval_nz(n)? * right.eval_nz(n)?,
            MF::Power { base, k } => base.eval_nz(n)?.pow(*k),
            MF::Conjugate { base } => base.eval_nz(n)?.conj(),
        })
    }

    /// f(n) for an arbitrary natural number. Only `PrimeFormula` needs a
    /// factorization; every other kind is evaluated structurally.
    pub fn eval_big(&self, n: &BigUint) -> Result<UnitComplex> {
        if n.is_zero() {
            return Err(MultError::ZeroArgument);
        }
        if let Some(x) = n.to_u64() {
            return self.eval_nz(x);
        }
        Ok(match self {
            MF::One => UnitComplex::ONE,
            MF::Archimedean { t } => unit_power_big(n, *t),
            MF::CharacterLift { chi, fill } => {
                let mut rest = n.clone();
                let mut acc = UnitComplex::ONE;
                for &p in chi.prime_divisors() {
                    let w = *fill.get(&p).ok_or(MultError::MissingFill(p))?;
                    let e = valuation_unchecked(p, &rest);
                    if e > 0 {
                        rest /= BigUint::from(p).pow(e);
                        acc = acc * w.pow(e as i64);
                    }
                }
                acc * chi.value_big(&rest).expect("coprime to the modulus")
            }
            MF::PrimeFormula { rule } => {
                let f = factorize(n)?;
                UnitComplex::from_turns(f.factors.iter().map(|&(p, e)| e as f64 * rule.turns(p)).sum())
            }
            MF::Tweaked { base, overrides } => {
                let mut acc = base.eval_big(n)?;
                for (&p, &w) in overrides {
                    let e = valuation_unchecked(p, n);
                    if e > 0 {
                        acc = acc * (w * base.eval_nz(p)?.conj()).pow(e as i64);
                    }
                }
                acc
            }
            MF::Product { left, right } => left.eval_big(n)? * right.eval_big(n)?,
            MF::Power { base, k } => base.eval_big(n)?.pow(*k),
            MF::Conjugate { base } => base.eval_big(n)?.conj(),
        })
    }

    /// f evaluated on a known factorization.
    pub fn eval_factored(&self, f: &Factorization) -> Result<UnitComplex> {
        let mut acc = UnitComplex::ONE;
        for &(p, e) in &f.factors {
            acc = acc * self.eval_nz(p)?.pow(e as i64);
        }
        Ok(acc)
    }

    /// f(num/den) = f(num) conj(f(den)).
    pub fn eval_rational(&self, num: u64, den: u64) -> Result<UnitComplex> {
        Ok(self.eval(num)? * self.eval(den)?.conj())
    }

    pub fn eval_rational_big(&self, num: &BigUint, den: &BigUint) -> Result<UnitComplex> {
        Ok(self.eval_big(num)? * self.eval_big(den)?.conj())
    }
}

/// Syntactic classification of a descriptor tree.
pub fn classify_descriptor(f: &MultiplicativeFunction) -> DescriptorClass {
    use DescriptorClass as C;
    match f {
        MF::One | MF::Archimedean { .. } => C::Archimedean,
        MF::CharacterLift { .. } => C::FiniteSupportLift,
        MF::PrimeFormula { .. } => C::DeclaredOscillating,
        MF::Tweaked { base, .. } => match classify_descriptor(base) {
            C::Archimedean | C::FiniteSupportLift => C::FiniteSupportLift,
            C::FiniteSupportLiftForForm(p) => C::FiniteSupportLiftForForm(p),
            _ => C::Unknown,
        },
        MF::Product { left, right } => match (classify_descriptor(left), classify_descriptor(right)) {
            (C::Archimedean, C::Archimedean) => C::Archimedean,
            (C::Archimedean | C::FiniteSupportLift, C::Archimedean | C::FiniteSupportLift) => C::FiniteSupportLift,
            _ => C::Unknown,
        },
        MF::Power { base, .. } | MF::Conjugate { base } => match classify_descriptor(base) {
            C::DeclaredOscillating => C::Unknown,
            other => other,
        },
    }
}

/// Class relative to a form: a finite-support lift is in particular a
/// finite-support lift on the primes where the form has roots.
pub fn classify_for_form(f: &MultiplicativeFunction, form: &BinaryQuadraticForm) -> DescriptorClass {
    match classify_descriptor(f) {
        DescriptorClass::FiniteSupportLift => DescriptorClass::FiniteSupportLiftForForm(*form),
        other => other,
    }
}

/// The target chi(n) n^{it} at a prime; zero where chi vanishes.
pub fn target_at_prime(chi: &DirichletCharacter, t: f64, p: u64) -> Complex64 {
    match chi.value(p) {
        Some(c) => (c * unit_power(p, t)).to_complex(),
        None => Complex64::new(0.0, 0.0),
    }
}

fn primes_in(a: f64, b: f64) -> Vec<u64> {
    if !(b >= 2.0) || b < a {
        return Vec::new();
    }
    let hi = b.floor() as u64;
    sieve_primes(hi).into_iter().filter(|&p| (p as f64) > a).collect()
}

/// D(f, g; A, B) = (sum over A < p <= B of (1 - Re f(p) conj g(p)) / p)^{1/2}.
pub fn distance(f: &MultiplicativeFunction, g: &MultiplicativeFunction, a: f64, b: f64) -> Result<f64> {
    let mut s = 0.0;
    for p in primes_in(a, b) {
        let w = f.eval_nz(p)? * g.eval_nz(p)?.conj();
        s += (1.0 - w.re()) / p as f64;
    }
    Ok(s.max(0.0).sqrt())
}

/// D(f, chi n^{it}; A, B), with chi(p) = 0 at primes dividing q.
pub fn distance_to_target(f: &MultiplicativeFunction, chi: &DirichletCharacter, t: f64, a: f64, b: f64) -> Result<f64> {
    let mut s = 0.0;
    for p in primes_in(a, b) {
        let w = f.eval_nz(p)?.to_complex() * target_at_prime(chi, t, p).conj();
        s += (1.0 - w.re) / p as f64;
    }
    Ok(s.max(0.0).sqrt())
}

fn partial_sum(
    f: &MultiplicativeFunction,
    chi: &DirichletCharacter,
    t: f64,
    l: u64,
    n: u64,
    weight: impl Fn(u64) -> f64,
) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    if n <= l {
        return Ok(s);
    }
    for p in sieve_primes(n).into_iter().filter(|&p| p > l) {
        let w = weight(p);
        if w == 0.0 {
            continue;
        }
        let c = chi.value(p);
        let term = match c {
            Some(c) => (f.eval_nz(p)? * c.conj() * unit_power(p, -t)).to_complex() - 1.0,
            None => Complex64::new(-1.0, 0.0),
        };
        s += term * (w / p as f64);
    }
    Ok(s)
}

/// F_N(f, L) = sum over L < p <= N of (f(p) conj(chi(p)) p^{-it} - 1) / p.
pub fn f_partial(f: &MultiplicativeFunction, chi: &DirichletCharacter, t: f64, l: u64, n: u64) -> Result<Complex64> {
    partial_sum(f, chi, t, l, n, |_| 1.0)
}

/// G_{P,N}(f, L): as F_N with weights omega_P(p) / p.
pub fn g_partial(
    f: &MultiplicativeFunction,
    chi: &DirichletCharacter,
    t: f64,
    form: &BinaryQuadraticForm,
    l: u64,
    n: u64,
) -> Result<Complex64> {
    if !form.is_irreducible() {
        return Err(MultError::ReducibleForm(form.to_string()));
    }
    partial_sum(f, chi, t, l, n, |p| omega_prime(form, p) as f64)
}

/// Angle in turns of p^{it}: exposes the archimedean helper for callers that
/// combine values by hand.
pub fn archimedean_turns(n: &BigUint, t: f64) -> f64 {
    t * numeric::ln_big(n) / TAU
}
