//! Multiplicative Følner boxes Phi_r, Phi_{r,K}, Phi_{r,K,P}, the moduli
//! Q_L and Q_{delta,L}, and dilation diagnostics.

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::hiprec::{self, CircleCertificate, CircleReducer, Fixed};
use crate::numeric::{sieve_primes, Factorization};
use crate::quadforms::{omega_prime, BinaryQuadraticForm};

/// Default bound on exhaustive enumeration.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Precision, in bits, of circle positions of Q_{delta,L}.
pub const CERTIFICATE_BITS: u32 = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FolnerError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("TooLarge: {cardinality} elements exceed the enumeration cap {cap}")]
    TooLarge { cardinality: String, cap: u128 },
    #[error("PrimeNotInSupport: {0}")]
    PrimeNotInSupport(u64),
    #[error("InvalidDelta: {0} is outside (0, 2]")]
    InvalidDelta(f64),
    #[error("NotFoundWithinCap: no shift n <= {cap} brings Q_L 2^n within {delta} of 1")]
    NotFoundWithinCap { cap: u64, delta: f64 },
    #[error("ZeroCount: sample size must be positive")]
    ZeroCount,
}

pub type Result<T> = std::result::Result<T, FolnerError>;

/// Phi_r: primes p <= r with r < theta_p <= 3r/2.
/// Phi_{r,K}: primes r < p <= K with K < theta_p <= 3K/2.
/// Phi_{r,K,P}: as Phi_{r,K} restricted to primes with omega_P(p) > 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FolnerSpec {
    PhiR { r: u64 },
    PhiRK { r: u64, k: u64 },
    PhiRKP { r: u64, k: u64, form: BinaryQuadraticForm },
}

impl FolnerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FolnerSpec::PhiR { r } if r < 2 => Err(FolnerError::InvalidSpec(format!("r = {r} < 2"))),
            FolnerSpec::PhiRK { r, k } | FolnerSpec::PhiRKP { r, k, .. } if r < 2 || k <= r => {
                Err(FolnerError::InvalidSpec(format!("need 2 <= r < K, got r = {r}, K = {k}")))
            }
            _ => Ok(()),
        }
    }

    /// Exponent window `(lo, hi]`.
    pub fn window(&self) -> (u32, u32) {
        let base = match *self {
            FolnerSpec::PhiR { r } => r,
            FolnerSpec::PhiRK { k, .. } | FolnerSpec::PhiRKP { k, .. } => k,
        };
        (base as u32, (3 * base / 2) as u32)
    }

    pub fn window_size(&self) -> u32 {
        let (lo, hi) = self.window();
        hi - lo
    }

    /// Primes carrying an exponent, ascending.
    pub fn support(&self) -> Vec<u64> {
        match self {
            FolnerSpec::PhiR { r } => sieve_primes(*r),
            FolnerSpec::PhiRK { r, k } => sieve_primes(*k).into_iter().filter(|p| p > r).collect(),
            FolnerSpec::PhiRKP { r, k, form } => sieve_primes(*k)
                .into_iter()
                .filter(|&p| p > *r && omega_prime(form, p) > 0)
                .collect(),
        }
    }

    /// |Phi| = window_size ^ |support|.
    pub fn cardinality(&self) -> BigUint {
        BigUint::from(self.window_size()).pow(self.support().len() as u32)
    }

    pub fn contains(&self, q: &Factorization) -> bool {
        let support = self.support();
        let (lo, hi) = self.window();
        q.factors.len() == support.len()
            && q
                .factors
                .iter()
                .zip(&support)
                .all(|(&(p, e), &s)| p == s && e > lo && e <= hi)
    }

    pub fn label(&self) -> String {
        match self {
            FolnerSpec::PhiR { r } => format!("Phi_{r}"),
            FolnerSpec::PhiRK { r, k } => format!("Phi_{{{r},{k}}}"),
            FolnerSpec::PhiRKP { r, k, form } => format!("Phi_{{{r},{k},{form}}}"),
        }
    }
}

/// Q = prod p^theta_p over the support of a Følner box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolnerElement {
    pub exponents: Vec<(u64, u32)>,
    #[serde(with = "crate::serde_big")]
    pub value: BigUint,
}

impl FolnerElement {
    pub fn from_exponents(exponents: Vec<(u64, u32)>) -> Self {
        let value = exponents
            .iter()
            .fold(BigUint::one(), |acc, &(p, e)| acc * BigUint::from(p).pow(e));
        Self { exponents, value }
    }

    pub fn theta(&self, p: u64) -> u32 {
        self.exponents.iter().find(|&&(q, _)| q == p).map(|&(_, e)| e).unwrap_or(0)
    }

    pub fn factorization(&self) -> Factorization {
        Factorization::from_pairs(self.exponents.iter().copied())
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.exponents.iter().map(|&(p, _)| p)
    }
}

/// Lexicographic stream over a Følner box; the last prime varies fastest.
pub struct FolnerIter {
    support: Vec<u64>,
    lo: u32,
    hi: u32,
    current: Option<Vec<u32>>,
}

impl Iterator for FolnerIter {
    type Item = FolnerElement;

    fn next(&mut self) -> Option<FolnerElement> {
        let cur = self.current.as_mut()?;
        let out = FolnerElement::from_exponents(self.support.iter().copied().zip(cur.iter().copied()).collect());
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.hi {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = self.lo + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Every element of the box once, lexicographic in the exponent vector.
/// An empty support yields the single element 1.
pub fn enumerate(spec: &FolnerSpec, cap: u128) -> Result<FolnerIter> {
    spec.validate()?;
    let card = spec.cardinality();
    if card > BigUint::from(cap) {
        return Err(FolnerError::TooLarge {
            cardinality: card.to_string(),
            cap,
        });
    }
    let support = spec.support();
    let (lo, hi) = spec.window();
    let current = if hi > lo { Some(vec![lo + 1; support.len()]) } else { None };
    Ok(FolnerIter { support, lo, hi, current })
}

/// The element drawn at position `index` of the stream seeded by `seed`.
pub fn sample_at(spec: &FolnerSpec, support: &[u64], seed: u64, index: u64) -> FolnerElement {
    let (lo, hi) = spec.window();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    FolnerElement::from_exponents(support.iter().map(|&p| (p, rng.gen_range(lo + 1..=hi))).collect())
}

/// Independent uniform draws; deterministic in `(seed, index)`.
pub fn sample(spec: &FolnerSpec, count: usize, seed: u64) -> Result<Vec<FolnerElement>> {
    spec.validate()?;
    if count == 0 {
        return Err(FolnerError::ZeroCount);
    }
    let support = spec.support();
    Ok((0..count as u64).map(|i| sample_at(spec, &support, seed, i)).collect())
}

/// How an average over a box was realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    Exhaustive,
    Sampled,
}

/// All elements if the box is small enough, otherwise `samples` draws.
pub fn elements(spec: &FolnerSpec, samples: usize, seed: u64) -> Result<(AveragingMode, Vec<FolnerElement>)> {
    match enumerate(spec, ENUMERATION_CAP) {
        Ok(it) => Ok((AveragingMode::Exhaustive, it.collect())),
        Err(FolnerError::TooLarge { .. }) => Ok((AveragingMode::Sampled, sample(spec, samples, seed)?)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DefectMode {
    Exact,
    Sampled { count: usize, seed: u64 },
}

/// |p Phi symmetric-difference Phi| / |Phi|, capped at 1.
pub fn dilation_defect(spec: &FolnerSpec, p: u64, mode: DefectMode) -> Result<f64> {
    spec.validate()?;
    if !spec.support().contains(&p) {
        return Err(FolnerError::PrimeNotInSupport(p));
    }
    let w = spec.window_size() as f64;
    match mode {
        DefectMode::Exact => Ok((2.0 / w).min(1.0)),
        DefectMode::Sampled { count, seed } => {
            // |p Phi \ Phi| = |Phi \ p Phi| = #{Q : theta_p(Q) = top of window}
            let (_, hi) = spec.window();
            let draws = sample(spec, count, seed)?;
            let off = draws.iter().filter(|q| q.theta(p) == hi).count() as f64;
            Ok((2.0 * off / count as f64).min(1.0))
        }
    }
}

/// Q_L = prod over p <= L of p^{2L}.
pub fn q_l(l: u64) -> (BigUint, Factorization) {
    let f = Factorization::from_pairs(sieve_primes(l).into_iter().map(|p| (p, (2 * l) as u32)));
    (f.value(), f)
}

/// Q_{delta,L} = 2^n Q_L with the least n >= 1 such that |Q^i - 1| <= delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDeltaL {
    pub delta: f64,
    pub l: u64,
    pub n_shift: u64,
    #[serde(with = "crate::serde_big")]
    pub value: BigUint,
    pub factorization: Factorization,
    /// Signed angle of value^i in radians.
    pub angle: f64,
    pub angle_error: f64,
    pub chord: f64,
}

fn within(cert: &CircleCertificate, delta: f64) -> bool {
    let a = cert.angle.abs() + cert.error_bound;
    a <= std::f64::consts::PI && 2.0 * (a / 2.0).sin() <= delta
}

fn ln_q_l(l: u64, work: u32) -> Fixed {
    let factors: Vec<(u64, u64)> = sieve_primes(l).into_iter().map(|p| (p, 2 * l)).collect();
    hiprec::ln_factored(&factors, work)
}

pub fn find_q_delta_l(delta: f64, l: u64, search_cap: u64) -> Result<QDeltaL> {
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(FolnerError::InvalidDelta(delta));
    }
    let work = hiprec::working_bits(CERTIFICATE_BITS);
    let reducer = CircleReducer::new(work);
    let ln2 = hiprec::ln2(work);
    let mut x = ln_q_l(l, work);
    for n in 1..=search_cap {
        x = hiprec::fixed_add(&x, &ln2);
        let cert = reducer.reduce(&x, CERTIFICATE_BITS);
        if delta >= 2.0 || within(&cert, delta) {
            let (ql, qf) = q_l(l);
            let factorization = qf.mul(&Factorization::from_pairs([(2, n as u32)]));
            return Ok(QDeltaL {
                delta,
                l,
                n_shift: n,
                value: ql << n as usize,
                factorization,
                angle: cert.angle,
                angle_error: cert.error_bound,
                chord: cert.chord(),
            });
        }
    }
    Err(FolnerError::NotFoundWithinCap { cap: search_cap, delta })
}

/// Recomputes the circle position of Q_{delta,L} from its factorization at
/// `bits` bits and checks |Q^i - 1| <= delta.
pub fn certify_q_delta_l(q: &QDeltaL, bits: u32) -> (bool, CircleCertificate) {
    let factors: Vec<(u64, u64)> = q.factorization.factors.iter().map(|&(p, e)| (p, e as u64)).collect();
    let cert = hiprec::circle_position(&factors, bits);
    let ok = q.factorization.value() == q.value && (q.delta >= 2.0 || within(&cert, q.delta));
    (ok, cert)
}
