//! Integer substrate: sieving, factorization, valuations, CRT, modular
//! inverses, Hensel lifting and unit-circle values.

pub mod hiprec;
mod unit;

pub use unit::{unit_power, unit_power_big, UnitComplex, UNIT_TOL};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadforms::BinaryQuadraticForm;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("ZeroArgument: {0} must be at least 1")]
    ZeroArgument(&'static str),
    #[error("NotPrime: {0} is not prime")]
    NotPrime(u64),
    #[error("IncompatibleCongruences: {0}")]
    IncompatibleCongruences(String),
    #[error("EmptyConstraints: crt_solve needs at least one congruence")]
    EmptyConstraints,
    #[error("NotInvertible: gcd({a}, {m}) = {g}")]
    NotInvertible { a: String, m: String, g: String },
    #[error("NotSimpleRoot: derivative vanishes at {z} mod {p}")]
    NotSimpleRoot { p: u64, z: String },
    #[error("NotARoot: {z} is not a root mod {p}")]
    NotARoot { p: u64, z: String },
    #[error("FactorizationTooHard: cofactor {0} exceeds 64 bits")]
    FactorizationTooHard(String),
}

pub type Result<T> = std::result::Result<T, NumericError>;

/// All primes `<= limit`, ascending.
pub fn sieve_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn split_u64(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_u64(d, out);
    split_u64(n / d, out);
}

/// Prime factorization as `(prime, exponent)` pairs sorted by prime.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Factorization {
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn one() -> Self {
        Self::default()
    }

    /// Builds from arbitrary (prime, exponent) pairs, merging repeats and
    /// dropping zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u32)>) -> Self {
        let mut v: Vec<(u64, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        v.sort_unstable();
        let mut factors: Vec<(u64, u32)> = Vec::with_capacity(v.len());
        for (p, e) in v {
            match factors.last_mut() {
                Some((q, f)) if *q == p => *f += e,
                _ => factors.push((p, e)),
            }
        }
        Self { factors }
    }

    pub fn value(&self) -> BigUint {
        let mut acc = BigUint::one();
        for &(p, e) in &self.factors {
            acc *= BigUint::from(p).pow(e);
        }
        acc
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .binary_search_by_key(&p, |&(q, _)| q)
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Factorization) -> Factorization {
        Factorization::from_pairs(self.factors.iter().chain(other.factors.iter()).copied())
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }
}

/// Factorization of a machine-sized integer.
pub fn factorize_u64(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(NumericError::ZeroArgument("n"));
    }
    let mut m = n;
    let mut pairs = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            pairs.push((p, e));
        }
    }
    let mut rest = Vec::new();
    split_u64(m, &mut rest);
    pairs.extend(rest.into_iter().map(|p| (p, 1)));
    Ok(Factorization::from_pairs(pairs))
}

/// Factorization of an arbitrary natural number. Trial division by primes
/// below 10^5 first; the remaining cofactor must fit in 64 bits.
pub fn factorize(n: &BigUint) -> Result<Factorization> {
    if n.is_zero() {
        return Err(NumericError::ZeroArgument("n"));
    }
    if let Some(x) = n.to_u64() {
        return factorize_u64(x);
    }
    let mut m = n.clone();
    let mut pairs = Vec::new();
    for p in small_primes() {
        if m.to_u64().is_some() {
            break;
        }
        let bp = BigUint::from(*p);
        let mut e = 0;
        loop {
            let (q, r) = m.div_rem(&bp);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        if e > 0 {
            pairs.push((*p, e));
        }
    }
    let rest = m
        .to_u64()
        .ok_or_else(|| NumericError::FactorizationTooHard(m.to_string()))?;
    let tail = factorize_u64(rest)?;
    pairs.extend(tail.factors);
    Ok(Factorization::from_pairs(pairs))
}

fn small_primes() -> &'static [u64] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| sieve_primes(100_000))
}

/// theta_p(a): the exponent of p fully dividing a.
pub fn valuation(p: u64, a: &BigUint) -> Result<u32> {
    if !is_prime(p) {
        return Err(NumericError::NotPrime(p));
    }
    if a.is_zero() {
        return Err(NumericError::ZeroArgument("a"));
    }
    Ok(valuation_unchecked(p, a))
}

pub(crate) fn valuation_unchecked(p: u64, a: &BigUint) -> u32 {
    if let Some(x) = a.to_u64() {
        return valuation_u64(p, x);
    }
    let bp = BigUint::from(p);
    let mut m = a.clone();
    let mut e = 0;
    loop {
        let (q, r) = m.div_rem(&bp);
        if !r.is_zero() {
            return e;
        }
        m = q;
        e += 1;
    }
}

pub(crate) fn valuation_u64(p: u64, mut a: u64) -> u32 {
    let mut e = 0;
    while a != 0 && a % p == 0 {
        a /= p;
        e += 1;
    }
    e
}

fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = r0.div_floor(&r1);
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let s2 = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if r0.sign() == Sign::Minus {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Solves a list of congruences `x = r_i (mod m_i)` with arbitrary moduli.
/// Returns the least nonnegative solution and the lcm of the moduli.
pub fn crt_solve(constraints: &[(BigUint, BigUint)]) -> Result<(BigUint, BigUint)> {
    if constraints.is_empty() {
        return Err(NumericError::EmptyConstraints);
    }
    let mut x = BigInt::zero();
    let mut m = BigInt::one();
    for (r, modulus) in constraints {
        if modulus.is_zero() {
            return Err(NumericError::ZeroArgument("modulus"));
        }
        let mi = BigInt::from(modulus.clone());
        let ri = BigInt::from(r.clone()).mod_floor(&mi);
        let (g, s, _) = ext_gcd(&m, &mi);
        let diff = &ri - &x;
        if !diff.is_multiple_of(&g) {
            return Err(NumericError::IncompatibleCongruences(format!(
                "{} mod {} conflicts with {} mod {}",
                x, m, ri, mi
            )));
        }
        let step = &mi / &g;
        let k = ((diff / &g) * s).mod_floor(&step);
        x += &m * k;
        m *= &step;
        x = x.mod_floor(&m);
    }
    Ok((x.to_biguint().expect("nonnegative"), m.to_biguint().expect("positive")))
}

/// Convenience wrapper over machine integers.
pub fn crt_solve_u64(constraints: &[(u64, u64)]) -> Result<(BigUint, BigUint)> {
    let c: Vec<(BigUint, BigUint)> = constraints
        .iter()
        .map(|&(r, m)| (BigUint::from(r), BigUint::from(m)))
        .collect();
    crt_solve(&c)
}

/// Inverse of `a` modulo `m` (m >= 2), in `(0, m)`.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Result<BigUint> {
    mod_inverse_int(&BigInt::from(a.clone()), m)
}

/// Inverse of a signed integer modulo `m`.
pub fn mod_inverse_int(a: &BigInt, m: &BigUint) -> Result<BigUint> {
    let mi = BigInt::from(m.clone());
    if m < &BigUint::from(2u32) {
        return Err(NumericError::NotInvertible {
            a: a.to_string(),
            m: m.to_string(),
            g: m.to_string(),
        });
    }
    let ar = a.mod_floor(&mi);
    let (g, s, _) = ext_gcd(&ar, &mi);
    if !g.is_one() {
        return Err(NumericError::NotInvertible {
            a: a.to_string(),
            m: m.to_string(),
            g: g.to_string(),
        });
    }
    Ok(s.mod_floor(&mi).to_biguint().expect("nonnegative"))
}

pub fn mod_inverse_u64(a: u64, m: u64) -> Result<u64> {
    mod_inverse(&BigUint::from(a), &BigUint::from(m)).map(|x| x.to_u64().expect("fits"))
}

/// Evaluates `c0 + c1 x + c2 x^2` exactly.
pub(crate) fn eval_quadratic(c: [i64; 3], x: &BigInt) -> BigInt {
    BigInt::from(c[0]) + x * (BigInt::from(c[1]) + x * BigInt::from(c[2]))
}

/// Newton-lifts a simple root `z` of `g` mod p to the unique root mod p^k
/// congruent to `z`. `g` is a quadratic given by coefficients.
pub(crate) fn lift_simple_root(c: [i64; 3], p: u64, k: u32, z: &BigInt) -> Result<BigUint> {
    let pb = BigInt::from(p);
    let pk = BigUint::from(p).pow(k);
    let pki = BigInt::from(pk.clone());
    let deriv = |x: &BigInt| BigInt::from(c[1]) + BigInt::from(2 * c[2]) * x;
    let z0 = z.mod_floor(&pb);
    if !eval_quadratic(c, &z0).is_multiple_of(&pb) {
        return Err(NumericError::NotARoot { p, z: z.to_string() });
    }
    if deriv(&z0).is_multiple_of(&pb) {
        return Err(NumericError::NotSimpleRoot { p, z: z.to_string() });
    }
    let mut x = z0;
    let mut prec = 1u32;
    while prec < k {
        prec = (prec * 2).min(k);
        let inv = mod_inverse_int(&deriv(&x), &pk)?;
        x = (&x - eval_quadratic(c, &x) * BigInt::from(inv)).mod_floor(&pki);
    }
    let x = x.mod_floor(&pki);
    debug_assert!(eval_quadratic(c, &x).is_multiple_of(&pki));
    Ok(x.to_biguint().expect("nonnegative"))
}

/// Lifts a simple root `z` of `P(1, x)` mod p to the unique root of
/// `g(x) = P(1, x) - p^theta` modulo `p^(theta + 1)` congruent to `z`.
pub fn hensel_lift(form: &BinaryQuadraticForm, p: u64, theta: u32, z: &BigUint) -> Result<BigUint> {
    if !is_prime(p) {
        return Err(NumericError::NotPrime(p));
    }
    let shift = BigInt::from(p).pow(theta);
    let c0 = BigInt::from(form.alpha) - shift;
    let pk = BigUint::from(p).pow(theta + 1);
    // reduce the constant term so the coefficient fits
    let c0r = c0
        .mod_floor(&BigInt::from(pk.clone()))
        .to_i64();
    let zi = BigInt::from(z.clone());
    match c0r {
        Some(c0s) => lift_simple_root([c0s, form.beta, form.gamma], p, theta + 1, &zi),
        None => lift_simple_root_big(
            [c0, BigInt::from(form.beta), BigInt::from(form.gamma)],
            p,
            theta + 1,
            &zi,
        ),
    }
}

fn lift_simple_root_big(c: [BigInt; 3], p: u64, k: u32, z: &BigInt) -> Result<BigUint> {
    let pb = BigInt::from(p);
    let pk = BigUint::from(p).pow(k);
    let pki = BigInt::from(pk.clone());
    let g = |x: &BigInt| &c[0] + x * (&c[1] + x * &c[2]);
    let deriv = |x: &BigInt| &c[1] + BigInt::from(2) * &c[2] * x;
    let z0 = z.mod_floor(&pb);
    if !g(&z0).is_multiple_of(&pb) {
        return Err(NumericError::NotARoot { p, z: z.to_string() });
    }
    if deriv(&z0).is_multiple_of(&pb) {
        return Err(NumericError::NotSimpleRoot { p, z: z.to_string() });
    }
    let mut x = z0;
    let mut prec = 1u32;
    while prec < k {
        prec = (prec * 2).min(k);
        let inv = mod_inverse_int(&deriv(&x), &pk)?;
        x = (&x - g(&x) * BigInt::from(inv)).mod_floor(&pki);
    }
    Ok(x.to_biguint().expect("nonnegative"))
}

/// Natural log of an arbitrary natural number as f64.
pub fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        return (n.to_u64().expect("fits") as f64).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().expect("fits") as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Product of the primes `<= k`.
pub fn primorial(k: u64) -> BigUint {
    sieve_primes(k).into_iter().fold(BigUint::one(), |acc, p| acc * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_is_prime(n: u64) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn sieve_examples() {
        assert_eq!(sieve_primes(10), vec![2, 3, 5, 7]);
        assert!(sieve_primes(1).is_empty());
        assert!(sieve_primes(0).is_empty());
        let ps = sieve_primes(100);
        assert_eq!(ps.len(), 25);
        let oracle: Vec<u64> = (0..=100).filter(|&n| trial_is_prime(n)).collect();
        assert_eq!(ps, oracle);
    }

    #[test]
    fn miller_rabin_matches_sieve() {
        let ps = sieve_primes(20_000);
        let from_mr: Vec<u64> = (0..=20_000).filter(|&n| is_prime(n)).collect();
        assert_eq!(ps, from_mr);
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize_u64(1).unwrap().factors.is_empty());
        assert_eq!(factorize_u64(12).unwrap().factors, vec![(2, 2), (3, 1)]);
        assert_eq!(factorize_u64(97).unwrap().factors, vec![(97, 1)]);
        assert!(matches!(factorize_u64(0), Err(NumericError::ZeroArgument(_))));
        let big = BigUint::from(2u32).pow(100) * BigUint::from(1_000_003u64) * BigUint::from(999_983u64);
        let f = factorize(&big).unwrap();
        assert_eq!(f.factors, vec![(2, 100), (999_983, 1), (1_000_003, 1)]);
        assert_eq!(f.value(), big);
    }

    #[test]
    fn factorize_reconstructs_up_to_a_million() {
        for n in 1..=1_000_000u64 {
            let f = factorize_u64(n).unwrap();
            assert_eq!(f.value(), BigUint::from(n), "n = {n}");
            assert!(f.factors.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(f.factors.iter().all(|&(p, e)| e >= 1 && is_prime(p)));
        }
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(2, &BigUint::from(12u32)).unwrap(), 2);
        assert_eq!(valuation(5, &BigUint::from(12u32)).unwrap(), 0);
        assert_eq!(valuation(3, &BigUint::from(27u32)).unwrap(), 3);
        assert_eq!(valuation(4, &BigUint::from(12u32)), Err(NumericError::NotPrime(4)));
        let big = BigUint::from(7u32).pow(90) * 10u32;
        assert_eq!(valuation(7, &big).unwrap(), 90);
    }

    #[test]
    fn crt_examples() {
        let (x, m) = crt_solve_u64(&[(1, 3), (2, 5)]).unwrap();
        assert_eq!((x, m), (BigUint::from(7u32), BigUint::from(15u32)));
        let (x, m) = crt_solve_u64(&[(0, 4), (2, 6)]).unwrap();
        assert_eq!((x, m), (BigUint::from(8u32), BigUint::from(12u32)));
        assert!(matches!(
            crt_solve_u64(&[(1, 2), (0, 2)]),
            Err(NumericError::IncompatibleCongruences(_))
        ));
        assert_eq!(crt_solve(&[]), Err(NumericError::EmptyConstraints));
    }

    #[test]
    fn crt_matches_exhaustive_scan() {
        // all pairs of moduli with lcm <= 10^5 would be huge; sweep a dense grid instead
        for m1 in 1..=40u64 {
            for m2 in 1..=40u64 {
                let l = m1.lcm(&m2);
                for r1 in 0..m1 {
                    for r2 in [0, 1 % m2, m2 / 2, m2 - 1] {
                        let scan = (0..l).find(|x| x % m1 == r1 && x % m2 == r2);
                        let got = crt_solve_u64(&[(r1, m1), (r2, m2)]);
                        match scan {
                            Some(x) => assert_eq!(got.unwrap(), (BigUint::from(x), BigUint::from(l))),
                            None => assert!(got.is_err()),
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn crt_three_moduli(m1 in 1u64..60, m2 in 1u64..60, m3 in 1u64..28, r1 in 0u64..60, r2 in 0u64..60, r3 in 0u64..60) {
            let (r1, r2, r3) = (r1 % m1, r2 % m2, r3 % m3);
            let l = m1.lcm(&m2).lcm(&m3);
            prop_assume!(l <= 100_000);
            let scan = (0..l).find(|x| x % m1 == r1 && x % m2 == r2 && x % m3 == r3);
            let got = crt_solve_u64(&[(r1, m1), (r2, m2), (r3, m3)]);
            match scan {
                Some(x) => prop_assert_eq!(got.unwrap(), (BigUint::from(x), BigUint::from(l))),
                None => prop_assert!(got.is_err()),
            }
        }

        #[test]
        fn mod_inverse_is_inverse(a in 1u64..10_000, m in 2u64..10_000) {
            match mod_inverse_u64(a, m) {
                Ok(x) => { prop_assert!(x > 0 && x < m); prop_assert_eq!(mul_mod(a, x, m), 1 % m); }
                Err(_) => prop_assert!(a.gcd(&m) != 1),
            }
        }
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse_u64(3, 7).unwrap(), 5);
        for m in 2..50 {
            assert_eq!(mod_inverse_u64(1, m).unwrap(), 1);
        }
        assert!(matches!(mod_inverse_u64(2, 4), Err(NumericError::NotInvertible { .. })));
    }

    #[test]
    fn hensel_examples() {
        let p = BinaryQuadraticForm::new(1, 0, 1).unwrap();
        let lift = |q: u64, th: u32, z: u64| hensel_lift(&p, q, th, &BigUint::from(z));
        assert_eq!(lift(5, 1, 2).unwrap(), BigUint::from(2u32));
        assert_eq!(lift(5, 1, 3).unwrap(), BigUint::from(23u32));
        assert_eq!(lift(13, 1, 5).unwrap(), BigUint::from(122u32));
        assert!(matches!(lift(5, 1, 1), Err(NumericError::NotARoot { .. })));
        // m^2 + n^2 has a double root at 1 mod 2
        assert!(matches!(lift(2, 1, 1), Err(NumericError::NotSimpleRoot { .. })));
    }

    #[test]
    fn hensel_scan_oracle() {
        let p = BinaryQuadraticForm::new(1, 0, 1).unwrap();
        for (q, th) in [(5u64, 1u32), (13, 1), (5, 2), (17, 1), (29, 1)] {
            let m = q.pow(th + 1);
            for z in 0..q {
                let g = |x: u64| (1 + x * x) as i128 - q.pow(th) as i128;
                if g(z) % q as i128 != 0 {
                    continue;
                }
                let scan: Vec<u64> = (0..m).filter(|&x| x % q == z && g(x).rem_euclid(m as i128) == 0).collect();
                assert_eq!(scan.len(), 1);
                assert_eq!(hensel_lift(&p, q, th, &BigUint::from(z)).unwrap(), BigUint::from(scan[0]));
            }
        }
    }

    #[test]
    fn ln_big_is_close() {
        let n = BigUint::from(3u32).pow(500);
        assert!((ln_big(&n) - 500.0 * 3f64.ln()).abs() < 1e-9 * 500.0);
    }
}
