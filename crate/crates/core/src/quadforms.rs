//! Binary quadratic forms alpha m^2 + beta mn + gamma n^2, root counts
//! modulo r and prime powers, and splittings of reducible forms.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{self, is_prime, sieve_primes, NumericError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("ZeroForm: all coefficients vanish")]
    ZeroForm,
    #[error("ReducibleForm: {0} has a square discriminant")]
    ReducibleForm(String),
    #[error("NotReducible: {0}")]
    NotReducible(String),
    #[error("LargeModulusNonSimple: root {z} mod {p} is not simple and {p}^{k} exceeds the scan limit")]
    LargeModulusNonSimple { p: u64, k: u32, z: u64 },
    #[error("NotPrime: {0}")]
    NotPrime(u64),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

pub type Result<T> = std::result::Result<T, FormError>;

/// Moduli up to this size are scanned exhaustively.
pub const SCAN_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 3]", into = "[i64; 3]")]
pub struct BinaryQuadraticForm {
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
}

impl TryFrom<[i64; 3]> for BinaryQuadraticForm {
    type Error = FormError;
    fn try_from(c: [i64; 3]) -> Result<Self> {
        Self::new(c[0], c[1], c[2])
    }
}

impl From<BinaryQuadraticForm> for [i64; 3] {
    fn from(f: BinaryQuadraticForm) -> Self {
        [f.alpha, f.beta, f.gamma]
    }
}

/// `P(m, n) = (m + lambda1 n)(m + lambda2 n)` with `lambda1 < lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducibleSplit {
    pub lambda1: i64,
    pub lambda2: i64,
}

impl ReducibleSplit {
    pub fn expand(&self) -> BinaryQuadraticForm {
        BinaryQuadraticForm {
            alpha: 1,
            beta: self.lambda1 + self.lambda2,
            gamma: self.lambda1 * self.lambda2,
        }
    }
}

impl BinaryQuadraticForm {
    pub fn new(alpha: i64, beta: i64, gamma: i64) -> Result<Self> {
        if alpha == 0 && beta == 0 && gamma == 0 {
            return Err(FormError::ZeroForm);
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn coefficients(&self) -> [i64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn discriminant(&self) -> i128 {
        let (a, b, c) = (self.alpha as i128, self.beta as i128, self.gamma as i128);
        b * b - 4 * a * c
    }

    pub fn is_irreducible(&self) -> bool {
        let d = self.discriminant();
        if d < 0 {
            return true;
        }
        let s = (d as u128).sqrt();
        s * s != d as u128
    }

    pub fn eval_i128(&self, m: i128, n: i128) -> i128 {
        self.alpha as i128 * m * m + self.beta as i128 * m * n + self.gamma as i128 * n * n
    }

    pub fn eval(&self, m: &BigInt, n: &BigInt) -> BigInt {
        BigInt::from(self.alpha) * m * m + BigInt::from(self.beta) * m * n + BigInt::from(self.gamma) * n * n
    }

    /// P(1, x).
    pub fn eval_at_one(&self, x: &BigInt) -> BigInt {
        numeric::eval_quadratic(self.coefficients(), x)
    }

    fn at_one_mod(&self, x: u64, r: u64) -> u64 {
        let r = r as i128;
        let x = x as i128 % r;
        let v = (self.alpha as i128).rem_euclid(r)
            + (self.beta as i128).rem_euclid(r) * x % r
            + (self.gamma as i128).rem_euclid(r) * (x * x % r) % r;
        (v % r) as u64
    }

    /// Primes dividing 2 * discriminant; outside this set a root count
    /// modulo p is 0 or 2 for irreducible forms.
    pub fn exceptional_primes(&self) -> Vec<u64> {
        let d = (2 * self.discriminant()).unsigned_abs();
        if d == 0 {
            return Vec::new();
        }
        let fact = numeric::factorize_u64(d as u64).expect("nonzero");
        fact.primes().collect()
    }

    /// Coefficient-wise absolute sum.
    pub fn coefficient_norm(&self) -> u64 {
        self.alpha.unsigned_abs() + self.beta.unsigned_abs() + self.gamma.unsigned_abs()
    }
}

impl fmt::Display for BinaryQuadraticForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (c, mono) in [(self.alpha, "m^2"), (self.beta, "mn"), (self.gamma, "n^2")] {
            if c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            let body = if mag == 1 { mono.to_string() } else { format!("{mag}{mono}") };
            let sign = if c < 0 { "-" } else { "+" };
            parts.push((sign, body));
        }
        let mut s = String::new();
        for (i, (sign, body)) in parts.iter().enumerate() {
            if i == 0 {
                if *sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            s.push_str(body);
        }
        write!(f, "{s}")
    }
}

/// omega_P(r): residues n mod r with P(1, n) = 0 (mod r), by exhaustive scan.
pub fn omega(form: &BinaryQuadraticForm, r: u64) -> u64 {
    assert!(r >= 1, "omega needs r >= 1");
    (0..r).filter(|&x| form.at_one_mod(x, r) == 0).count() as u64
}

/// omega_P(p) for a prime p from the Legendre symbol of the discriminant.
pub fn omega_prime(form: &BinaryQuadraticForm, p: u64) -> u64 {
    let pm = p as i128;
    let (a, b, c) = (
        (form.alpha as i128).rem_euclid(pm),
        (form.beta as i128).rem_euclid(pm),
        (form.gamma as i128).rem_euclid(pm),
    );
    if p == 2 {
        return omega(form, 2);
    }
    if c == 0 {
        return match (b == 0, a == 0) {
            (false, _) => 1,
            (true, true) => p,
            (true, false) => 0,
        };
    }
    let d = (b * b - 4 * a * c).rem_euclid(pm) as u64;
    if d == 0 {
        1
    } else if legendre(d, p) == 1 {
        2
    } else {
        0
    }
}

fn legendre(a: u64, p: u64) -> i32 {
    let mut r: u128 = 1;
    let mut b = (a % p) as u128;
    let mut e = (p - 1) / 2;
    let m = p as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    if r == 1 {
        1
    } else if r == 0 {
        0
    } else {
        -1
    }
}

/// All residues x mod p^k with P(1, x) = 0 (mod p^k), ascending.
pub fn roots_mod_prime_power(form: &BinaryQuadraticForm, p: u64, k: u32) -> Result<Vec<BigUint>> {
    if !is_prime(p) {
        return Err(FormError::NotPrime(p));
    }
    let modulus = (p as u128).checked_pow(k);
    if let Some(m) = modulus.filter(|&m| m <= SCAN_LIMIT as u128) {
        let m = m as u64;
        return Ok((0..m)
            .filter(|&x| form.at_one_mod(x, m) == 0)
            .map(BigUint::from)
            .collect());
    }
    let mut out = Vec::new();
    for z in 0..p {
        if form.at_one_mod(z, p) != 0 {
            continue;
        }
        let d = (form.beta as i128 + 2 * form.gamma as i128 * z as i128).rem_euclid(p as i128);
        if d == 0 {
            return Err(FormError::LargeModulusNonSimple { p, k, z });
        }
        out.push(numeric::lift_simple_root(form.coefficients(), p, k, &BigInt::from(z))?);
    }
    out.sort();
    Ok(out)
}

/// Sum over primes p <= X of omega_P(p)/p.
pub fn omega_partial_sum(form: &BinaryQuadraticForm, x: u64) -> Result<f64> {
    if !form.is_irreducible() {
        return Err(FormError::ReducibleForm(form.to_string()));
    }
    Ok(sieve_primes(x)
        .into_iter()
        .map(|p| omega_prime(form, p) as f64 / p as f64)
        .sum())
}

/// Splits a monic form with positive square discriminant.
pub fn split_reducible(form: &BinaryQuadraticForm) -> Result<ReducibleSplit> {
    let d = form.discriminant();
    if form.alpha != 1 || d <= 0 {
        return Err(FormError::NotReducible(form.to_string()));
    }
    let s = num_integer::Roots::sqrt(&(d as u128)) as i128;
    if s * s != d {
        return Err(FormError::NotReducible(form.to_string()));
    }
    let b = form.beta as i128;
    let (l1, l2) = (Integer::div_floor(&(b - s), &2), Integer::div_floor(&(b + s), &2));
    if l1 == 0 || l2 == 0 {
        return Err(FormError::NotReducible(format!("{form} has a linear factor m")));
    }
    let split = ReducibleSplit {
        lambda1: l1 as i64,
        lambda2: l2 as i64,
    };
    debug_assert_eq!(split.expand(), *form);
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(a: i64, b: i64, c: i64) -> BinaryQuadraticForm {
        BinaryQuadraticForm::new(a, b, c).unwrap()
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(f(1, 0, 1).discriminant(), -4);
        assert_eq!(f(1, 0, -1).discriminant(), 4);
        assert_eq!(f(0, 2, 0).discriminant(), 4);
        assert_eq!(BinaryQuadraticForm::new(0, 0, 0), Err(FormError::ZeroForm));
    }

    #[test]
    fn irreducibility_examples() {
        assert!(f(1, 0, 1).is_irreducible());
        assert!(!f(1, 0, -1).is_irreducible());
        assert!(f(1, 0, -2).is_irreducible());
        assert!(!f(0, 2, 0).is_irreducible());
    }

    #[test]
    fn omega_examples() {
        let p = f(1, 0, 1);
        assert_eq!(omega(&p, 2), 1);
        assert_eq!(omega(&p, 3), 0);
        assert_eq!(omega(&p, 5), 2);
        assert_eq!(omega(&p, 1), 1);
    }

    #[test]
    fn roots_examples() {
        let p = f(1, 0, 1);
        let r = |q, k| roots_mod_prime_power(&p, q, k).unwrap();
        assert_eq!(r(5, 1), vec![BigUint::from(2u32), BigUint::from(3u32)]);
        assert!(r(3, 1).is_empty());
        assert_eq!(r(5, 2), vec![BigUint::from(7u32), BigUint::from(18u32)]);
    }

    #[test]
    fn roots_large_modulus_lift() {
        let p = f(1, 0, 1);
        let roots = roots_mod_prime_power(&p, 13, 8).unwrap();
        let m = BigInt::from(13u64.pow(8));
        assert_eq!(roots.len(), 2);
        for x in &roots {
            assert!(p.eval_at_one(&BigInt::from(x.clone())).is_multiple_of(&m));
        }
        // m^2 + n^2 has a double root mod 2
        assert!(matches!(
            roots_mod_prime_power(&p, 2, 25),
            Err(FormError::LargeModulusNonSimple { .. })
        ));
    }

    #[test]
    fn partial_sum_examples() {
        let p = f(1, 0, 1);
        assert!((omega_partial_sum(&p, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((omega_partial_sum(&p, 5).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(omega_partial_sum(&p, 1).unwrap(), 0.0);
        assert!(omega_partial_sum(&f(1, 0, -1), 10).is_err());
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_reducible(&f(1, -2, -3)).unwrap(), ReducibleSplit { lambda1: -3, lambda2: 1 });
        assert_eq!(split_reducible(&f(1, 0, -1)).unwrap(), ReducibleSplit { lambda1: -1, lambda2: 1 });
        assert!(matches!(split_reducible(&f(1, 0, 1)), Err(FormError::NotReducible(_))));
        assert_eq!(split_reducible(&f(1, -32, -144)).unwrap(), ReducibleSplit { lambda1: -36, lambda2: 4 });
    }

    #[test]
    fn omega_prime_matches_scan_and_roots() {
        let forms = [f(1, 0, 1), f(1, 0, 2), f(1, 0, -2), f(1, 6, -3), f(3, 1, 5), f(1, -2, -3)];
        for p in sieve_primes(10_000) {
            for form in &forms {
                let fast = omega_prime(form, p);
                let scan = omega(form, p);
                assert_eq!(fast, scan, "{form} p={p}");
                assert_eq!(roots_mod_prime_power(form, p, 1).unwrap().len() as u64, scan);
            }
        }
    }

    #[test]
    fn display_forms() {
        assert_eq!(f(1, -2, -1).to_string(), "m^2 - 2mn - n^2");
        assert_eq!(f(0, 2, 0).to_string(), "2mn");
        assert_eq!(f(-1, 0, 144).to_string(), "-m^2 + 144n^2");
    }

    proptest! {
        #[test]
        fn roots_satisfy_form(a in -20i64..20, b in -20i64..20, c in -20i64..20, pi in 0usize..25, k in 1u32..4) {
            prop_assume!(a != 0 || b != 0 || c != 0);
            let p = sieve_primes(100)[pi];
            let form = f(a, b, c);
            let m = BigInt::from(p).pow(k);
            for x in roots_mod_prime_power(&form, p, k).unwrap() {
                prop_assert!(form.eval_at_one(&BigInt::from(x)).is_multiple_of(&m));
            }
        }

        #[test]
        fn split_round_trip(l1 in -50i64..50, l2 in -50i64..50) {
            prop_assume!(l1 != l2 && l1 != 0 && l2 != 0);
            let form = f(1, l1 + l2, l1 * l2);
            let s = split_reducible(&form).unwrap();
            prop_assert_eq!(s.expand(), form);
            prop_assert!(s.lambda1 < s.lambda2);
            prop_assert_eq!((s.lambda1, s.lambda2), (l1.min(l2), l1.max(l2)));
        }
    }
}
