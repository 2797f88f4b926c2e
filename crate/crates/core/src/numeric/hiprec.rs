//! Fixed-point logarithms of factored integers, used to place very large
//! moduli on the unit circle under x -> x^i = exp(i ln x).
//!
//! Values are integers scaled by 2^bits. Every routine returns a value whose
//! absolute error is bounded by the accompanying count of units in the last
//! place (ulps).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

const GUARD: u32 = 32;

/// A fixed-point number `value / 2^bits` with error at most `ulps / 2^bits`.
#[derive(Debug, Clone)]
pub struct Fixed {
    pub value: BigInt,
    pub ulps: u64,
    pub bits: u32,
}

/// Series for atanh(u/w) or atan(u/w) (alternating), 0 < u < w.
fn arc_series(u: u64, w: u64, bits: u32, alternating: bool) -> Fixed {
    let u2 = BigInt::from(u) * BigInt::from(u);
    let w2 = BigInt::from(w) * BigInt::from(w);
    let mut pw = (BigInt::one() << bits) * BigInt::from(u) / BigInt::from(w);
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !pw.is_zero() {
        let term = &pw / BigInt::from(2 * k + 1);
        if alternating && k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        pw = pw * &u2 / &w2;
        k += 1;
    }
    // each power carries at most one fresh truncation and inherited errors
    // shrink geometrically; each quotient adds one more
    Fixed {
        value: sum,
        ulps: 2 * (k + 1),
        bits,
    }
}

fn scale(f: &Fixed, c: u64) -> Fixed {
    Fixed {
        value: &f.value * BigInt::from(c),
        ulps: f.ulps * c,
        bits: f.bits,
    }
}

fn add(a: &Fixed, b: &Fixed) -> Fixed {
    Fixed {
        value: &a.value + &b.value,
        ulps: a.ulps + b.ulps,
        bits: a.bits,
    }
}

pub fn ln2(bits: u32) -> Fixed {
    scale(&arc_series(1, 3, bits, false), 2)
}

pub fn pi(bits: u32) -> Fixed {
    let a = scale(&arc_series(1, 5, bits, true), 16);
    let b = scale(&arc_series(1, 239, bits, true), 4);
    Fixed {
        value: a.value - b.value,
        ulps: a.ulps + b.ulps,
        bits,
    }
}

/// ln n for n >= 1, via ln n = k ln 2 + 2 atanh((n - 2^k)/(n + 2^k)).
pub fn ln_u64(n: u64, bits: u32) -> Fixed {
    assert!(n >= 1, "ln of zero");
    let k = 63 - n.leading_zeros() as u64;
    let base = scale(&ln2(bits), k);
    let pk = 1u64 << k;
    if n == pk {
        return base;
    }
    let tail = scale(&arc_series(n - pk, n + pk, bits, false), 2);
    add(&base, &tail)
}

/// Position of `prod p^e` under x -> x^i, reduced to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CircleCertificate {
    /// Signed angle in radians.
    pub angle: f64,
    /// Rigorous bound on |true angle - angle| before the final f64 rounding.
    pub error_bound: f64,
    /// Working precision in bits.
    pub bits: u32,
}

impl CircleCertificate {
    /// Chord length |x^i - 1|.
    pub fn chord(&self) -> f64 {
        2.0 * (self.angle / 2.0).sin().abs()
    }
}

/// Reduces ln(prod p^e) mod 2 pi at `bits` bits of precision.
pub fn circle_position(factors: &[(u64, u64)], bits: u32) -> CircleCertificate {
    let total = ln_factored(factors, working_bits(bits));
    reduce_mod_two_pi(&total, bits)
}

/// Reduces a fixed-point angle mod 2 pi into (-pi, pi].
pub fn reduce_mod_two_pi(x: &Fixed, bits: u32) -> CircleCertificate {
    CircleReducer::new(x.bits).reduce(x, bits)
}

/// Holds pi at a fixed working precision for repeated reductions.
#[derive(Debug, Clone)]
pub struct CircleReducer {
    pi: Fixed,
    two_pi: Fixed,
}

impl CircleReducer {
    pub fn new(work: u32) -> Self {
        let pi = pi(work);
        let two_pi = scale(&pi, 2);
        Self { pi, two_pi }
    }

    pub fn work_bits(&self) -> u32 {
        self.pi.bits
    }

    pub fn reduce(&self, x: &Fixed, bits: u32) -> CircleCertificate {
        assert_eq!(x.bits, self.pi.bits, "precision mismatch");
        let work = x.bits;
        let (q, mut r) = x.value.div_mod_floor(&self.two_pi.value);
        if r > self.pi.value {
            r -= &self.two_pi.value;
        }
        let q_abs = q.abs().to_u64().unwrap_or(u64::MAX);
        let ulps = x.ulps as f64 + (q_abs as f64 + 1.0) * self.two_pi.ulps as f64 + 1.0;
        let error_bound = ulps * 2f64.powi(-(work as i32));
        CircleCertificate {
            angle: fixed_to_f64(&r, work),
            error_bound: error_bound.max(2f64.powi(-(bits as i32))),
            bits,
        }
    }
}

/// Fixed-point ln of prod p^e at `work` bits.
pub fn ln_factored(factors: &[(u64, u64)], work: u32) -> Fixed {
    let mut total = Fixed {
        value: BigInt::zero(),
        ulps: 0,
        bits: work,
    };
    for &(p, e) in factors {
        if e == 0 || p == 1 {
            continue;
        }
        total = add(&total, &scale(&ln_u64(p, work), e));
    }
    total
}

/// Sum of two fixed-point values at the same precision.
pub fn fixed_add(a: &Fixed, b: &Fixed) -> Fixed {
    assert_eq!(a.bits, b.bits, "precision mismatch");
    add(a, b)
}

/// Working precision used for a requested output precision.
pub fn working_bits(bits: u32) -> u32 {
    bits + GUARD
}

fn fixed_to_f64(v: &BigInt, bits: u32) -> f64 {
    // keep 60 fractional bits, then scale in f64
    let drop = bits.saturating_sub(60);
    let kept = bits - drop;
    let top = (v >> drop).to_f64().unwrap_or(0.0);
    top * 2f64.powi(-(kept as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn to_f64(f: &Fixed) -> f64 {
        fixed_to_f64(&f.value, f.bits)
    }

    #[test]
    fn constants_match_f64() {
        assert!((to_f64(&ln2(200)) - LN_2).abs() < 1e-15);
        assert!((to_f64(&pi(200)) - PI).abs() < 1e-15);
        for n in [3u64, 5, 7, 10, 97, 1_000_003] {
            assert!((to_f64(&ln_u64(n, 200)) - (n as f64).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn precision_levels_agree() {
        // the same quantity at two precisions agrees to well below 2^-190
        let a = ln_u64(97, 200);
        let b = ln_u64(97, 320);
        let diff = (&b.value >> 120u32) - &a.value;
        assert!(diff.abs() < BigInt::from(1u64 << 12));
    }

    #[test]
    fn circle_position_small_case() {
        // 2^9: 9 ln 2 = 6.2383..., just below 2 pi
        let c = circle_position(&[(2, 9)], 200);
        let expect = 9.0 * LN_2 - 2.0 * PI;
        assert!((c.angle - expect).abs() < 1e-14);
        assert!(c.error_bound < 1e-50);
    }
}
