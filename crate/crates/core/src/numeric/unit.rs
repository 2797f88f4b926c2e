use std::f64::consts::TAU;
use std::ops::Mul;

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ln_big;

/// Comparison tolerance for points on the unit circle.
pub const UNIT_TOL: f64 = 1e-12;

/// A point e(x) = exp(2 pi i x) on the unit circle.
///
/// The position is kept in turns, reduced to `[0, 1)`, so products of roots
/// of unity of power-of-two order stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitComplex {
    turns: f64,
}

fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl UnitComplex {
    pub const ONE: UnitComplex = UnitComplex { turns: 0.0 };

    pub fn from_turns(x: f64) -> Self {
        Self { turns: reduce(x) }
    }

    /// Builds from an angle in radians.
    pub fn from_angle(theta: f64) -> Self {
        Self::from_turns(theta / TAU)
    }

    /// e(num/den) for an exact rational position.
    pub fn root_of_unity(num: i64, den: u64) -> Self {
        let r = num.rem_euclid(den as i64) as f64;
        Self::from_turns(r / den as f64)
    }

    pub fn turns(self) -> f64 {
        self.turns
    }

    /// Angle in `[0, 2 pi)`.
    pub fn angle(self) -> f64 {
        self.turns * TAU
    }

    /// Signed position in turns, in `[-1/2, 1/2)`.
    pub fn signed_turns(self) -> f64 {
        if self.turns >= 0.5 {
            self.turns - 1.0
        } else {
            self.turns
        }
    }

    pub fn re(self) -> f64 {
        self.angle().cos()
    }

    pub fn im(self) -> f64 {
        self.angle().sin()
    }

    pub fn to_complex(self) -> Complex64 {
        if self.turns == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        if self.turns == 0.5 {
            return Complex64::new(-1.0, 0.0);
        }
        if self.turns == 0.25 {
            return Complex64::new(0.0, 1.0);
        }
        if self.turns == 0.75 {
            return Complex64::new(0.0, -1.0);
        }
        Complex64::from_polar(1.0, self.angle())
    }

    pub fn conj(self) -> Self {
        Self::from_turns(-self.turns)
    }

    pub fn pow(self, k: i64) -> Self {
        Self::from_turns(self.turns * k as f64)
    }

    /// Chord length |self - 1|.
    pub fn chord_to_one(self) -> f64 {
        2.0 * (std::f64::consts::PI * self.signed_turns()).sin().abs()
    }

    /// Circle distance within `tol` (in the chord metric).
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        (self * other.conj()).chord_to_one() <= tol
    }
}

impl Default for UnitComplex {
    fn default() -> Self {
        Self::ONE
    }
}

impl Mul for UnitComplex {
    type Output = UnitComplex;
    fn mul(self, rhs: Self) -> Self {
        Self::from_turns(self.turns + rhs.turns)
    }
}

impl std::iter::Product for UnitComplex {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, |a, b| a * b)
    }
}

/// n^{it} for machine-sized n.
pub fn unit_power(n: u64, t: f64) -> UnitComplex {
    if n <= 1 || t == 0.0 {
        return UnitComplex::ONE;
    }
    UnitComplex::from_turns(t * (n as f64).ln() / TAU)
}

/// n^{it} for arbitrary n.
pub fn unit_power_big(n: &BigUint, t: f64) -> UnitComplex {
    if t == 0.0 || n <= &BigUint::from(1u32) {
        return UnitComplex::ONE;
    }
    UnitComplex::from_turns(t * ln_big(n) / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_power_examples() {
        assert_eq!(unit_power(1, 3.7), UnitComplex::ONE);
        assert_eq!(unit_power(17, 0.0), UnitComplex::ONE);
        let z = unit_power(2, PI / 2f64.ln());
        assert!(z.approx_eq(UnitComplex::from_turns(0.5), UNIT_TOL));
        assert!((z.re() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dyadic_roots_are_exact() {
        let i = UnitComplex::root_of_unity(1, 4);
        assert_eq!(i * i * i * i, UnitComplex::ONE);
        assert_eq!((i * i).to_complex(), Complex64::new(-1.0, 0.0));
        assert_eq!(UnitComplex::root_of_unity(-1, 8).turns(), 0.875);
    }

    proptest! {
        #[test]
        fn conj_is_inverse(x in -10.0f64..10.0) {
            let u = UnitComplex::from_turns(x);
            let w = (u * u.conj()).to_complex();
            prop_assert!((w - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
            prop_assert!((u.to_complex().norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn mul_is_associative(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let (a, b, c) = (UnitComplex::from_turns(a), UnitComplex::from_turns(b), UnitComplex::from_turns(c));
            prop_assert!(((a * b) * c).approx_eq(a * (b * c), 1e-12));
            let direct = a.to_complex() * b.to_complex() * c.to_complex();
            prop_assert!((direct - (a * b * c).to_complex()).norm() <= 1e-12);
        }
    }
}
