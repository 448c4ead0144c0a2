//! Double-double floating point: an unevaluated sum `hi + lo` of two `f64`
//! giving roughly 106 bits of mantissa.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: 6.931_471_805_599_452_862e-1,
    lo: 2.319_046_813_846_299_558e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact for every `u128` below 2^106; correctly rounded beyond.
    pub fn from_u128(x: u128) -> Dd {
        if x >> 64 == 0 {
            return Dd::from_u64(x as u64);
        }
        let hi_part = (x >> 64) as u64;
        let lo_part = x as u64;
        let a = Dd::from_u64(hi_part) * Dd::from_f64(18_446_744_073_709_551_616.0);
        a + Dd::from_u64(lo_part)
    }

    pub fn from_u64(x: u64) -> Dd {
        let hi = x as f64;
        // `hi` may round; the residual fits in an f64 exactly.
        let lo = if hi >= 18_446_744_073_709_551_616.0 {
            -((u64::MAX - x) as f64) - 1.0
        } else {
            (x as i128 - hi as i128) as f64
        };
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    pub fn from_i128(x: i128) -> Dd {
        if x < 0 {
            -Dd::from_u128(x.unsigned_abs())
        } else {
            Dd::from_u128(x as u128)
        }
    }

    /// `num / den` to double-double precision.
    pub fn ratio(num: u128, den: u128) -> Dd {
        Dd::from_u128(num) / Dd::from_u128(den)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, mut p2) = two_prod(self.hi, b);
        p2 += self.lo * b;
        let (s, e) = quick_two_sum(p1, p2);
        Dd { hi: s, lo: e }
    }

    fn mul_pow2(self, b: f64) -> Dd {
        Dd {
            hi: self.hi * b,
            lo: self.lo * b,
        }
    }

    fn sqr(self) -> Dd {
        self * self
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.78 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        if self.is_zero() {
            return Dd::ONE;
        }
        const K: f64 = 512.0;
        let m = (self.hi / LN2.hi + 0.5).floor();
        let r = (self - LN2.mul_f64(m)).mul_pow2(1.0 / K);
        let thresh = 1.0 / K * f64::EPSILON * f64::EPSILON;

        let mut p = r.sqr();
        let mut s = r + p.mul_pow2(0.5);
        p = p * r;
        let mut fact = 6.0_f64;
        let mut t = p / Dd::from_f64(fact);
        let mut i = 3.0_f64;
        loop {
            s += t;
            p = p * r;
            i += 1.0;
            fact *= i;
            t = p / Dd::from_f64(fact);
            if t.hi.abs() <= thresh || i >= 12.0 {
                break;
            }
        }
        s += t;

        for _ in 0..9 {
            s = s.mul_pow2(2.0) + s.sqr();
        }
        s += Dd::ONE;
        let scale = 2f64.powi(m as i32);
        if scale.is_finite() && scale != 0.0 {
            s.mul_pow2(scale)
        } else {
            // Split the scaling to avoid intermediate overflow/underflow.
            let h = (m / 2.0).floor() as i32;
            s.mul_pow2(2f64.powi(h)).mul_pow2(2f64.powi(m as i32 - h))
        }
    }

    /// Natural logarithm; NaN for non-positive input.
    pub fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::from_f64(f64::NAN);
        }
        if self.hi == 1.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::from_f64(self.hi.ln());
        // One Newton step on exp doubles the number of correct bits.
        let x = x + self * (-x).exp() - Dd::ONE;
        x + self * (-x).exp() - Dd::ONE
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p1, mut p2) = two_prod(self.hi, b.hi);
        p2 += self.hi * b.lo + self.lo * b.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::from_f64(q3)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b) / b).abs().to_f64()
    }

    #[test]
    fn arithmetic_is_exact_on_small_integers() {
        let a = Dd::from_u128(1 << 100) + Dd::from_u128(7);
        let b = a - Dd::from_u128(1 << 100);
        assert_eq!(b.to_f64(), 7.0);
        assert_eq!((Dd::from_f64(3.0) * Dd::from_f64(5.0)).to_f64(), 15.0);
    }

    #[test]
    fn division_round_trips() {
        let x = Dd::ratio(1, 3);
        let y = x * Dd::from_f64(3.0);
        assert!(rel(y, Dd::ONE) < 1e-31);
    }

    #[test]
    fn exp_ln_round_trip() {
        for &v in &[-50.0, -3.25, -1e-9, 0.5, 1.0, 7.125, 300.0] {
            let x = Dd::from_f64(v);
            let back = x.exp().ln();
            assert!((back - x).abs().to_f64() <= 1e-29 * v.abs().max(1.0), "{v}");
        }
    }

    // Reference values from a 300-bit evaluation, split into hi/lo doubles.
    #[test]
    fn exp_matches_reference() {
        let cases: [(f64, f64, f64); 6] = [
            (1.0, 2.718281828459045, 1.4456468917292502e-16),
            (-2.0, 0.1353352832366127, -1.042381423288669e-17),
            (0.5, 1.6487212707001282, -4.731568479435833e-17),
            (-37.5, 5.175555005801869e-17, -2.3609618230840602e-33),
            (100.25, 3.451610733125924e+43, 4.140163399793071e+26),
            (-700.0, 9.85967654375977e-305, 8.5e-322),
        ];
        for (x, hi, lo) in cases {
            let got = Dd::from_f64(x).exp();
            let want = Dd { hi, lo };
            let tol = if x < -600.0 { 1e-15 } else { 1e-30 };
            assert!(rel(got, want) < tol, "exp({x}) rel err {}", rel(got, want));
        }
    }

    #[test]
    fn ln_matches_reference() {
        let cases: [(f64, f64, f64); 3] = [
            (2.0, 0.6931471805599453, 2.3190468138462996e-17),
            (10.0, 2.302585092994046, -2.1707562233822494e-16),
            (1e20, 46.051701859880914, -7.88798767963998e-16),
        ];
        for (x, hi, lo) in cases {
            let got = Dd::from_f64(x).ln();
            assert!(rel(got, Dd { hi, lo }) < 1e-30, "ln({x})");
        }
    }

    #[test]
    fn from_u128_large() {
        let x: u128 = (1u128 << 105) + 12345;
        let d = Dd::from_u128(x);
        let back = (d - Dd::from_u128(1u128 << 105)).to_f64();
        assert_eq!(back, 12345.0);
    }
}
