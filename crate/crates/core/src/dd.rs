//! Double-double arithmetic: unevaluated sums of two f64 giving ~31
//! significant digits. Used where monomial-basis conditioning exceeds f64,
//! namely high-degree eigenpolynomial coefficients and their root polish.

use crate::{c64, C64};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
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
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let mut s2 = s2 + t1;
        let (s1, mut s2b) = quick_two_sum(s1, s2);
        s2 = s2b + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        s2b = lo;
        Dd { hi, lo: s2b }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let r2 = r.sub(o.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / o.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e }.add(Dd::from_f64(q3))
    }

    pub fn abs(self) -> f64 {
        self.to_f64().abs()
    }
}

/// Complex number with double-double parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from_c64(z: C64) -> Self {
        Cdd { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn from_f64(x: f64) -> Self {
        Cdd { re: Dd::from_f64(x), im: Dd::ZERO }
    }

    pub fn to_c64(self) -> C64 {
        c64(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_zero(self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn sub(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    pub fn neg(self) -> Cdd {
        Cdd { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn mul(self, o: Cdd) -> Cdd {
        let re = self.re.mul(o.re).sub(self.im.mul(o.im));
        let im = self.re.mul(o.im).add(self.im.mul(o.re));
        Cdd { re, im }
    }

    pub fn div(self, o: Cdd) -> Cdd {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let num = self.mul(Cdd { re: o.re, im: o.im.neg() });
        Cdd { re: num.re.div(den), im: num.im.div(den) }
    }

    pub fn norm(self) -> f64 {
        self.to_c64().norm()
    }
}

/// Horner evaluation of a polynomial with Cdd coefficients (ascending).
pub fn horner_cdd(coeffs: &[Cdd], z: Cdd) -> Cdd {
    let mut acc = Cdd::ZERO;
    for c in coeffs.iter().rev() {
        acc = acc.mul(z).add(*c);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn captures_cancelled_bits() {
        let big = Dd::from_f64(1e16);
        let one = Dd::from_f64(1.0);
        let s = big.add(one).sub(big);
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn mul_div_round_trip() {
        let a = Dd::from_f64(std::f64::consts::PI);
        let b = Dd::from_f64(std::f64::consts::E);
        let c = a.mul(b).div(b);
        assert!((c.to_f64() - std::f64::consts::PI).abs() < 1e-15);
        assert!(c.sub(a).abs() < 1e-30);
    }

    #[test]
    fn complex_division() {
        let a = Cdd::from_c64(crate::c64(3.0, -2.0));
        let b = Cdd::from_c64(crate::c64(0.5, 1.5));
        let q = a.div(b);
        let back = q.mul(b);
        assert!(back.sub(a).norm() < 1e-29);
    }

    #[test]
    fn horner_accuracy_beats_f64() {
        // p(x) = (x - 1)^6 expanded: f64 Horner near x = 1 is pure noise,
        // dd Horner keeps ~1e-32 * scale.
        let coeffs_f: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
        let coeffs: Vec<Cdd> = coeffs_f.iter().map(|&c| Cdd::from_f64(c)).collect();
        let x = Cdd::from_f64(1.0 + 1e-5);
        let v = horner_cdd(&coeffs, x);
        let want = 1e-30; // (1e-5)^6
        // absolute error floor ~ 1e-32 * intermediate scale; f64 Horner
        // would give ~1e-16 noise here
        assert!((v.to_c64().re - want).abs() < 1e-31);
    }
}
