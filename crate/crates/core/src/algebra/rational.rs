use super::ComplexPoly;
use crate::{c64, C64};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

const GCD_TOL: f64 = 1e-12;
const DIV_CHECK_TOL: f64 = 1e-9;

/// Ratio of two complex polynomials, kept with a monic denominator and with
/// `gcd(num, den)` reduced to a constant after every construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFn {
    num: ComplexPoly,
    den: ComplexPoly,
}

impl RationalFn {
    /// Builds `num/den` and reduces. Panics if `den` is identically zero.
    pub fn new(num: ComplexPoly, den: ComplexPoly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        let mut r = RationalFn { num, den };
        r.normalize();
        r.reduce();
        r
    }

    pub fn from_poly(p: ComplexPoly) -> Self {
        RationalFn { num: p, den: ComplexPoly::one() }
    }

    pub fn constant(c: C64) -> Self {
        RationalFn::from_poly(ComplexPoly::constant(c))
    }

    pub fn zero() -> Self {
        RationalFn::from_poly(ComplexPoly::zero())
    }

    pub fn one() -> Self {
        RationalFn::from_poly(ComplexPoly::one())
    }

    pub fn num(&self) -> &ComplexPoly {
        &self.num
    }

    pub fn den(&self) -> &ComplexPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.num.eval(z) / self.den.eval(z)
    }

    pub fn scale(&self, s: C64) -> Self {
        RationalFn { num: self.num.scale(s), den: self.den.clone() }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.num.is_zero(), "reciprocal of the zero rational function");
        RationalFn::new(self.den.clone(), self.num.clone())
    }

    /// Quotient-rule derivative, reduced.
    pub fn derivative(&self) -> Self {
        let n = &self.num.derivative() * &self.den;
        let d = &self.num * &self.den.derivative();
        let num = &n - &d;
        let den = &self.den * &self.den;
        let mut r = RationalFn { num, den };
        r.normalize();
        r.reduce();
        r
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = ComplexPoly::one();
            return;
        }
        let lead = self.den.leading();
        self.den = self.den.clone().scale(c64(1.0, 0.0) / lead).into_monic();
        self.num = self.num.scale(c64(1.0, 0.0) / lead);
    }

    /// Cancels the approximate gcd of numerator and denominator. A candidate
    /// divisor is accepted only when both synthetic divisions leave a
    /// relatively small remainder; otherwise the fraction is left as is.
    pub fn reduce(&mut self) {
        if self.num.is_zero() || self.den.degree() == Some(0) {
            self.normalize();
            return;
        }
        let g = self.num.gcd_approx(&self.den, GCD_TOL);
        if g.degree().unwrap_or(0) == 0 {
            return;
        }
        if let Some((n2, d2)) = try_cancel(&self.num, &self.den, &g) {
            self.num = n2;
            self.den = d2;
            self.normalize();
        }
    }

    /// Repeatedly cancels the given known factors (and then runs the generic
    /// reduction). Cheap and numerically safe when the factors really divide,
    /// which is how denominators built from powers of rho_M shrink.
    pub fn reduce_with_hints(&mut self, hints: &[&ComplexPoly]) {
        loop {
            let mut progress = false;
            for h in hints {
                if h.degree().unwrap_or(0) == 0 {
                    continue;
                }
                while self.den.degree() >= h.degree() && !self.num.is_zero() {
                    match try_cancel(&self.num, &self.den, h) {
                        Some((n2, d2)) => {
                            self.num = n2;
                            self.den = d2;
                            progress = true;
                        }
                        None => break,
                    }
                }
            }
            if !progress {
                break;
            }
        }
        self.normalize();
        self.reduce();
    }
}

fn try_cancel(num: &ComplexPoly, den: &ComplexPoly, g: &ComplexPoly) -> Option<(ComplexPoly, ComplexPoly)> {
    let (qn, rn) = num.div_rem(g);
    if rn.norm_inf() > DIV_CHECK_TOL * num.norm_inf().max(1e-300) {
        return None;
    }
    let (qd, rd) = den.div_rem(g);
    if rd.norm_inf() > DIV_CHECK_TOL * den.norm_inf().max(1e-300) {
        return None;
    }
    let mut qn = qn;
    let mut qd = qd;
    qn.trim_relative(1e-13);
    qd.trim_relative(1e-13);
    Some((qn, qd))
}

impl Add for &RationalFn {
    type Output = RationalFn;
    fn add(self, rhs: &RationalFn) -> RationalFn {
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        let den = &self.den * &rhs.den;
        RationalFn::new(num, den)
    }
}

impl Sub for &RationalFn {
    type Output = RationalFn;
    fn sub(self, rhs: &RationalFn) -> RationalFn {
        let num = &(&self.num * &rhs.den) - &(&rhs.num * &self.den);
        let den = &self.den * &rhs.den;
        RationalFn::new(num, den)
    }
}

impl Mul for &RationalFn {
    type Output = RationalFn;
    fn mul(self, rhs: &RationalFn) -> RationalFn {
        RationalFn::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &RationalFn {
    type Output = RationalFn;
    fn neg(self) -> RationalFn {
        RationalFn { num: -&self.num, den: self.den.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_common_factor_and_normalizes_monic() {
        let common = ComplexPoly::from_roots(&[c64(2.0, -1.0)]);
        let num = &ComplexPoly::from_real(&[1.0, 1.0]) * &common;
        let den = (&ComplexPoly::from_real(&[3.0, 0.0, 1.0]) * &common).scale(c64(2.0, 0.0));
        let r = RationalFn::new(num, den);
        assert_eq!(r.den().degree(), Some(2));
        assert!(r.den().is_monic());
        let z = c64(0.3, 0.7);
        let expect = (z + 1.0) / ((z * z + 3.0) * 2.0);
        assert!((r.eval(z) - expect).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let r = RationalFn::new(
            ComplexPoly::from_real(&[1.0, 2.0, 1.0]),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        );
        let d = r.derivative();
        let z = c64(0.4, 0.9);
        let h = 1e-6;
        let fd = (r.eval(z + c64(h, 0.0)) - r.eval(z - c64(h, 0.0))) / c64(2.0 * h, 0.0);
        assert!((d.eval(z) - fd).norm() < 1e-7 * (1.0 + d.eval(z).norm()));
    }

    #[test]
    fn hint_peeling_cancels_known_powers() {
        let rho = ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let num = &rho.pow(3) * &ComplexPoly::from_real(&[5.0, 1.0]);
        let den = rho.pow(5);
        let mut r = RationalFn { num, den };
        r.reduce_with_hints(&[&rho]);
        assert_eq!(r.den().degree(), Some(6));
        let z = c64(1.7, 0.2);
        let expect = (z + 5.0) / rho.eval(z).powu(2);
        assert!((r.eval(z) - expect).norm() < 1e-10 * expect.norm());
    }
}
