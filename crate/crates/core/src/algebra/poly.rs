use crate::{c64, C64};
use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Polynomial with complex coefficients, stored in ascending degree.
///
/// The zero polynomial has an empty coefficient list; for every other
/// polynomial the leading (last) coefficient is nonzero, so
/// `degree == coeffs.len() - 1`.
#[derive(Clone, PartialEq)]
pub struct ComplexPoly {
    coeffs: Vec<C64>,
}

impl fmt::Debug for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexPoly{:?}", self.coeffs)
    }
}

impl ComplexPoly {
    /// Builds a polynomial, trimming exactly-zero leading coefficients.
    pub fn new(coeffs: Vec<C64>) -> Self {
        let mut p = ComplexPoly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        ComplexPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        ComplexPoly::constant(c64(1.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        ComplexPoly::new(vec![c])
    }

    /// The monomial `c * z^k`.
    pub fn monomial(c: C64, k: usize) -> Self {
        let mut coeffs = vec![c64(0.0, 0.0); k + 1];
        coeffs[k] = c;
        ComplexPoly::new(coeffs)
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        ComplexPoly::new(coeffs.iter().map(|&x| c64(x, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = ComplexPoly::one();
        for &r in roots {
            p = &p * &ComplexPoly::new(vec![-r, c64(1.0, 0.0)]);
        }
        p
    }

    fn trim(&mut self) {
        while let Some(&c) = self.coeffs.last() {
            if c.norm() == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Drops leading coefficients that are negligible relative to the largest
    /// coefficient. Used after floating-point cancellations; exact zeros are
    /// always dropped by `new`.
    pub fn trim_relative(&mut self, rel: f64) {
        let scale = self.norm_inf();
        if scale == 0.0 {
            self.coeffs.clear();
            return;
        }
        while let Some(&c) = self.coeffs.last() {
            if c.norm() <= rel * scale {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of a nonzero polynomial; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_else(|| c64(0.0, 0.0))
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_else(|| c64(0.0, 0.0))
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_monic(&self) -> bool {
        !self.is_zero() && (self.leading() - c64(1.0, 0.0)).norm() <= 1e-14
    }

    /// Scales so the leading coefficient is exactly one.
    pub fn into_monic(mut self) -> Self {
        if let Some(&lead) = self.coeffs.last() {
            for c in &mut self.coeffs {
                *c /= lead;
            }
            let n = self.coeffs.len();
            self.coeffs[n - 1] = c64(1.0, 0.0);
        }
        self
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexPoly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Horner evaluation.
    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return ComplexPoly::zero();
        }
        ComplexPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut acc = ComplexPoly::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Coefficients of `p(center + t)` in powers of `t` (Taylor shift).
    pub fn shift(&self, center: C64) -> Self {
        let mut out = vec![c64(0.0, 0.0); self.coeffs.len()];
        for &c in self.coeffs.iter().rev() {
            // out <- out * (t + center) + c, in the t variable
            let mut carry = c;
            for o in out.iter_mut() {
                let nv = *o * center + carry;
                carry = *o;
                *o = nv;
            }
        }
        ComplexPoly::new(out)
    }

    /// Euclidean division `self = q * div + r` with `deg r < deg div`.
    ///
    /// Panics if `div` is zero.
    pub fn div_rem(&self, div: &ComplexPoly) -> (ComplexPoly, ComplexPoly) {
        assert!(!div.is_zero(), "division by the zero polynomial");
        let dd = div.degree().unwrap();
        if self.coeffs.len() <= dd {
            return (ComplexPoly::zero(), self.clone());
        }
        let lead = div.leading();
        let mut rem = self.coeffs.clone();
        let qlen = rem.len() - dd;
        let mut q = vec![c64(0.0, 0.0); qlen];
        for i in (0..qlen).rev() {
            let f = rem[i + dd] / lead;
            q[i] = f;
            if f.norm() == 0.0 {
                continue;
            }
            for (j, &dc) in div.coeffs.iter().enumerate() {
                rem[i + j] -= f * dc;
            }
        }
        rem.truncate(dd);
        (ComplexPoly::new(q), ComplexPoly::new(rem))
    }

    /// Approximate monic gcd by the Euclidean remainder sequence.
    ///
    /// Remainders whose coefficients fall below `tol` times the running scale
    /// are treated as zero. Returns a monic polynomial (a constant `1` when
    /// the inputs are coprime at this tolerance).
    pub fn gcd_approx(&self, other: &ComplexPoly, tol: f64) -> ComplexPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        if a.is_zero() {
            return if b.is_zero() { ComplexPoly::one() } else { b.into_monic() };
        }
        if b.is_zero() {
            return a.into_monic();
        }
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        a = a.into_monic();
        b = b.into_monic();
        loop {
            let (_, mut r) = a.div_rem(&b);
            r.trim_relative(tol);
            if r.is_zero() {
                return b;
            }
            if r.degree() == Some(0) {
                return ComplexPoly::one();
            }
            a = b;
            b = r.into_monic();
        }
    }
}

impl Add for &ComplexPoly {
    type Output = ComplexPoly;
    fn add(self, rhs: &ComplexPoly) -> ComplexPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![c64(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coeff(i) + rhs.coeff(i);
        }
        ComplexPoly::new(out)
    }
}

impl Sub for &ComplexPoly {
    type Output = ComplexPoly;
    fn sub(self, rhs: &ComplexPoly) -> ComplexPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![c64(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coeff(i) - rhs.coeff(i);
        }
        ComplexPoly::new(out)
    }
}

impl Neg for &ComplexPoly {
    type Output = ComplexPoly;
    fn neg(self) -> ComplexPoly {
        ComplexPoly::new(self.coeffs.iter().map(|&c| -c).collect())
    }
}

impl Mul for &ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: &ComplexPoly) -> ComplexPoly {
        if self.is_zero() || rhs.is_zero() {
            return ComplexPoly::zero();
        }
        let mut out = vec![c64(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.norm() == 0.0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ComplexPoly::new(out)
    }
}

// Polynomials serialize as JSON arrays of [re, im] pairs, ascending degree.
impl Serialize for ComplexPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            seq.serialize_element(&[c.re, c.im])?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ComplexPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ComplexPoly;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an array of [re, im] pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<ComplexPoly, A::Error> {
                let mut coeffs = Vec::new();
                while let Some(pair) = seq.next_element::<[f64; 2]>()? {
                    coeffs.push(c64(pair[0], pair[1]));
                }
                Ok(ComplexPoly::new(coeffs))
            }
        }
        deserializer.deserialize_seq(V)
    }
}
