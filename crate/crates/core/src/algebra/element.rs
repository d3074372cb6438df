use super::{ComplexPoly, RationalFn};
use crate::{c64, C64, Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// The defining data of the extension `C(z)[w] / (rho_M(z) w^M - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub m: usize,
    pub rho_m: ComplexPoly,
}

impl Modulus {
    pub fn new(m: usize, rho_m: ComplexPoly) -> Arc<Self> {
        assert!(m >= 2, "extension degree must be at least 2");
        assert_eq!(rho_m.degree(), Some(m), "rho_M must have degree M");
        Arc::new(Modulus { m, rho_m })
    }

    /// `1/rho_M` as a rational function.
    pub fn inv_rho(&self) -> RationalFn {
        RationalFn::new(ComplexPoly::one(), self.rho_m.clone())
    }

    /// Logarithmic derivative factor of a branch: `w' = wfac * w` with
    /// `wfac = -rho_M' / (M rho_M)`.
    pub fn w_log_derivative(&self) -> RationalFn {
        RationalFn::new(
            self.rho_m.derivative().scale(c64(-1.0 / self.m as f64, 0.0)),
            self.rho_m.clone(),
        )
    }
}

/// Element `sum_{i<M} c_i(z) w^i` with the reduction rule `w^M = 1/rho_M(z)`.
///
/// Arithmetic is closed: sums, products, and derivatives of elements are
/// elements. All data is immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicElement {
    w_coeffs: Vec<RationalFn>,
    modulus: Arc<Modulus>,
}

// Elements serialize as their coefficient list; the modulus is context the
// caller already has.
impl Serialize for AlgebraicElement {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("AlgebraicElement", 1)?;
        st.serialize_field("w_coeffs", &self.w_coeffs)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgOp {
    Add,
    Mul,
}

/// Checked binary operation on elements sharing the same modulus.
pub fn alg_arith(a: &AlgebraicElement, b: &AlgebraicElement, op: AlgOp) -> Result<AlgebraicElement> {
    if a.modulus() != b.modulus() {
        return Err(Error::ModulusMismatch);
    }
    Ok(match op {
        AlgOp::Add => a + b,
        AlgOp::Mul => a * b,
    })
}

impl AlgebraicElement {
    pub fn zero(modulus: Arc<Modulus>) -> Self {
        let w_coeffs = vec![RationalFn::zero(); modulus.m];
        AlgebraicElement { w_coeffs, modulus }
    }

    pub fn one(modulus: Arc<Modulus>) -> Self {
        AlgebraicElement::from_rational(RationalFn::one(), modulus)
    }

    /// The generator `w` itself (a branch of `rho_M^{-1/M}`).
    pub fn w(modulus: Arc<Modulus>) -> Self {
        let mut e = AlgebraicElement::zero(modulus);
        e.w_coeffs[1] = RationalFn::one();
        e
    }

    pub fn from_rational(r: RationalFn, modulus: Arc<Modulus>) -> Self {
        let mut e = AlgebraicElement::zero(modulus);
        e.w_coeffs[0] = r;
        e
    }

    pub fn from_coeffs(w_coeffs: Vec<RationalFn>, modulus: Arc<Modulus>) -> Self {
        assert_eq!(w_coeffs.len(), modulus.m);
        AlgebraicElement { w_coeffs, modulus }
    }

    pub fn modulus(&self) -> &Arc<Modulus> {
        &self.modulus
    }

    pub fn w_coeffs(&self) -> &[RationalFn] {
        &self.w_coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.w_coeffs.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, s: C64) -> Self {
        AlgebraicElement {
            w_coeffs: self.w_coeffs.iter().map(|c| c.scale(s)).collect(),
            modulus: self.modulus.clone(),
        }
    }

    pub fn mul_rational(&self, r: &RationalFn) -> Self {
        let mut out = self.clone();
        for c in &mut out.w_coeffs {
            let mut p = &*c * r;
            p.reduce_with_hints(&[&self.modulus.rho_m]);
            *c = p;
        }
        out
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut acc = AlgebraicElement::one(self.modulus.clone());
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// d/dz, using the product rule and `w' = -rho_M'/(M rho_M) * w`.
    pub fn derivative(&self) -> Self {
        let wfac = self.modulus.w_log_derivative();
        let mut out = AlgebraicElement::zero(self.modulus.clone());
        for (i, c) in self.w_coeffs.iter().enumerate() {
            let mut term = c.derivative();
            if i > 0 {
                let mut chain = &(&wfac * c).scale(c64(i as f64, 0.0)) + &term;
                chain.reduce_with_hints(&[&self.modulus.rho_m]);
                term = chain;
            }
            out.w_coeffs[i] = term;
        }
        out
    }

    /// Evaluates at `z` on the branch with the numeric root value `w_value`
    /// (a solution of `rho_M(z) w^M = 1`).
    pub fn eval(&self, z: C64, w_value: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        let mut wp = c64(1.0, 0.0);
        for c in &self.w_coeffs {
            if !c.is_zero() {
                acc += c.eval(z) * wp;
            }
            wp *= w_value;
        }
        acc
    }

    /// Largest coefficient magnitude over all numerators, with denominators
    /// normalized monic. A crude size gauge used by residual checks.
    pub fn coeff_scale(&self) -> f64 {
        self.w_coeffs.iter().map(|c| c.num().norm_inf()).fold(0.0, f64::max)
    }
}

impl Add for &AlgebraicElement {
    type Output = AlgebraicElement;
    fn add(self, rhs: &AlgebraicElement) -> AlgebraicElement {
        assert_eq!(self.modulus, rhs.modulus, "modulus mismatch");
        let w_coeffs = self
            .w_coeffs
            .iter()
            .zip(&rhs.w_coeffs)
            .map(|(a, b)| {
                let mut s = a + b;
                s.reduce_with_hints(&[&self.modulus.rho_m]);
                s
            })
            .collect();
        AlgebraicElement { w_coeffs, modulus: self.modulus.clone() }
    }
}

impl Sub for &AlgebraicElement {
    type Output = AlgebraicElement;
    fn sub(self, rhs: &AlgebraicElement) -> AlgebraicElement {
        self + &(-rhs)
    }
}

impl Neg for &AlgebraicElement {
    type Output = AlgebraicElement;
    fn neg(self) -> AlgebraicElement {
        AlgebraicElement {
            w_coeffs: self.w_coeffs.iter().map(|c| -c).collect(),
            modulus: self.modulus.clone(),
        }
    }
}

impl Mul for &AlgebraicElement {
    type Output = AlgebraicElement;
    fn mul(self, rhs: &AlgebraicElement) -> AlgebraicElement {
        assert_eq!(self.modulus, rhs.modulus, "modulus mismatch");
        let m = self.modulus.m;
        let mut conv = vec![RationalFn::zero(); 2 * m - 1];
        for (i, a) in self.w_coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.w_coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                conv[i + j] = &conv[i + j] + &(a * b);
            }
        }
        let inv_rho = self.modulus.inv_rho();
        let mut w_coeffs = vec![RationalFn::zero(); m];
        for (k, c) in conv.into_iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let target = if k < m { k } else { k - m };
            let folded = if k < m { c } else { &c * &inv_rho };
            let mut s = &w_coeffs[target] + &folded;
            s.reduce_with_hints(&[&self.modulus.rho_m]);
            w_coeffs[target] = s;
        }
        AlgebraicElement { w_coeffs, modulus: self.modulus.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_modulus() -> Arc<Modulus> {
        // rho_3 = z^3 - 1
        Modulus::new(3, ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]))
    }

    /// Numeric branch values of w at z (all M roots of rho w^M = 1).
    fn branch_values(md: &Modulus, z: C64) -> Vec<C64> {
        let rho = md.rho_m.eval(z);
        let principal = (c64(1.0, 0.0) / rho).powf(1.0 / md.m as f64);
        (0..md.m)
            .map(|s| {
                principal
                    * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / md.m as f64)
            })
            .collect()
    }

    #[test]
    fn w_times_w_m_minus_1_reduces() {
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let prod = &w * &w.pow(md.m - 1);
        assert_eq!(prod.w_coeffs()[0], md.inv_rho());
        assert!(prod.w_coeffs()[1].is_zero());
        assert!(prod.w_coeffs()[2].is_zero());
    }

    #[test]
    fn multiplicative_identity() {
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let a = &w.pow(2) + &AlgebraicElement::from_rational(
            RationalFn::new(ComplexPoly::from_real(&[0.0, 2.0]), ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0])),
            md.clone(),
        );
        let one = AlgebraicElement::one(md);
        assert_eq!(alg_arith(&a, &one, AlgOp::Mul).unwrap(), a);
    }

    #[test]
    fn modulus_mismatch_is_an_error() {
        let a = AlgebraicElement::w(cubic_modulus());
        let other = Modulus::new(2, ComplexPoly::from_real(&[-1.0, 0.0, 1.0]));
        let b = AlgebraicElement::w(other);
        assert!(matches!(alg_arith(&a, &b, AlgOp::Add), Err(Error::ModulusMismatch)));
    }

    // Numeric evaluation oracle: (a+b)^2 == a^2 + 2ab + b^2 pointwise.
    #[test]
    fn square_identity_pointwise() {
        use rand::{Rng, SeedableRng};
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let a = &w + &AlgebraicElement::from_rational(
            RationalFn::new(ComplexPoly::from_real(&[1.0, 1.0]), ComplexPoly::from_real(&[2.0, 0.0, 1.0])),
            md.clone(),
        );
        let b = &w.pow(2) - &AlgebraicElement::one(md.clone());
        let lhs = (&a + &b).pow(2);
        let rhs = &(&a.pow(2) + &(&a * &b).scale(c64(2.0, 0.0))) + &b.pow(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let z = c64(rng.gen_range(1.5..3.0), rng.gen_range(-2.0..2.0));
            for wv in branch_values(&md, z) {
                let l = lhs.eval(z, wv);
                let r = rhs.eval(z, wv);
                assert!((l - r).norm() <= 1e-12 * (1.0 + l.norm()), "mismatch {l} vs {r}");
            }
        }
    }

    // Branch-wise evaluation commutes with the arithmetic.
    #[test]
    fn reduction_consistency_on_branches() {
        use rand::{Rng, SeedableRng};
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let a = &w.pow(2) + &w;
        let b = &w * &w.pow(2); // reduces through w^3 = 1/rho
        let prod = &a * &b;
        let sum = &a + &b;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let z = c64(rng.gen_range(1.5..2.5), rng.gen_range(0.5..2.0));
            for wv in branch_values(&md, z) {
                let av = a.eval(z, wv);
                let bv = b.eval(z, wv);
                assert!((prod.eval(z, wv) - av * bv).norm() <= 1e-12 * (1.0 + (av * bv).norm()));
                assert!((sum.eval(z, wv) - (av + bv)).norm() <= 1e-12 * (1.0 + (av + bv).norm()));
            }
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let md = cubic_modulus();
        let c = AlgebraicElement::from_rational(RationalFn::constant(c64(2.0, -3.0)), md);
        assert!(c.derivative().is_zero());
    }

    // d/dz (w^M) computed in the algebra equals d/dz (1/rho_M) as elements.
    #[test]
    fn derivative_of_w_pow_m_symbolic() {
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let wm = w.pow(md.m);
        let lhs = wm.derivative();
        let rhs = AlgebraicElement::from_rational(md.inv_rho().derivative(), md);
        let diff = &lhs - &rhs;
        for c in diff.w_coeffs() {
            assert!(c.num().norm_inf() <= 1e-10, "residual {:?}", c);
        }
    }

    // Finite-difference oracle for the derivative, away from Z and poles.
    #[test]
    fn derivative_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let md = cubic_modulus();
        let w = AlgebraicElement::w(md.clone());
        let a = &w.pow(2) + &AlgebraicElement::from_rational(
            RationalFn::new(ComplexPoly::from_real(&[0.0, 1.0]), ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0])),
            md.clone(),
        );
        let da = a.derivative();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 50 {
            let z = c64(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if md.rho_m.eval(z).norm() < 0.5 {
                continue;
            }
            checked += 1;
            // Evaluate both on a consistent branch: follow the same root at
            // z+h and z-h by nearest-value matching.
            let wv = branch_values(&md, z)[1];
            let h = 1e-5;
            let pick = |zz: C64| {
                branch_values(&md, zz)
                    .into_iter()
                    .min_by(|a, b| (a - wv).norm().partial_cmp(&(b - wv).norm()).unwrap())
                    .unwrap()
            };
            let zp = z + c64(h, 0.0);
            let zm = z - c64(h, 0.0);
            let fd = (a.eval(zp, pick(zp)) - a.eval(zm, pick(zm))) / c64(2.0 * h, 0.0);
            let dv = da.eval(z, wv);
            assert!(
                (dv - fd).norm() <= 1e-6 * (1.0 + dv.norm()),
                "z={z} dv={dv} fd={fd}"
            );
        }
    }
}
