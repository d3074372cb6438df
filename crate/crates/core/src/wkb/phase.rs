use super::BranchContext;
use crate::algebra::{FracSeries, RationalFn};
use crate::operator::ESOperator;
use crate::quad::{PathIntegrator, PathPoint};
use crate::{c64, C64, Error, Result};

/// `S_1 = (M-1) rho_M' / (2 M rho_M) - rho_{M-1} / (M rho_M)` as a reduced
/// rational function.
pub fn s1_closed_form(op: &ESOperator) -> RationalFn {
    let m = op.order() as f64;
    let num1 = op.leading().derivative().scale(c64((m - 1.0) / (2.0 * m), 0.0));
    let num2 = op.rho(op.order() - 1).scale(c64(1.0 / m, 0.0));
    RationalFn::new(&num1 - &num2, op.leading().clone())
}

/// The phase primitives `Phi_0` (primitive of `w_1`, normalized so
/// `Phi_0 - ln z -> 0` at infinity) and `Phi_1` (primitive of `S_1`,
/// normalized so `Phi_1 - beta ln z -> 0` with
/// `beta = (M-1)/2 - rho_{M-1,M-1}/M`).
///
/// Values are computed on demand by quadrature along canonical paths from
/// the anchor; the normalization constants absorb the exactly-summed tail
/// integrals from the anchor to infinity.
pub struct PhasePair<'a> {
    ctx: &'a BranchContext,
    s1: RationalFn,
    pub beta: C64,
    c0: C64,
    c1: C64,
}

impl<'a> PhasePair<'a> {
    pub fn new(op: &ESOperator, ctx: &'a BranchContext) -> Result<Self> {
        let m = op.order();
        let beta = c64((m as f64 - 1.0) / 2.0, 0.0) - op.rho_m1_m1() / m as f64;
        let s1 = s1_closed_form(op);
        let a = ctx.anchor;

        // w_1 = (1/z) sum_j e_j z^{-j} at infinity: expand
        // (1 + a_{M-1} xi + ... + a_0 xi^M)^{-1/M} in xi = 1/z.
        let rho = op.leading();
        let mut uterms = vec![(0i64, c64(1.0, 0.0))];
        for i in 0..m {
            let cf = rho.coeff(i);
            if cf.norm() > 0.0 {
                uterms.push(((m - i) as i64, cf));
            }
        }
        let order = 30i64;
        let u = FracSeries::from_terms(c64(0.0, 0.0), 1, uterms, crate::algebra::puiseux::EXACT)
            .truncate(order);
        let e_series = u.binom_pow(-1.0 / m as f64)?;
        // tail0(A) = int_A^inf (w_1 - 1/z) dz = sum_{j>=1} e_j A^{-j}/j
        let mut tail0 = c64(0.0, 0.0);
        for (j, e_j) in e_series.terms() {
            if j >= 1 {
                tail0 += e_j / (a.powi(j as i32) * j as f64);
            }
        }

        // S_1 = sum_k f_k z^{-k} at infinity; f_1 must be beta.
        let dm = s1.num().degree().unwrap_or(0) as i64;
        let dn = s1.den().degree().unwrap_or(0) as i64;
        let num_rev: Vec<(i64, C64)> = (0..=dm).map(|i| (i, s1.num().coeff((dm - i) as usize))).collect();
        let den_rev: Vec<(i64, C64)> = (0..=dn).map(|i| (i, s1.den().coeff((dn - i) as usize))).collect();
        let num_s = FracSeries::from_terms(c64(0.0, 0.0), 1, num_rev, crate::algebra::puiseux::EXACT)
            .truncate(order);
        let den_s = FracSeries::from_terms(c64(0.0, 0.0), 1, den_rev, crate::algebra::puiseux::EXACT)
            .truncate(order);
        let s1_inf = if s1.num().is_zero() {
            FracSeries::zero(c64(0.0, 0.0), 1, order)
        } else {
            num_s.mul(&den_s.inverse()?).shift_key(dn - dm)
        };
        let f1 = s1_inf
            .terms()
            .find(|&(k, _)| k == 1)
            .map(|(_, c)| c)
            .unwrap_or_else(|| c64(0.0, 0.0));
        if (f1 - beta).norm() > 1e-9 * (1.0 + beta.norm()) {
            return Err(Error::InvalidOperator(format!(
                "S_1 tail coefficient {f1} disagrees with beta = {beta}"
            )));
        }
        let mut tail1 = c64(0.0, 0.0);
        for (k, f_k) in s1_inf.terms() {
            if k >= 2 {
                tail1 += f_k / (a.powi((k - 1) as i32) * (k - 1) as f64);
            }
        }

        let ln_a = a.ln();
        Ok(PhasePair { ctx, s1, beta, c0: ln_a - tail0, c1: beta * ln_a - tail1 })
    }

    /// Both phases at `z` from one quadrature pass along the canonical path.
    pub fn phases(&self, z: C64) -> Result<(C64, C64)> {
        let path = self.ctx.canonical_path(z)?;
        let s1 = self.s1.clone();
        let f_w: Box<dyn Fn(&PathPoint) -> C64> = Box::new(|p: &PathPoint| p.w);
        let f_s1: Box<dyn Fn(&PathPoint) -> C64> = Box::new(move |p: &PathPoint| s1.eval(p.z));
        let integ = PathIntegrator::new(self.ctx.field(), 1e-11);
        let (vals, _, _) = integ.integrate(&path, self.ctx.anchor_values[0], &[&*f_w, &*f_s1])?;
        Ok((self.c0 + vals[0], self.c1 + vals[1]))
    }

    pub fn phi0(&self, z: C64) -> Result<C64> {
        Ok(self.phases(z)?.0)
    }

    pub fn phi1(&self, z: C64) -> Result<C64> {
        Ok(self.phases(z)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;
    use crate::quad::RootField;

    fn cubic_unity() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    fn mod_2pi_distance(a: C64, b: C64) -> f64 {
        // distance of a - b to the lattice 2 pi i Z
        let d = a - b;
        let k = (d.im / (2.0 * std::f64::consts::PI)).round();
        (d - c64(0.0, 2.0 * std::f64::consts::PI * k)).norm()
    }

    #[test]
    fn pure_monomial_phi0_is_log() {
        // M = 2, rho_2 = z^2: w_1 = 1/z, Phi_0 = ln z exactly
        let op = ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::monomial(c64(1.0, 0.0), 2)]).unwrap();
        let ctx = BranchContext::new(&op).unwrap();
        let ph = PhasePair::new(&op, &ctx).unwrap();
        for z in [c64(2.0, 1.0), c64(-1.5, 2.0), c64(0.3, -0.4)] {
            let p0 = ph.phi0(z).unwrap();
            assert!(mod_2pi_distance(p0, z.ln()) < 1e-9, "z={z}: {p0} vs {}", z.ln());
        }
    }

    #[test]
    fn phi0_approaches_log_at_large_radius() {
        let op = cubic_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let ph = PhasePair::new(&op, &ctx).unwrap();
        let mut prev = f64::INFINITY;
        for r in [20.0, 40.0] {
            let z = C64::from_polar(r, 0.4);
            let d = mod_2pi_distance(ph.phi0(z).unwrap(), z.ln());
            assert!(d < 3.0 / r, "r={r}: residue {d}");
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn phi1_normalization_at_large_radius() {
        let op = ESOperator::new(vec![
            ComplexPoly::new(vec![c64(0.2, 0.1), c64(0.0, -0.3)]),
            ComplexPoly::new(vec![c64(-0.5, 0.0), c64(0.1, 0.0), c64(0.25, -0.2)]),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let ctx = BranchContext::new(&op).unwrap();
        let ph = PhasePair::new(&op, &ctx).unwrap();
        for r in [25.0, 50.0] {
            let z = C64::from_polar(r, 0.9);
            let p1 = ph.phi1(z).unwrap();
            let want = ph.beta * z.ln();
            let k = ((p1 - want).im / (2.0 * std::f64::consts::PI * ph.beta.norm().max(1e-12))).round();
            let _ = k;
            // compare modulo the 2 pi i beta winding ambiguity
            let d0 = (p1 - want).norm();
            let d1 = (p1 - want - c64(0.0, 2.0 * std::f64::consts::PI) * ph.beta).norm();
            let d = d0.min(d1);
            assert!(d < 3.0 / r, "r={r}: residue {d}");
        }
    }

    // Two homotopic paths produce the same integral.
    #[test]
    fn path_independence_in_cut_domain() {
        let op = cubic_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let field = RootField::new(op.leading().clone(), 3);
        let a = c64(4.0, 1.0);
        let b = c64(2.0, 3.0);
        let w_a = ctx.w1_at(a).unwrap();
        let direct = vec![a, b];
        let bent = vec![a, c64(4.5, 3.5), b];
        let integ = PathIntegrator::new(&field, 1e-12);
        let f: Box<dyn Fn(&PathPoint) -> C64> = Box::new(|p: &PathPoint| p.w);
        let (v1, _, _) = integ.integrate(&direct, w_a, &[&*f]).unwrap();
        let (v2, _, _) = integ.integrate(&bent, w_a, &[&*f]).unwrap();
        assert!((v1[0] - v2[0]).norm() < 1e-9, "{} vs {}", v1[0], v2[0]);
    }
}
