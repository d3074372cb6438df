use crate::algebra::{AlgebraicElement, Modulus, RationalFn};
use crate::operator::ESOperator;
use crate::{c64, C64, Result};
use serde::Serialize;
use std::sync::Arc;

/// Formal series `sum_i terms[i] * eta^{lead - i}` with element
/// coefficients, truncated to a fixed length.
#[derive(Debug, Clone)]
struct EtaSeries {
    lead: i32,
    terms: Vec<AlgebraicElement>,
}

impl EtaSeries {
    fn zero(lead: i32, len: usize, md: &Arc<Modulus>) -> Self {
        EtaSeries { lead, terms: vec![AlgebraicElement::zero(md.clone()); len] }
    }

    fn mul(&self, other: &EtaSeries, len: usize, md: &Arc<Modulus>) -> Self {
        let mut out = EtaSeries::zero(self.lead + other.lead, len, md);
        for (i, a) in self.terms.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.terms.iter().enumerate().take(len.saturating_sub(i)) {
                if b.is_zero() {
                    continue;
                }
                out.terms[i + j] = &out.terms[i + j] + &(a * b);
            }
        }
        out
    }

    fn derivative(&self) -> Self {
        EtaSeries { lead: self.lead, terms: self.terms.iter().map(|t| t.derivative()).collect() }
    }

    /// Adds `other * eta^0`, aligning the eta powers.
    fn add_aligned(&mut self, other: &EtaSeries) {
        let shift = self.lead - other.lead;
        assert!(shift >= 0, "cannot align to a higher-order series");
        let shift = shift as usize;
        for (j, b) in other.terms.iter().enumerate() {
            if j + shift < self.terms.len() && !b.is_zero() {
                self.terms[j + shift] = &self.terms[j + shift] + b;
            }
        }
    }

    fn mul_rational(&self, r: &RationalFn) -> Self {
        EtaSeries { lead: self.lead, terms: self.terms.iter().map(|t| t.mul_rational(r)).collect() }
    }
}

/// Truncated WKB coefficient stream `S_0 ... S_N` for branch `j`.
///
/// The terms are branch-independent elements of `C(z)[w]/(rho_M w^M - 1)`;
/// the branch enters through which numeric root of the characteristic
/// equation is substituted for `w` at evaluation time.
#[derive(Debug, Clone, Serialize)]
pub struct WKBSeries {
    pub j: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "S")]
    pub terms: Vec<AlgebraicElement>,
}

impl WKBSeries {
    pub fn modulus(&self) -> &Arc<Modulus> {
        self.terms[0].modulus()
    }

    /// Numeric value of `S_k` on this branch at `z`, given the continued
    /// root value `w_j(z)`.
    pub fn eval_term(&self, k: usize, z: C64, w_j: C64) -> C64 {
        self.terms[k].eval(z, w_j)
    }
}

/// Substitutes `S = sum_k S_k eta^{1-k}` into the operator equation
/// `sum_l rho_l (e^{int S})^{(l)} = eta^M e^{int S}` and solves order by
/// order in eta.
///
/// The derivative factors `(e^y)^{(l)}/e^y` satisfy `Y_{l+1} = Y_l S + Y_l'`,
/// which generates the same partial-Bell-polynomial sums as expanding the
/// composition directly. At order `eta^{M-n}` the unknown `S_n` appears with
/// the factor `M rho_M S_0^{M-1}`, whose inverse in the algebra is `S_0/M`;
/// the recursion therefore never divides by a zero element.
pub fn riccati_series(op: &ESOperator, j: usize, n_order: usize) -> Result<WKBSeries> {
    let m = op.order();
    let md = Modulus::new(m, op.leading().clone());
    let len = n_order + 1;
    let mut s = EtaSeries::zero(1, len, &md);
    s.terms[0] = AlgebraicElement::w(md.clone());
    let s0 = s.terms[0].clone();
    for n in 1..=n_order {
        // collect the eta^{M-n} coefficient of the equation with the current
        // truncation (S_n still zero)
        let e = equation_series(op, &s, n + 1, &md);
        let rest = e.terms[n].clone();
        // S_n = -rest * S_0 / M
        s.terms[n] = (&rest * &s0).scale(c64(-1.0 / m as f64, 0.0));
    }
    Ok(WKBSeries { j, n: n_order, terms: s.terms })
}

/// Residual elements: the eta^{M-n} coefficients, n = 0..=N, of the operator
/// equation after substituting the series. All must vanish.
pub fn riccati_residual(op: &ESOperator, series: &WKBSeries) -> Vec<AlgebraicElement> {
    let md = series.modulus().clone();
    let len = series.n + 1;
    let s = EtaSeries { lead: 1, terms: series.terms.clone() };
    let e = equation_series(op, &s, len, &md);
    e.terms
}

/// Symbolic derivative ratios `Y_i = v^{(i)}/v` of the WKB exponent, as
/// eta-graded element series (index t carries eta^{i-t}). `Y_0 = 1` and
/// `Y_{i+1} = Y_i S + Y_i'`. Used to seed Cauchy data for the reference
/// integrator.
pub fn cauchy_ratio_terms(series: &WKBSeries, upto: usize) -> Vec<Vec<AlgebraicElement>> {
    let md = series.modulus().clone();
    let len = series.n + 1;
    let s = EtaSeries { lead: 1, terms: series.terms.clone() };
    let mut out = Vec::with_capacity(upto + 1);
    let mut y = EtaSeries::zero(0, len, &md);
    y.terms[0] = AlgebraicElement::one(md.clone());
    out.push(y.terms.clone());
    for _ in 0..upto {
        let mut next = y.mul(&s, len, &md);
        let dy = y.derivative();
        next.add_aligned(&EtaSeries { lead: next.lead - 1, terms: dy.terms });
        y = next;
        out.push(y.terms.clone());
    }
    out
}

/// `sum_l rho_l Y_l - eta^M` truncated to `len` coefficients below eta^M.
fn equation_series(op: &ESOperator, s: &EtaSeries, len: usize, md: &Arc<Modulus>) -> EtaSeries {
    let m = op.order();
    let mut eq = EtaSeries::zero(m as i32, len, md);
    // -eta^M
    eq.terms[0] = &eq.terms[0] - &AlgebraicElement::one(md.clone());
    let mut y = s.clone(); // Y_1 = S
    for l in 1..=m {
        if !op.rho(l).is_zero() {
            let term = y.mul_rational(&RationalFn::from_poly(op.rho(l).clone()));
            eq.add_aligned(&term);
        }
        if l < m {
            // Y_{l+1} = Y_l * S + Y_l'
            let mut next = y.mul(s, len, md);
            let dy = y.derivative();
            next.add_aligned(&EtaSeries { lead: next.lead - 1, terms: dy.terms });
            y = next;
        }
    }
    eq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;
    use crate::eulercauchy::EulerCauchyOp;
    use crate::wkb::s1_closed_form;

    fn cubic_unity() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    fn mixed_cubic() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::new(vec![c64(0.2, 0.1), c64(0.0, -0.3)]),
            ComplexPoly::new(vec![c64(-0.5, 0.0), c64(0.1, 0.0), c64(0.25, -0.2)]),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    fn branch_value(op: &ESOperator, z: C64, s: usize) -> C64 {
        let rho = op.leading().eval(z);
        let principal = (-rho.ln() / op.order() as f64).exp();
        principal * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / op.order() as f64)
    }

    #[test]
    fn s0_satisfies_characteristic_equation() {
        let op = mixed_cubic();
        let series = riccati_series(&op, 1, 2).unwrap();
        // rho_M * S_0^M - 1 = 0 as elements
        let s0 = &series.terms[0];
        let lhs = s0.pow(3).mul_rational(&RationalFn::from_poly(op.leading().clone()));
        let diff = &lhs - &AlgebraicElement::one(series.modulus().clone());
        for c in diff.w_coeffs() {
            assert!(c.num().norm_inf() < 1e-12);
        }
    }

    #[test]
    fn s1_matches_closed_form_without_subleading() {
        // rho_{M-1} = 0: S_1 = (M-1) rho' / (2 M rho)
        let op = cubic_unity();
        let series = riccati_series(&op, 1, 1).unwrap();
        let m = 3.0;
        let expect = RationalFn::new(
            op.leading().derivative().scale(c64((m - 1.0) / (2.0 * m), 0.0)),
            op.leading().clone(),
        );
        let got = &series.terms[1];
        let diff = &got.w_coeffs()[0] - &expect;
        assert!(diff.num().norm_inf() < 1e-12, "S_1 mismatch: {:?}", diff);
        assert!(got.w_coeffs()[1].is_zero() && got.w_coeffs()[2].is_zero());
    }

    #[test]
    fn s1_matches_full_closed_form() {
        let op = mixed_cubic();
        let series = riccati_series(&op, 1, 1).unwrap();
        let expect = s1_closed_form(&op);
        let diff = &series.terms[1].w_coeffs()[0] - &expect;
        assert!(
            diff.num().norm_inf() < 1e-10 * expect.num().norm_inf().max(1.0),
            "S_1 mismatch: {:?}",
            diff
        );
    }

    // Euler-Cauchy closed-form oracle: every S_k equals h_{j,k} / z.
    #[test]
    fn euler_cauchy_terms_are_h_over_z() {
        let a = vec![c64(0.5, 0.0), c64(-0.25, 0.1)];
        let ec = EulerCauchyOp::new(3, a.clone()).unwrap();
        let op = ESOperator::new(vec![
            ComplexPoly::monomial(a[0], 1),
            ComplexPoly::monomial(a[1], 2),
            ComplexPoly::monomial(c64(1.0, 0.0), 3),
        ])
        .unwrap();
        let n = 8;
        let series = riccati_series(&op, 1, n).unwrap();
        for j in 1..=3usize {
            let br = ec.h_coefficients(j, n + 2).unwrap();
            // on branch j the numeric w-value is omega^{j-1}/z
            for (k, term) in series.terms.iter().enumerate() {
                for &z in &[c64(2.0, 0.5), c64(-1.0, 1.5)] {
                    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j - 1) as f64 / 3.0) / z;
                    let got = term.eval(z, w);
                    let want = br.h[k] / z;
                    assert!(
                        (got - want).norm() <= 1e-9 * (1.0 + want.norm()),
                        "branch {j} k={k} z={z}: {got} vs {want}"
                    );
                }
            }
        }
    }

    // Symbolic residual oracle: substituting S_0..S_N back leaves every
    // collected eta-order at zero, checked numerically at random points.
    #[test]
    fn residual_vanishes_at_random_points() {
        use rand::{Rng, SeedableRng};
        for op in [cubic_unity(), mixed_cubic()] {
            let series = riccati_series(&op, 1, 8).unwrap();
            let res = riccati_residual(&op, &series);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xf00d);
            for e in &res {
                for _ in 0..20 {
                    let z = C64::from_polar(rng.gen_range(2.0..3.5), rng.gen_range(0.0..6.28));
                    for s in 0..3 {
                        let w = branch_value(&op, z, s);
                        let v = e.eval(z, w);
                        assert!(v.norm() <= 1e-9, "residual {v:?} at z={z}");
                    }
                }
            }
        }
    }
}
