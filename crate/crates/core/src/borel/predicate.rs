use super::coeffs::borel_coefficients;
use super::sum::borel_pade_sum;
use crate::geometry::{StokesComplex, TracedCurve};
use crate::operator::ESOperator;
use crate::wkb::{BranchContext, Reference, WKBSeries};
use crate::{C64, Error, Result};
use serde::Serialize;

/// Verdict of the summability-region test: the WKB data normalized at the
/// given reference is Borel summable away from the Stokes curves of its
/// branch and the spawned curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Summable,
    /// On a turning-point Stokes curve of the branch, or a spawned curve.
    OnStokes,
    /// On a reference-relative curve or an extended spawned curve.
    OnRelative,
}

/// Point-to-curve distance test against the assembled complex (and, for
/// ordinary reference points, the relative curves through the reference).
pub fn summability_region_predicate(
    complex: &StokesComplex,
    relative: &[TracedCurve],
    z: C64,
    j: usize,
    tol: f64,
) -> Verdict {
    let on = |c: &TracedCurve| -> bool { c.distance_to(z) <= tol };
    // S_{ref,j}: curves of type (j, j') for the requested branch
    let s_ref = complex
        .curves
        .iter()
        .filter(|c| c.curve_type.0 == j || c.curve_type.1 == j)
        .any(on);
    let new_hit = complex.new_curves.iter().any(on);
    if s_ref || new_hit {
        return Verdict::OnStokes;
    }
    let rel_hit = relative
        .iter()
        .filter(|c| c.curve_type.0 == j || c.curve_type.1 == j)
        .any(on);
    if rel_hit {
        return Verdict::OnRelative;
    }
    Verdict::Summable
}

/// Eigenpolynomial ratio against the Borel-summed WKB value at
/// `eta_n = lambda_n^{1/M}` (the root branch with `eta_n/n -> 1`):
/// `r = Q_n(z) / Psi_1(z, eta_n, z_k)`. The ratio varies slowly in n on
/// compacts clear of the curves and of the roots.
pub fn eigen_ratio_relation(
    op: &ESOperator,
    ctx: &BranchContext,
    series: &WKBSeries,
    z_k: C64,
    z: C64,
    n: usize,
    n_coeffs: usize,
) -> Result<C64> {
    let m = op.order();
    let lambda = op.eigenvalue(n);
    // M-th root branch nearest to n
    let principal = (lambda.ln() / m as f64).exp();
    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / m as f64);
    let eta_n = (0..m)
        .map(|s| principal * omega.powu(s as u32))
        .min_by(|a, b| {
            (a - n as f64)
                .norm()
                .partial_cmp(&(b - n as f64).norm())
                .unwrap()
        })
        .unwrap();
    if eta_n.re <= 0.0 {
        return Err(Error::Config(format!("eigenvalue root branch not positive: {eta_n}")));
    }
    let coeffs = borel_coefficients(series, ctx, z, Reference::Turning(z_k), n_coeffs)?;
    // the Laplace machinery works at real eta; the imaginary part of
    // lambda^{1/M} is O(1/n) here and folded into the exponential factor
    let sum = borel_pade_sum(&coeffs, eta_n.re)?;
    let correction = (coeffs.y0 * (eta_n - eta_n.re)).exp() * (eta_n.re / eta_n.norm()).sqrt();
    let psi = sum.value * correction;
    let q_n = op.eigenpolynomial(n)?.q.eval(z);
    Ok(q_n / psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;
    use crate::c64;
    use crate::geometry::{build_stokes_complex, stokes_relative};
    use crate::wkb::riccati_series;

    fn op_generic() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_roots(&[c64(2.5, 0.0), c64(-1.0, 0.2), c64(-0.2, -1.1)]),
        ])
        .unwrap()
    }

    #[test]
    fn verdicts_follow_distances() {
        let op = op_generic();
        let ctx = BranchContext::new(&op).unwrap();
        let cx = build_stokes_complex(&op, &ctx).unwrap();
        let tol = 1e-3;
        // far point
        assert_eq!(
            summability_region_predicate(&cx, &[], c64(8.0, 8.0), 2, tol),
            Verdict::Summable
        );
        // a point sampled on a (2,3) curve is flagged for branch 2
        let curve = cx.curves.iter().find(|c| c.curve_type == (2, 3)).unwrap();
        let p = curve.points[curve.points.len() / 2];
        assert_eq!(summability_region_predicate(&cx, &[], p, 2, tol), Verdict::OnStokes);
        // but not for branch 1 unless a (1,j) curve passes there
        let d1 = cx
            .curves
            .iter()
            .filter(|c| c.curve_type.0 == 1)
            .map(|c| c.distance_to(p))
            .fold(f64::INFINITY, f64::min);
        if d1 > tol {
            assert_eq!(summability_region_predicate(&cx, &[], p, 1, tol), Verdict::Summable);
        }
        // relative curves flag their own verdict
        let z_star = c64(4.0, 2.0);
        let rel = stokes_relative(&op, &ctx, z_star, 1, None).unwrap();
        let q = rel[0].points[rel[0].points.len() / 3];
        if summability_region_predicate(&cx, &[], q, 1, tol) == Verdict::Summable {
            assert_eq!(summability_region_predicate(&cx, &rel, q, 1, tol), Verdict::OnRelative);
        }
    }

    #[test]
    fn verdicts_correlate_with_pade_pole_errors() {
        // On-curve points must show Laplace-ray poles much more often than
        // summable ones; checked on a modest grid here (the acceptance
        // suite runs the larger sweep).
        let op = op_generic();
        let ctx = BranchContext::new(&op).unwrap();
        let cx = build_stokes_complex(&op, &ctx).unwrap();
        let series = riccati_series(&op, 2, 13).unwrap();
        let z_k = c64(2.5, 0.0);
        let mut agree = 0usize;
        let mut total = 0usize;
        for i in 0..6 {
            for k in 0..5 {
                let z = c64(1.0 + 0.8 * i as f64, -2.2 + 1.1 * k as f64);
                if ctx.turning_points().nearest_distance(z) < 3.0 * ctx.clearance() {
                    continue;
                }
                let verdict = summability_region_predicate(&cx, &[], z, 2, 0.05);
                let coeffs = match borel_coefficients(&series, &ctx, z, Reference::Turning(z_k), 12) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                let sum_ok = borel_pade_sum(&coeffs, 20.0).is_ok();
                total += 1;
                let predicted_ok = verdict == Verdict::Summable;
                if predicted_ok == sum_ok {
                    agree += 1;
                }
            }
        }
        assert!(total >= 20, "grid too sparse ({total})");
        assert!(
            agree * 10 >= total * 8,
            "verdict/pole agreement {agree}/{total}"
        );
    }
}
