use super::{BranchContext, WKBSeries};
use crate::algebra::{AlgebraicElement, FracSeries, TurningLocal};
use crate::quad::{continue_root, PathIntegrator, PathPoint};
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// One singular monomial `coeff * (z - z_k)^{exponent}` (or
/// `coeff * ln(z - z_k)` when `log` is set) of an integrand near a turning
/// point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SingularTerm {
    pub exponent: f64,
    pub log: bool,
    #[serde(with = "crate::serde_c64")]
    pub coeff: C64,
}

/// Finite-part integral value with its recorded divergence structure.
#[derive(Debug, Clone, Serialize)]
pub struct HadamardFP {
    #[serde(with = "crate::serde_c64")]
    pub z_k: C64,
    #[serde(with = "crate::serde_c64")]
    pub z: C64,
    #[serde(with = "crate::serde_c64")]
    pub value: C64,
    pub singular_part: Vec<SingularTerm>,
}

/// Finite part of `int_{z_k}^{z} term` on the branch that continues to
/// `w_value` at `z` (a numeric characteristic root there).
///
/// The integrand splits, via its local expansion at `z_k`, into monomials
/// with exponents <= -1 plus an integrable remainder. The monomials
/// integrate in closed form with the divergent endpoint contributions
/// dropped; the exponent -1 integrates to a logarithm whose branch is fixed
/// by the integration path. The remainder integrates term-by-term near the
/// turning point and numerically along the rest of the path.
pub fn hadamard_fp(
    term: &AlgebraicElement,
    local: &TurningLocal,
    z: C64,
    w_value: C64,
    ctx: &BranchContext,
) -> Result<HadamardFP> {
    let vals = fp_integrals(std::slice::from_ref(term), local, z, w_value, ctx)?;
    Ok(vals.into_iter().next().unwrap())
}

/// Batched finite-part integrals of all series terms `S_0 ... S_N` from the
/// turning point to `z` on branch `j` (continued root `w_value` at `z`);
/// shares one path walk and one quadrature pass.
pub fn wkb_integrals(
    series: &WKBSeries,
    local: &TurningLocal,
    z: C64,
    w_value: C64,
    ctx: &BranchContext,
) -> Result<Vec<C64>> {
    let fps = fp_integrals(&series.terms, local, z, w_value, ctx)?;
    Ok(fps.into_iter().map(|f| f.value).collect())
}

fn fp_integrals(
    terms: &[AlgebraicElement],
    local: &TurningLocal,
    z: C64,
    w_value: C64,
    ctx: &BranchContext,
) -> Result<Vec<HadamardFP>> {
    let z_k = local.z_k;
    let r_loc = ctx.local_radius(z_k).min(0.8 * (z - z_k).norm());
    if r_loc <= 0.0 {
        return Err(Error::PathClearance { distance: (z - z_k).norm(), clearance: ctx.clearance() });
    }
    let dir = (z - z_k) / (z - z_k).norm();
    let q = z_k + dir * r_loc;
    // Path q -> z avoiding other turning disks; continue the branch from z
    // backwards to identify the local sheet at q.
    let path = ctx.segment_with_detours(q, z)?;
    let mut rev = path.clone();
    rev.reverse();
    let w_q = continue_root(ctx.field(), &rev, w_value)?;
    let theta_q = (q - z_k).arg();
    let ln_t_q = c64(r_loc.ln(), theta_q);
    let (sheet, sep) = local.match_sheet(w_q, ln_t_q);
    if sep < 3.0 {
        return Err(Error::AmbiguousBranch { z: q });
    }

    // Local expansions, singular splits, and series antiderivatives.
    let trunc_key = 40 * local.ram;
    let mut singulars: Vec<Vec<SingularTerm>> = Vec::with_capacity(terms.len());
    let mut series_tail_at_q: Vec<C64> = Vec::with_capacity(terms.len());
    for t in terms {
        let exp = local.element_series(t, sheet, trunc_key)?;
        if exp.tail_estimate(r_loc) > 1e-9 * (1.0 + exp.eval_ln(ln_t_q).norm()) {
            return Err(Error::TruncationOrder(format!(
                "local expansion tail too large at radius {r_loc:.3e} near {z_k}"
            )));
        }
        let mut sing = Vec::new();
        let mut regular = FracSeries::zero(z_k, exp.ram, exp.trunc);
        for (key, coeff) in exp.terms() {
            let e = key as f64 / exp.ram as f64;
            if key <= -exp.ram {
                sing.push(SingularTerm { exponent: e, log: key == -exp.ram, coeff });
            } else {
                regular = regular.add(&FracSeries::from_terms(z_k, exp.ram, vec![(key, coeff)], exp.trunc));
            }
        }
        // int_{z_k}^{q} regular: exponents > -1 integrate to positive powers
        // vanishing at the turning point.
        let (anti, log_c) = regular.antiderivative();
        debug_assert!(log_c.norm() == 0.0);
        series_tail_at_q.push(anti.eval_ln(ln_t_q));
        singulars.push(sing);
    }

    // Quadrature of (term - singular monomials) from q to z, with the
    // argument of (zeta - z_k) continued along the path for the closed forms.
    let integ = PathIntegrator::with_center(ctx.field(), 1e-11, z_k, theta_q);
    let fs: Vec<Box<dyn Fn(&PathPoint) -> C64>> = terms
        .iter()
        .zip(&singulars)
        .map(|(t, sing)| {
            let t = t.clone();
            let sing = sing.clone();
            Box::new(move |p: &PathPoint| {
                let mut v = t.eval(p.z, p.w);
                for s in &sing {
                    v -= s.coeff * (s.exponent * p.ln_t).exp();
                }
                v
            }) as Box<dyn Fn(&PathPoint) -> C64>
        })
        .collect();
    let f_refs: Vec<&dyn Fn(&PathPoint) -> C64> = fs.iter().map(|b| &**b).collect();
    let (remainders, _, arg_end) = integ.integrate(&path, w_q, &f_refs)?;
    let ln_t_z = c64((z - z_k).norm().ln(), arg_end);

    // Assemble: closed-form singular antiderivatives at z (endpoint terms at
    // z_k dropped), plus the regular series on [z_k, q], plus the remainder.
    let mut out = Vec::with_capacity(terms.len());
    for i in 0..terms.len() {
        let mut value = series_tail_at_q[i] + remainders[i];
        for s in &singulars[i] {
            if s.log {
                value += s.coeff * ln_t_z;
            } else {
                value += s.coeff / (s.exponent + 1.0) * ((s.exponent + 1.0) * ln_t_z).exp();
            }
        }
        out.push(HadamardFP { z_k, z, value, singular_part: singulars[i].clone() });
    }
    Ok(out)
}

/// Ordinary (regular reference point) integrals of all series terms from
/// `z_ref` to `z`, on the branch with continued root `w_ref` at `z_ref`.
/// Returns the integrals and the continued root at `z`.
pub fn ordinary_integrals(
    series: &WKBSeries,
    z_ref: C64,
    w_ref: C64,
    z: C64,
    ctx: &BranchContext,
) -> Result<(Vec<C64>, C64)> {
    let path = ctx.segment_with_detours(z_ref, z)?;
    let fs: Vec<Box<dyn Fn(&PathPoint) -> C64>> = series
        .terms
        .iter()
        .map(|t| {
            let t = t.clone();
            Box::new(move |p: &PathPoint| t.eval(p.z, p.w)) as Box<dyn Fn(&PathPoint) -> C64>
        })
        .collect();
    let f_refs: Vec<&dyn Fn(&PathPoint) -> C64> = fs.iter().map(|b| &**b).collect();
    let integ = PathIntegrator::new(ctx.field(), 1e-11);
    let (vals, w_end, _) = integ.integrate(&path, w_ref, &f_refs)?;
    Ok((vals, w_end))
}
