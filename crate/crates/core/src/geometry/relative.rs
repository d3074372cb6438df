use super::complex::{trace_both_ways, StokesComplex};
use super::trace::{omega_pow, CurveOrigin, Seed, TraceParams, TracedCurve};
use crate::operator::ESOperator;
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};

/// Level curves `Im int_{z*} (w_j - w_j') = 0` through a regular reference
/// point, one per j' != j. These pass through `z*` rather than emanating
/// from a turning-point fan; they bound the summability region for
/// WKB data normalized at `z*`.
///
/// When an assembled complex is supplied, a reference point sitting on one
/// of its curves (within tolerance) is reported as an error.
pub fn stokes_relative(
    op: &ESOperator,
    ctx: &BranchContext,
    z_star: C64,
    j: usize,
    existing: Option<&StokesComplex>,
) -> Result<Vec<TracedCurve>> {
    let m = op.order();
    if j < 1 || j > m {
        return Err(Error::Config(format!("branch index {j} out of range")));
    }
    if let Some(cx) = existing {
        let d = cx.distance_to_curves(z_star);
        let tol = 1e-3 * (1.0 + ctx.turning_points().diameter());
        if d < tol {
            return Err(Error::Config(format!(
                "reference point {z_star} lies on a Stokes curve (distance {d:.3e})"
            )));
        }
    }
    let w1 = ctx.w1_at(z_star)?;
    let params = TraceParams::stokes(ctx);
    let mut out = Vec::new();
    for jp in 1..=m {
        if jp == j {
            continue;
        }
        let pair = (j - 1, jp - 1);
        let alpha = omega_pow(m, pair.0) - omega_pow(m, pair.1);
        let t = c64(1.0, 0.0) / (alpha * w1);
        let seed = Seed {
            z: z_star,
            w: w1,
            phi: c64(0.0, 0.0),
            pair,
            jj: (j.min(jp), j.max(jp)),
            direction: t / t.norm(),
            origin: CurveOrigin::Reference(z_star),
        };
        out.push(trace_both_ways(ctx, &seed, ctx.turning_points(), &params, m)?);
    }
    Ok(out)
}
