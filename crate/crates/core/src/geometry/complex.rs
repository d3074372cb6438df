use super::support::{build_support_tree, leaf_angles_m2, segment_intersection, CutArc, SupportTree};
use super::trace::{
    continue_short, omega_pow, trace_curve_with_cuts, CurveOrigin, Seed, TraceParams, TracedCurve,
};
use crate::operator::{ESOperator, TurningPointSet};
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};
use serde::Serialize;
use std::collections::HashMap;

/// A detected intersection of two traced curves.
#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    #[serde(with = "crate::serde_c64")]
    pub point: C64,
    /// Indices into the curve list.
    pub curves: (usize, usize),
    /// Types of the two incident curves.
    pub incident_types: ((usize, usize), (usize, usize)),
    pub ordered: bool,
    /// Near-tangential intersections are not classified.
    pub indeterminate: bool,
}

/// The assembled Stokes geometry of one operator.
#[derive(Debug, Clone, Serialize)]
pub struct StokesComplex {
    pub turning_points: TurningPointSet,
    pub curves: Vec<TracedCurve>,
    pub crossings: Vec<Crossing>,
    pub new_curves: Vec<TracedCurve>,
    #[serde(skip)]
    pub support: Option<SupportTree>,
    #[serde(skip)]
    pub m: usize,
}

impl StokesComplex {
    pub fn all_curves(&self) -> impl Iterator<Item = &TracedCurve> {
        self.curves.iter().chain(self.new_curves.iter())
    }

    pub fn distance_to_curves(&self, z: C64) -> f64 {
        self.all_curves()
            .map(|c| c.distance_to(z))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Traces all Stokes curves from the turning points, merges return passes
/// of closed curves, finds ordered crossings, spawns the new curves they
/// define, and assigns the proven inertness flags.
pub fn build_stokes_complex(op: &ESOperator, ctx: &BranchContext) -> Result<StokesComplex> {
    let diag = op.validate();
    if diag.perfect_power_leading {
        return Err(Error::DegenerateLeading);
    }
    let m = op.order();
    let tps = ctx.turning_points().clone();
    // leaf angles of the support cut, where the construction knows them
    let (support, leaf_angles): (Option<SupportTree>, Vec<Option<f64>>) = match m {
        3 => {
            let tree = build_support_tree(op, ctx)?;
            let angles = tps
                .points
                .iter()
                .map(|&(z_k, _)| tree.leaf_angle(z_k))
                .collect();
            (Some(tree), angles)
        }
        2 => {
            let angles = leaf_angles_m2(op, ctx)?;
            (None, angles.into_iter().map(Some).collect())
        }
        _ => (None, vec![None; tps.points.len()]),
    };

    let params = TraceParams::stokes(ctx);
    let cuts: Vec<CutArc> = support.as_ref().map(|t| t.cut_arcs.clone()).unwrap_or_default();
    let mut curves: Vec<TracedCurve> = Vec::new();
    for (k, &(z_k, _)) in tps.points.iter().enumerate() {
        let local = ctx.turning_local(z_k)?;
        let seeds = super::seeds::stokes_seeds_all(ctx, &local, leaf_angles[k])?;
        let mut traced: Vec<(Seed, TracedCurve)> = Vec::new();
        for s in &seeds {
            let c = trace_curve_with_cuts(ctx.field(), s, &tps.points, &params, m, &cuts)?;
            traced.push((*s, c));
        }
        // merge the return pass of a curve that comes back to its own
        // turning point onto the seed it re-enters along
        let mut consumed = vec![false; traced.len()];
        for i in 0..traced.len() {
            if consumed[i] {
                continue;
            }
            let came_home = traced[i].1.hit_turning.map(|h| tps.points[h].0) == Some(z_k)
                || (traced[i].1.closed);
            if !came_home || traced[i].1.closed {
                continue;
            }
            let end = *traced[i].1.points.last().unwrap();
            let th_in = (end - z_k).arg();
            let mut best: Option<(usize, f64)> = None;
            for (j, (s2, _)) in traced.iter().enumerate() {
                if j == i || consumed[j] || s2.jj != traced[i].0.jj {
                    continue;
                }
                let d = angle_distance(th_in, (s2.z - z_k).arg());
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, d)) = best {
                if d < 0.8 {
                    consumed[j] = true;
                    traced[i].1.closed = true;
                }
            }
        }
        for (i, (_, c)) in traced.into_iter().enumerate() {
            if !consumed[i] {
                curves.push(c);
            }
        }
    }

    // A curve connecting two turning points is traced once from each end;
    // keep one copy (the symmetric special configurations produce these).
    let mut drop = vec![false; curves.len()];
    for i in 0..curves.len() {
        if drop[i] {
            continue;
        }
        for j in i + 1..curves.len() {
            if drop[j] || curves[i].curve_type != curves[j].curve_type {
                continue;
            }
            let (a, b) = (&curves[i], &curves[j]);
            let reciprocal = match (a.origin, b.origin, a.hit_turning, b.hit_turning) {
                (CurveOrigin::Turning(za), CurveOrigin::Turning(zb), Some(ha), Some(hb)) => {
                    (complex_tps(&tps, ha) - zb).norm() < 1e-6 && (complex_tps(&tps, hb) - za).norm() < 1e-6
                }
                _ => false,
            };
            if reciprocal {
                let h = a
                    .points
                    .iter()
                    .step_by(4)
                    .map(|&p| b.distance_to(p))
                    .fold(0.0f64, f64::max);
                if h < 4.0 * params.step {
                    drop[j] = true;
                }
            }
        }
    }
    let curves: Vec<TracedCurve> = curves
        .into_iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(c, _)| c)
        .collect();

    let mut complex = StokesComplex {
        turning_points: tps,
        curves,
        crossings: Vec::new(),
        new_curves: Vec::new(),
        support,
        m,
    };
    find_ordered_crossings(ctx, &mut complex, &params)?;
    classify_inert(&mut complex);
    Ok(complex)
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = (a - b).rem_euclid(two_pi);
    if d > std::f64::consts::PI {
        d = two_pi - d;
    }
    d
}

/// Pairwise polyline intersections on a spatial grid, ordered-crossing
/// classification by label chaining, and tracing of the spawned curves.
pub fn find_ordered_crossings(
    ctx: &BranchContext,
    complex: &mut StokesComplex,
    params: &TraceParams,
) -> Result<()> {
    let m = complex.m;
    let skip_radius = 2.0 * ctx.clearance();
    let cell = 4.0 * params.step;
    // grid of segment indices
    let mut grid: HashMap<(i64, i64), Vec<(usize, usize)>> = HashMap::new();
    for (ci, c) in complex.curves.iter().enumerate() {
        for si in 0..c.points.len() - 1 {
            let a = c.points[si];
            let b = c.points[si + 1];
            let (x0, x1) = ((a.re.min(b.re) / cell) as i64, (a.re.max(b.re) / cell) as i64);
            let (y0, y1) = ((a.im.min(b.im) / cell) as i64, (a.im.max(b.im) / cell) as i64);
            for x in x0..=x1 {
                for y in y0..=y1 {
                    grid.entry((x, y)).or_default().push((ci, si));
                }
            }
        }
    }
    let mut raw: Vec<(C64, usize, usize, usize, usize)> = Vec::new();
    for bucket in grid.values() {
        for i in 0..bucket.len() {
            for j in i + 1..bucket.len() {
                let (ca, sa) = bucket[i];
                let (cb, sb) = bucket[j];
                if ca == cb {
                    continue;
                }
                let a = &complex.curves[ca];
                let b = &complex.curves[cb];
                if let Some(x) =
                    segment_intersection(a.points[sa], a.points[sa + 1], b.points[sb], b.points[sb + 1])
                {
                    if complex.turning_points.nearest_distance(x) > skip_radius {
                        raw.push((x, ca, sa, cb, sb));
                    }
                }
            }
        }
    }
    // deduplicate by (curve pair, position)
    raw.sort_by(|p, q| {
        (p.1, p.3, p.0.re, p.0.im)
            .partial_cmp(&(q.1, q.3, q.0.re, q.0.im))
            .unwrap()
    });
    let mut crossings: Vec<(C64, usize, usize, usize, usize)> = Vec::new();
    for r in raw {
        let dup = crossings
            .iter()
            .any(|c| c.1 == r.1 && c.3 == r.3 && (c.0 - r.0).norm() < 1e-3 * (1.0 + r.0.norm()));
        if !dup {
            crossings.push(r);
        }
    }

    for (x0, ca, sa, cb, sb) in crossings {
        let (point, indeterminate) = refine_crossing(ctx, &complex.curves[ca], sa, &complex.curves[cb], sb, x0)?;
        let a = &complex.curves[ca];
        let b = &complex.curves[cb];
        let mut ordered = false;
        let mut spawn: Option<Seed> = None;
        if !indeterminate {
            // continued root values of both frames at the crossing
            let w_a = continue_short(ctx.field(), a.points[sa], a.w_base[sa], point)?;
            let w_b = continue_short(ctx.field(), b.points[sb], b.w_base[sb], point)?;
            // frame shift: w_b = omega^delta w_a
            let ratio = w_b / w_a;
            let delta_f = ratio.arg() / (2.0 * std::f64::consts::PI) * m as f64;
            let delta = ((delta_f.round() as i64).rem_euclid(m as i64)) as usize;
            if (ratio - omega_pow(m, delta)).norm() < 1e-6 {
                // dominance-ordered labels in the shared (A) frame
                let la = a.label_at(sa);
                let lb = b.label_at(sb);
                if let (Some(la), Some(lb)) = (la, lb) {
                    if !la.degenerate && !lb.degenerate {
                        let (hi_a, lo_a) = if la.first_dominant {
                            (a.pair.0, a.pair.1)
                        } else {
                            (a.pair.1, a.pair.0)
                        };
                        let (hi_b0, lo_b0) = if lb.first_dominant {
                            (b.pair.0, b.pair.1)
                        } else {
                            (b.pair.1, b.pair.0)
                        };
                        let hi_b = (hi_b0 + delta) % m;
                        let lo_b = (lo_b0 + delta) % m;
                        // chain x>y, y>z
                        let outer = if lo_a == hi_b {
                            Some((hi_a, lo_b))
                        } else if lo_b == hi_a {
                            Some((hi_b, lo_a))
                        } else {
                            None
                        };
                        if let Some((x, y)) = outer {
                            ordered = true;
                            let jj = ((x % m).min(y % m) + 1, (x % m).max(y % m) + 1);
                            let alpha = omega_pow(m, x) - omega_pow(m, y);
                            let t = c64(1.0, 0.0) / (alpha * w_a);
                            spawn = Some(Seed {
                                z: point,
                                w: w_a,
                                phi: c64(0.0, 0.0),
                                pair: (x, y),
                                jj,
                                direction: t / t.norm(),
                                origin: CurveOrigin::Crossing(point),
                            });
                        }
                    }
                }
            }
        }
        complex.crossings.push(Crossing {
            point,
            curves: (ca, cb),
            incident_types: (a.curve_type, b.curve_type),
            ordered,
            indeterminate,
        });
        if let Some(seed) = spawn {
            let new_curve = trace_both_ways(ctx, &seed, &complex.turning_points, params, m)?;
            complex.new_curves.push(new_curve);
        }
    }
    Ok(())
}

/// Traces the level curve through a point in both directions and stitches
/// the halves into one curve.
pub fn trace_both_ways(
    ctx: &BranchContext,
    seed: &Seed,
    tps: &TurningPointSet,
    params: &TraceParams,
    m: usize,
) -> Result<TracedCurve> {
    trace_both_ways_with_cuts(ctx, seed, tps, params, m, &[])
}

/// Two-sided trace with support-cut handling.
pub fn trace_both_ways_with_cuts(
    ctx: &BranchContext,
    seed: &Seed,
    tps: &TurningPointSet,
    params: &TraceParams,
    m: usize,
    cuts: &[CutArc],
) -> Result<TracedCurve> {
    let fwd = trace_curve_with_cuts(ctx.field(), seed, &tps.points, params, m, cuts)?;
    let mut back_seed = *seed;
    back_seed.direction = -seed.direction;
    let bwd = trace_curve_with_cuts(ctx.field(), &back_seed, &tps.points, params, m, cuts)?;
    // stitch: reversed backward half + forward half
    let mut points: Vec<C64> = bwd.points.iter().rev().copied().collect();
    let mut w_base: Vec<C64> = bwd.w_base.iter().rev().copied().collect();
    let mut phi: Vec<C64> = bwd.phi.iter().rev().copied().collect();
    points.extend_from_slice(&fwd.points[1..]);
    w_base.extend_from_slice(&fwd.w_base[1..]);
    phi.extend_from_slice(&fwd.phi[1..]);
    let nb = bwd.points.len();
    let mut cut_events: Vec<(usize, i64)> = bwd
        .cut_events
        .iter()
        .map(|&(i, d)| (nb - 1 - i, -d))
        .collect();
    cut_events.sort_unstable();
    cut_events.extend(fwd.cut_events.iter().map(|&(i, d)| (nb - 1 + i, d)));
    let mut curve = TracedCurve {
        curve_type: seed.jj,
        origin: seed.origin,
        pair: seed.pair,
        points,
        w_base,
        phi,
        labels: Vec::new(),
        closed: fwd.closed || bwd.closed,
        escaped_to_infinity: fwd.escaped_to_infinity && bwd.escaped_to_infinity,
        truncated: fwd.truncated || bwd.truncated,
        hit_turning: fwd.hit_turning.or(bwd.hit_turning),
        inert: false,
        m_hint: m,
        cut_events,
    };
    curve.labels = super::trace::label_curve(&curve);
    Ok(curve)
}

/// Newton-refines a crossing on the two level sets; flags near-tangential
/// intersections as indeterminate.
fn refine_crossing(
    ctx: &BranchContext,
    a: &TracedCurve,
    ia: usize,
    b: &TracedCurve,
    ib: usize,
    x0: C64,
) -> Result<(C64, bool)> {
    let mut v = x0;
    let targ_a = (a.alpha() * a.phi[ia]).im;
    let targ_b = (b.alpha() * b.phi[ib]).im;
    for _ in 0..40 {
        let wa = continue_short(ctx.field(), a.points[ia], a.w_base[ia], v)?;
        let wb = continue_short(ctx.field(), b.points[ib], b.w_base[ib], v)?;
        let ga = (a.alpha() * (a.phi[ia] + short_phase(a, ia, v, wa))).im - targ_a;
        let gb = (b.alpha() * (b.phi[ib] + short_phase(b, ib, v, wb))).im - targ_b;
        let da = a.alpha() * wa;
        let db = b.alpha() * wb;
        // gradient of Im[alpha Phi] is (Im(aw), Re(aw))
        let det = da.im * db.re - da.re * db.im;
        if det.abs() < 1e-300 {
            return Ok((v, true));
        }
        let dx = (-ga * db.re + da.re * gb) / det;
        let dy = (-da.im * gb + ga * db.im) / det;
        let step = c64(dx, dy);
        v += step;
        if step.norm() < 1e-12 * (1.0 + v.norm()) {
            break;
        }
    }
    // tangent angle check
    let wa = continue_short(ctx.field(), a.points[ia], a.w_base[ia], v)?;
    let wb = continue_short(ctx.field(), b.points[ib], b.w_base[ib], v)?;
    let ta = c64(1.0, 0.0) / (a.alpha() * wa);
    let tb = c64(1.0, 0.0) / (b.alpha() * wb);
    let mut ang = (ta / tb).arg().abs();
    if ang > std::f64::consts::PI / 2.0 {
        ang = std::f64::consts::PI - ang;
    }
    Ok((v, ang < 1e-3))
}

fn short_phase(c: &TracedCurve, idx: usize, v: C64, w_v: C64) -> C64 {
    (c.w_base[idx] + w_v) * 0.5 * (v - c.points[idx])
}

/// Assigns the proven inertness flags: type (1,j) curves whose every span
/// is dominance-labelled (1 > j) are inert; for cubic operators all (1,2)
/// and (1,3) curves from turning points and every spawned curve are inert.
/// Closed (2,3) curves are left unflagged.
pub fn classify_inert(complex: &mut StokesComplex) {
    let m = complex.m;
    for c in complex.curves.iter_mut() {
        let general = c.curve_type.0 == 1
            && c.labels.iter().all(|s| s.first_dominant && !s.degenerate)
            && c.pair.0 == c.curve_type.0 - 1;
        let cubic = m == 3
            && matches!(c.origin, CurveOrigin::Turning(_))
            && (c.curve_type == (1, 2) || c.curve_type == (1, 3));
        c.inert = general || cubic;
    }
    if m == 3 {
        for c in complex.new_curves.iter_mut() {
            c.inert = true;
        }
    }
}

fn complex_tps(tps: &TurningPointSet, idx: usize) -> C64 {
    tps.points[idx].0
}
