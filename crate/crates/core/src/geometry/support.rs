use super::seeds::support_candidate_seeds;
use super::trace::{continue_short, omega_pow, point_polyline_distance, trace_curve, Seed, TraceParams, TracedCurve};
use crate::operator::ESOperator;
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// Branch bookkeeping of one support arc used as a cut: crossing the arc
/// from its left side (relative to the leaf-to-vertex orientation) to its
/// right multiplies the cut-plane branch of `w_1` by `omega^delta`.
#[derive(Debug, Clone)]
pub struct CutArc {
    pub points: Vec<C64>,
    /// Branch shift exponent for a left-to-right crossing.
    pub delta_lr: i64,
}

/// The limiting root-measure support for a cubic operator with simple
/// leading zeros: three arcs joining the zeros to a common vertex.
#[derive(Debug, Clone, Serialize)]
pub struct SupportTree {
    /// Arc polylines, each running from its leaf to the vertex.
    pub arcs: Vec<Vec<(f64, f64)>>,
    #[serde(with = "crate::serde_c64")]
    pub vertex: C64,
    #[serde(with = "crate::serde_c64::vec")]
    pub leaves: Vec<C64>,
    /// Interior angles between consecutive arcs at the vertex.
    pub vertex_angles: Vec<f64>,
    #[serde(skip)]
    pub arc_points: Vec<Vec<C64>>,
    /// Direction (angle) in which each arc leaves its leaf.
    #[serde(skip)]
    pub leaf_angles: Vec<f64>,
    /// Cut-crossing branch shifts, one per arc.
    #[serde(skip)]
    pub cut_arcs: Vec<CutArc>,
}

impl SupportTree {
    pub fn distance_to(&self, z: C64) -> f64 {
        self.arc_points
            .iter()
            .map(|arc| point_polyline_distance(z, arc))
            .fold(f64::INFINITY, f64::min)
    }

    /// Leaf-exit angle of the arc rooted at the given leaf.
    pub fn leaf_angle(&self, leaf: C64) -> Option<f64> {
        self.leaves
            .iter()
            .position(|&l| (l - leaf).norm() < 1e-9 * (1.0 + leaf.norm()))
            .map(|i| self.leaf_angles[i])
    }
}

/// Traces the support arcs of a cubic operator with simple leading zeros
/// and assembles the tree.
///
/// From every zero all anti-Stokes candidate rays are traced; the tree is
/// the unique triple (one arc per zero) whose members meet at a common
/// point, which is then sharpened by a two-level-set Newton solve. Failure
/// to meet is an error with diagnostics: the construction is guaranteed for
/// this operator class, so a miss indicates a tracing fault.
pub fn build_support_tree(op: &ESOperator, ctx: &BranchContext) -> Result<SupportTree> {
    if op.order() != 3 {
        return Err(Error::Config("support tree construction needs order M = 3".into()));
    }
    let diag = op.validate();
    if diag.perfect_power_leading {
        return Err(Error::DegenerateLeading);
    }
    let tps = ctx.turning_points().points.clone();
    if tps.len() != 3 {
        return Err(Error::Config("support tree needs three simple zeros".into()));
    }
    let params = TraceParams::support(ctx);
    let mut per_leaf: Vec<Vec<(Seed, TracedCurve)>> = Vec::new();
    for &(z_k, _) in &tps {
        let local = ctx.turning_local(z_k)?;
        let seeds = support_candidate_seeds(ctx, &local)?;
        let mut traced = Vec::new();
        for s in seeds {
            if let Ok(c) = trace_curve(ctx.field(), &s, &tps, &params, 3) {
                if c.points.len() > 8 {
                    traced.push((s, c));
                }
            }
        }
        if traced.is_empty() {
            return Err(Error::ArcsDoNotMeet(format!("no candidate arcs at {z_k}")));
        }
        per_leaf.push(traced);
    }

    // Find the combination meeting at a common vertex.
    let tol_meet = 5e-2 * (1.0 + ctx.turning_points().diameter());
    let mut best: Option<(f64, [usize; 3], C64)> = None;
    for i0 in 0..per_leaf[0].len() {
        for i1 in 0..per_leaf[1].len() {
            for i2 in 0..per_leaf[2].len() {
                let c0 = &per_leaf[0][i0].1;
                let c1 = &per_leaf[1][i1].1;
                let c2 = &per_leaf[2][i2].1;
                let x01 = first_crossing(c0, c1);
                let x12 = first_crossing(c1, c2);
                let x02 = first_crossing(c0, c2);
                if let (Some(a), Some(b), Some(c)) = (x01, x12, x02) {
                    let spread = (a - b).norm().max((b - c).norm()).max((a - c).norm());
                    if spread < tol_meet {
                        let v = (a + b + c) / 3.0;
                        if best.as_ref().map_or(true, |(s, _, _)| spread < *s) {
                            best = Some((spread, [i0, i1, i2], v));
                        }
                    }
                }
            }
        }
    }
    let Some((_, picks, v_rough)) = best else {
        return Err(Error::ArcsDoNotMeet(
            "no triple of candidate arcs meets at a common point".into(),
        ));
    };

    // Sharpen the vertex on two of the level sets, then verify the third.
    let c0 = &per_leaf[0][picks[0]].1;
    let c1 = &per_leaf[1][picks[1]].1;
    let c2 = &per_leaf[2][picks[2]].1;
    let v = refine_vertex(ctx, c0, c1, v_rough)?;
    // the third arc is only known as a polyline; its chord deviation is
    // O(step^2 * curvature), which bounds how sharply this can be tested
    let d2 = c2.distance_to(v);
    let chord_tol = (params.step * params.step).max(1e-6 * (1.0 + v.norm()));
    if d2 > 25.0 * chord_tol {
        return Err(Error::ArcsDoNotMeet(format!(
            "third arc misses the refined vertex by {d2:.3e}"
        )));
    }

    let mut arc_points = Vec::new();
    let mut leaf_angles = Vec::new();
    let mut tangents = Vec::new();
    let mut leaves = Vec::new();
    for (k, &pick) in picks.iter().enumerate() {
        let (seed, curve) = &per_leaf[k][pick];
        let z_k = tps[k].0;
        leaves.push(z_k);
        // prepend the near-leaf ray from the turning point to the seed
        let mut pts = Vec::new();
        let nseg = 12;
        for t in 0..nseg {
            pts.push(z_k + (seed.z - z_k) * (t as f64 / nseg as f64));
        }
        // trimmed traced points up to the vertex passage
        let cut = nearest_index(&curve.points, v);
        pts.extend_from_slice(&curve.points[..=cut]);
        pts.push(v);
        leaf_angles.push((seed.z - z_k).arg());
        // incoming tangent at the vertex
        let w_v = continue_short(ctx.field(), curve.points[cut], curve.w_base[cut], v)?;
        let alpha = omega_pow(3, seed.pair.0) - omega_pow(3, seed.pair.1);
        let t = c64(0.0, 1.0) / (alpha * w_v);
        let toward_leaf = pts[pts.len() - 2] - v;
        let t = if (t.conj() * toward_leaf).re >= 0.0 { t } else { -t };
        tangents.push(t / t.norm());
        arc_points.push(pts);
    }

    // Interior angles between arcs sorted counterclockwise around v.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| tangents[a].arg().partial_cmp(&tangents[b].arg()).unwrap());
    let mut vertex_angles = Vec::new();
    for i in 0..3 {
        let a = tangents[order[i]].arg();
        let b = tangents[order[(i + 1) % 3]].arg();
        let mut d = b - a;
        if d <= 0.0 {
            d += 2.0 * std::f64::consts::PI;
        }
        vertex_angles.push(d);
    }

    // Cut data: the one-sided limits of the cut-plane branch across each
    // arc differ by a root-of-unity factor, measured near the arc midpoint.
    let mut cut_arcs = Vec::new();
    let eps = 5e-3 * (1.0 + ctx.turning_points().diameter());
    for (k, pts) in arc_points.iter().enumerate() {
        let local = ctx.turning_local(leaves[k])?;
        let mid_idx = pts.len() / 2;
        let t = pts[(mid_idx + 1).min(pts.len() - 1)] - pts[mid_idx.saturating_sub(1)];
        let t = t / t.norm();
        let x_l = pts[mid_idx] + c64(0.0, 1.0) * t * eps;
        let x_r = pts[mid_idx] - c64(0.0, 1.0) * t * eps;
        let w_l = super::seeds::w1_near_leaf(ctx, &local, leaf_angles[k], x_l)?;
        let w_r = super::seeds::w1_near_leaf(ctx, &local, leaf_angles[k], x_r)?;
        // Honest continuation of the left value straight across the arc,
        // compared at the same point against the far-side branch.
        let w_l_continued = continue_short(ctx.field(), x_l, w_l, x_r)?;
        let ratio = w_r / w_l_continued;
        let delta_f = ratio.arg() / (2.0 * std::f64::consts::PI) * 3.0;
        let delta_lr = (delta_f.round() as i64).rem_euclid(3);
        if (ratio - C64::from_polar(1.0, 2.0 * std::f64::consts::PI * delta_lr as f64 / 3.0)).norm() > 1e-6 {
            return Err(Error::ArcsDoNotMeet(format!(
                "cut shift across arc {k} is not a root of unity: {ratio}"
            )));
        }
        cut_arcs.push(CutArc { points: pts.clone(), delta_lr });
    }

    Ok(SupportTree {
        arcs: arc_points
            .iter()
            .map(|pts| pts.iter().map(|p| (p.re, p.im)).collect())
            .collect(),
        vertex: v,
        leaves,
        vertex_angles,
        arc_points,
        leaf_angles,
        cut_arcs,
    })
}

/// Leaf-exit angles for order-2 operators: the single support arc joins the
/// two zeros. Returns angles aligned with `ctx.turning_points()` order.
pub fn leaf_angles_m2(op: &ESOperator, ctx: &BranchContext) -> Result<Vec<f64>> {
    if op.order() != 2 {
        return Err(Error::Config("order-2 helper".into()));
    }
    let tps = ctx.turning_points().points.clone();
    if tps.len() != 2 {
        return Err(Error::DegenerateLeading);
    }
    let params = TraceParams::support(ctx);
    let mut out = Vec::new();
    for (k, &(z_k, _)) in tps.iter().enumerate() {
        let other = tps[1 - k].0;
        let local = ctx.turning_local(z_k)?;
        let seeds = support_candidate_seeds(ctx, &local)?;
        let mut angle = None;
        for s in &seeds {
            if let Ok(c) = trace_curve(ctx.field(), s, &tps, &params, 2) {
                if let Some(hit) = c.hit_turning {
                    if (tps[hit].0 - other).norm() < 1e-9 {
                        angle = Some((s.z - z_k).arg());
                        break;
                    }
                }
            }
        }
        out.push(angle.ok_or_else(|| {
            Error::ArcsDoNotMeet(format!("no candidate arc from {z_k} reaches the other zero"))
        })?);
    }
    Ok(out)
}

fn nearest_index(pts: &[C64], v: C64) -> usize {
    let mut best = 0usize;
    let mut bd = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let d = (p - v).norm();
        if d < bd {
            bd = d;
            best = i;
        }
    }
    best
}

/// First transversal crossing point of two polylines, if any.
pub fn first_crossing(a: &TracedCurve, b: &TracedCurve) -> Option<C64> {
    for sa in a.points.windows(2) {
        for sb in b.points.windows(2) {
            if let Some(x) = segment_intersection(sa[0], sa[1], sb[0], sb[1]) {
                return Some(x);
            }
        }
    }
    None
}

pub fn segment_intersection(p1: C64, p2: C64, q1: C64, q2: C64) -> Option<C64> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.re * s.im - r.im * s.re;
    if denom.abs() < 1e-300 {
        return None;
    }
    let d = q1 - p1;
    let t = (d.re * s.im - d.im * s.re) / denom;
    let u = (d.re * r.im - d.im * r.re) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p1 + r * t)
    } else {
        None
    }
}

/// Newton solve for the common zero of the two held level functions,
/// re-evaluating the phases locally from the nearest polyline samples.
fn refine_vertex(ctx: &BranchContext, c0: &TracedCurve, c1: &TracedCurve, v0: C64) -> Result<C64> {
    let mut v = v0;
    let i0 = nearest_index(&c0.points, v0);
    let i1 = nearest_index(&c1.points, v0);
    for _ in 0..40 {
        let (g0, w0) = level_value(ctx, c0, i0, v)?;
        let (g1, w1) = level_value(ctx, c1, i1, v)?;
        // gradients of Re[alpha Phi]: d/dv = alpha w
        let a0 = c0.alpha() * w0;
        let a1 = c1.alpha() * w1;
        // solve [Re(a0) -Im(a0); Re(a1) -Im(a1)] [dx; dy] = -[g0; g1]
        let det = a0.re * (-a1.im) - (-a0.im) * a1.re;
        if det.abs() < 1e-300 {
            return Err(Error::ArcsDoNotMeet("vertex refinement is singular".into()));
        }
        let dx = (-g0 * (-a1.im) - (-a0.im) * (-g1)) / det;
        let dy = (a0.re * (-g1) - (-g0) * a1.re) / det;
        let step = c64(dx, dy);
        v += step;
        if step.norm() < 1e-13 * (1.0 + v.norm()) {
            break;
        }
    }
    Ok(v)
}

fn level_value(ctx: &BranchContext, c: &TracedCurve, idx: usize, v: C64) -> Result<(f64, C64)> {
    let w_v = continue_short(ctx.field(), c.points[idx], c.w_base[idx], v)?;
    // short-segment phase correction by Simpson
    let mid = (c.points[idx] + v) * 0.5;
    let w_mid = continue_short(ctx.field(), c.points[idx], c.w_base[idx], mid)?;
    let dphi = (c.w_base[idx] + w_mid * 4.0 + w_v) / 6.0 * (v - c.points[idx]);
    let phi_v = c.phi[idx] + dphi;
    Ok(((c.alpha() * phi_v).re, w_v))
}
