use super::seeds::w1_near_leaf;
use super::support::SupportTree;
use crate::operator::ESOperator;
use crate::quad::{PathIntegrator, PathPoint};
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// Boundary polygon of the phase-plane image of the cut plane: the seven
/// one-sided limits of the phase primitive along both sides of the support
/// tree, with the interior angles at the five interior vertices.
#[derive(Debug, Clone, Serialize)]
pub struct BRegionPolygon {
    #[serde(with = "crate::serde_c64::vec")]
    pub vertices: Vec<C64>,
    /// Interior angles at p2..p6.
    pub interior_angles: Vec<f64>,
    /// Directions (radians) of the six boundary segments.
    pub segment_directions: Vec<f64>,
}

/// Computes `p_1 ... p_7` by integrating the phase along a thin tour around
/// the support tree: down one side of each arc, around each leaf, and
/// through each sector at the vertex. The limits at the leaves are taken
/// through the convergent local antiderivative, so no extrapolation in the
/// offset is needed; the offset only keeps the path clear of the branch
/// points. `p_1` is normalized to zero.
pub fn b_region_polygon(op: &ESOperator, ctx: &BranchContext, tree: &SupportTree) -> Result<BRegionPolygon> {
    if op.order() != 3 {
        return Err(Error::Config("the boundary polygon construction needs order M = 3".into()));
    }
    match assemble(op, ctx, tree, false) {
        Ok(poly) => Ok(poly),
        // wrong orientation convention for this geometry: flip the tour side
        Err(Error::Config(msg)) if msg.contains("orientation") => assemble(op, ctx, tree, true),
        Err(e) => Err(e),
    }
}

fn assemble(_op: &ESOperator, ctx: &BranchContext, tree: &SupportTree, flip: bool) -> Result<BRegionPolygon> {
    let eps = 1.5e-3 * (1.0 + ctx.turning_points().diameter());
    let r_leaf = 3.0 * eps;
    let side = if flip { -1.0 } else { 1.0 };

    // Arc order around the vertex, counterclockwise, starting from the arc
    // with the lexicographically smallest leaf.
    let v = tree.vertex;
    let mut order: Vec<usize> = (0..3).collect();
    let dir_at_v = |k: usize| -> f64 {
        let pts = &tree.arc_points[k];
        let near = pts[pts.len().saturating_sub(6)];
        (near - v).arg()
    };
    order.sort_by(|&a, &b| dir_at_v(a).partial_cmp(&dir_at_v(b)).unwrap());
    let first = order
        .iter()
        .position(|&k| {
            let leaf = tree.leaves[k];
            tree.leaves
                .iter()
                .all(|&l| (leaf.re, leaf.im) <= (l.re, l.im) || (l - leaf).norm() < 1e-12)
        })
        .unwrap_or(0);
    order.rotate_left(first);

    // Resampled arcs, trimmed away from leaf and vertex.
    let mut trimmed: Vec<Vec<C64>> = Vec::new();
    for k in 0..3 {
        let pts = resample(&tree.arc_points[k], eps);
        let leaf = tree.leaves[k];
        let kept: Vec<C64> = pts
            .into_iter()
            .filter(|p| (p - leaf).norm() > r_leaf && (p - v).norm() > r_leaf)
            .collect();
        if kept.len() < 4 {
            return Err(Error::Config("support arc too short for the tour".into()));
        }
        trimmed.push(kept);
    }

    // Offset polylines: side A walked leaf->v, side B walked v->leaf.
    let offset = |pts: &[C64], sgn: f64| -> Vec<C64> {
        let n = pts.len();
        (0..n)
            .map(|i| {
                let t = if i + 1 < n { pts[i + 1] - pts[i] } else { pts[i] - pts[i - 1] };
                let t = t / t.norm();
                pts[i] + c64(0.0, -1.0) * t * (sgn * eps)
            })
            .collect()
    };

    // Global branch value at the tour start (near the first leaf).
    let k1 = order[0];
    let a1 = offset(&trimmed[k1], side);
    let start = a1[0];
    let local1 = ctx.turning_local(tree.leaves[k1])?;
    let w_start = w1_near_leaf(ctx, &local1, tree.leaf_angles[k1], start)?;
    let (sheet1, sep1) = local1.match_sheet(w_start, ln_t_of(start, tree.leaves[k1]));
    if sep1 < 3.0 {
        return Err(Error::AmbiguousBranch { z: start });
    }
    // p1 = 0: the running phase starts at the local antiderivative value.
    let om = |s: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / 3.0);
    let mut phi = om(sheet1) * local1.phi_base().eval_ln(ln_t_of(start, tree.leaves[k1]));
    let mut w = w_start;

    let integ = PathIntegrator::new(ctx.field(), 1e-11);
    let advance = |path: &[C64], w_in: C64, phi_in: C64| -> Result<(C64, C64)> {
        if path.len() < 2 {
            return Ok((phi_in, w_in));
        }
        let f: Box<dyn Fn(&PathPoint) -> C64> = Box::new(|p: &PathPoint| p.w);
        let (vals, w_end, _) = integ.integrate(path, w_in, &[&*f])?;
        Ok((phi_in + vals[0], w_end))
    };

    let mut vertices = vec![c64(0.0, 0.0)]; // p1
    let mut probes: Vec<C64> = Vec::new(); // probe phases for p2..p6

    // angular interval test around the vertex, in tour rotation direction
    let two_pi = 2.0 * std::f64::consts::PI;
    let in_sector = |th: f64, from: f64, to: f64| -> bool {
        let span = (to - from).rem_euclid(two_pi);
        let off = (th - from).rem_euclid(two_pi);
        off > 1e-9 && off < span - 1e-9
    };

    let mut up_side = side;
    for leg in 0..3 {
        let ka = order[leg];
        let kb = order[(leg + 1) % 3];
        let arc_a = offset(&trimmed[ka], up_side); // walked leaf -> v
        (phi, w) = advance(&arc_a, w, phi)?;
        // departure strand of kb: the side whose v-end lies inside the
        // counterclockwise sector from ka's direction to kb's direction
        let th_a = dir_at_v(ka);
        let th_b = dir_at_v(kb);
        let mut down_side = 0.0f64;
        for cand in [1.0f64, -1.0] {
            let strand = offset(&trimmed[kb], cand);
            let th_end = (strand.last().unwrap() - v).arg();
            if in_sector(th_end, th_a, th_b) {
                down_side = cand;
            }
        }
        // sanity: the arrival strand must sit in the same sector
        let th_arr = (arc_a.last().unwrap() - v).arg();
        if down_side == 0.0 || !in_sector(th_arr, th_a, th_b) {
            return Err(Error::Config(
                "tour orientation does not close around the vertex; flipping".into(),
            ));
        }
        let arc_b = {
            let mut b = offset(&trimmed[kb], down_side);
            b.reverse(); // walked v -> leaf
            b
        };
        // connector through the sector
        let sweep = (th_b - th_a).rem_euclid(two_pi);
        let bis = th_a + 0.5 * sweep;
        let mid = v + C64::from_polar(1.5 * eps, bis);
        let conn1 = vec![*arc_a.last().unwrap(), mid];
        (phi, w) = advance(&conn1, w, phi)?;
        // the vertex limit from inside this sector
        let to_v = vec![mid, v + C64::from_polar(1e-9, bis)];
        let (phi_v, _) = advance(&to_v, w, phi)?;
        vertices.push(phi_v); // p2 / p4 / p6
        probes.push(phi); // probe for the vertex corner: the connector midpoint
        let conn2 = vec![mid, arc_b[0]];
        (phi, w) = advance(&conn2, w, phi)?;
        // outward along arc kb to its leaf
        (phi, w) = advance(&arc_b, w, phi)?;
        // leaf limit through the local antiderivative
        let leaf = tree.leaves[kb];
        let local = ctx.turning_local(leaf)?;
        let end_pt = *arc_b.last().unwrap();
        let (sheet, sep) = local.match_sheet(w, ln_t_of(end_pt, leaf));
        if sep < 3.0 {
            return Err(Error::AmbiguousBranch { z: end_pt });
        }
        let p_leaf = phi - om(sheet) * local.phi_base().eval_ln(ln_t_of(end_pt, leaf));
        vertices.push(p_leaf); // p3 / p5 / p7
        if leg == 2 {
            break;
        }
        // passage around the leaf onto the other strand of kb
        up_side = -down_side;
        let next_a = offset(&trimmed[kb], up_side);
        let re_entry = next_a[0];
        let th_in = (end_pt - leaf).arg();
        // rotate around the leaf without crossing the arc: sweep on the
        // side away from the arc's exit direction
        let th_arc = tree.leaf_angles[kb];
        let mut th_out = (re_entry - leaf).arg();
        let mut th_rel_out = (th_out - th_in).rem_euclid(two_pi);
        let th_rel_arc = (th_arc - th_in).rem_euclid(two_pi);
        if th_rel_arc < th_rel_out {
            // counterclockwise passage would cross the arc: go clockwise
            th_rel_out -= two_pi;
        }
        th_out = th_in + th_rel_out;
        let r_in = (end_pt - leaf).norm();
        let r_out = (re_entry - leaf).norm();
        let steps = ((th_out - th_in).abs() / 0.12).ceil() as usize;
        let mut passage = vec![end_pt];
        for i in 1..=steps.max(2) {
            let t = i as f64 / steps.max(2) as f64;
            let th = th_in + (th_out - th_in) * t;
            let r = r_in + (r_out - r_in) * t;
            passage.push(leaf + C64::from_polar(r, th));
        }
        // probe for the leaf corner: mid-passage phase
        let half = passage.len() / 2;
        let (phi_half, w_half) = advance(&passage[..=half], w, phi)?;
        probes.push(phi_half);
        let (phi_end, w_end) = advance(&passage[half..], w_half, phi_half)?;
        phi = phi_end;
        w = w_end;
    }

    if vertices.len() != 7 {
        return Err(Error::Config(format!("tour produced {} vertices", vertices.len())));
    }
    // Orientation: p1 - p7 must be +2 pi i. A clockwise tour is the same
    // boundary walked backwards: relabel in reverse and renormalize.
    let closure = vertices[0] - vertices[6];
    if closure.im < 0.0 {
        let base = vertices[6];
        let mut rev: Vec<C64> = vertices.iter().rev().map(|&p| p - base).collect();
        std::mem::swap(&mut vertices, &mut rev);
        probes.reverse();
        for pr in probes.iter_mut() {
            *pr -= base;
        }
    }

    // interior angles at p2..p6, measured through the probe direction
    let mut interior_angles = Vec::new();
    for i in 1..=5 {
        let prev = vertices[i - 1];
        let here = vertices[i];
        let next = vertices[i + 1];
        let probe = probes[i - 1];
        let a = (prev - here).arg();
        let b = (next - here).arg();
        let g = (probe - here).arg();
        let two_pi = 2.0 * std::f64::consts::PI;
        let sweep_ab = (b - a).rem_euclid(two_pi);
        let sweep_ag = (g - a).rem_euclid(two_pi);
        let angle = if sweep_ag <= sweep_ab { sweep_ab } else { two_pi - sweep_ab };
        interior_angles.push(angle);
    }
    let segment_directions = (0..6).map(|i| (vertices[i + 1] - vertices[i]).arg()).collect();
    Ok(BRegionPolygon { vertices, interior_angles, segment_directions })
}

fn ln_t_of(z: C64, center: C64) -> C64 {
    let d = z - center;
    c64(d.norm().ln(), d.arg())
}

fn resample(pts: &[C64], ds: f64) -> Vec<C64> {
    let mut out = vec![pts[0]];
    let mut acc = 0.0f64;
    for seg in pts.windows(2) {
        let len = (seg[1] - seg[0]).norm();
        let mut s = 0.0;
        while s + (ds - acc) < len {
            s += ds - acc;
            acc = 0.0;
            out.push(seg[0] + (seg[1] - seg[0]) * (s / len));
        }
        acc += len - s;
    }
    out.push(*pts.last().unwrap());
    out
}
