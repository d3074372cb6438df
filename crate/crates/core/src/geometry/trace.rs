use super::support::CutArc;
use crate::quad::{BranchTrack, PathIntegrator, PathPoint, RootField};
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// Where a traced curve comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CurveOrigin {
    Turning(#[serde(with = "crate::serde_c64")] C64),
    Crossing(#[serde(with = "crate::serde_c64")] C64),
    Reference(#[serde(with = "crate::serde_c64")] C64),
}

/// Maximal run of samples with one dominance label.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabelSpan {
    pub start: usize,
    pub end: usize,
    /// True when `Re[alpha Phi] > 0` on the span: the first branch of the
    /// pair dominates (label `j > j'`), otherwise `j < j'`.
    pub first_dominant: bool,
    /// Set when `Re` stays within noise of zero across the whole span.
    pub degenerate: bool,
}

/// A traced level curve `Im[alpha Phi] = const` of the phase difference
/// between two characteristic branches.
#[derive(Debug, Clone, Serialize)]
pub struct TracedCurve {
    /// Global branch pair (j, j'), j < j'.
    pub curve_type: (usize, usize),
    pub origin: CurveOrigin,
    /// Branch exponents (p, q) so that the driving difference is
    /// `(omega^p - omega^q) w_base`; oriented (p first) for labels.
    pub pair: (usize, usize),
    #[serde(with = "crate::serde_c64::vec")]
    pub points: Vec<C64>,
    /// Continued base root along the points.
    #[serde(skip)]
    pub w_base: Vec<C64>,
    /// Accumulated `int w_base` from the origin (including the local piece
    /// from a turning-point origin).
    #[serde(skip)]
    pub phi: Vec<C64>,
    pub labels: Vec<LabelSpan>,
    pub closed: bool,
    pub escaped_to_infinity: bool,
    pub truncated: bool,
    /// Turning point whose clearance disk terminated the trace, if any.
    pub hit_turning: Option<usize>,
    pub inert: bool,
    /// Extension order M of the ambient algebra.
    #[serde(skip)]
    pub m_hint: usize,
    /// Support-cut transitions: at sample index i the stored branch was
    /// multiplied by `omega^delta` (index of the first post-cut sample).
    #[serde(skip)]
    pub cut_events: Vec<(usize, i64)>,
}

impl TracedCurve {
    pub fn alpha(&self) -> C64 {
        omega_pow(self.m_hint, self.pair.0) - omega_pow(self.m_hint, self.pair.1)
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Minimal distance from `z` to the polyline.
    pub fn distance_to(&self, z: C64) -> f64 {
        point_polyline_distance(z, &self.points)
    }

    pub fn label_at(&self, index: usize) -> Option<&LabelSpan> {
        self.labels.iter().find(|s| s.start <= index && index <= s.end)
    }
}

pub(crate) fn omega_pow(m: usize, p: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (p % m) as f64 / m as f64)
}

pub fn point_polyline_distance(z: C64, pts: &[C64]) -> f64 {
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() == 1 {
        return (z - pts[0]).norm();
    }
    let mut best = f64::INFINITY;
    for seg in pts.windows(2) {
        let d = seg[1] - seg[0];
        let len2 = d.norm_sqr();
        let t = if len2 > 0.0 {
            (((z - seg[0]).re * d.re) + ((z - seg[0]).im * d.im)) / len2
        } else {
            0.0
        }
        .clamp(0.0, 1.0);
        best = best.min((z - (seg[0] + d * t)).norm());
    }
    best
}

/// One trace starting state.
#[derive(Debug, Clone, Copy)]
pub struct Seed {
    pub z: C64,
    /// Continued base root at the seed.
    pub w: C64,
    /// Accumulated phase at the seed (zero except for turning-point seeds,
    /// where it carries the convergent local integral from the vertex).
    pub phi: C64,
    /// Branch exponent pair (p, q), oriented.
    pub pair: (usize, usize),
    /// Global type (j, j'), j < j'.
    pub jj: (usize, usize),
    /// Unit tangent to start along.
    pub direction: C64,
    pub origin: CurveOrigin,
}

/// Knobs of the curve tracer.
#[derive(Debug, Clone, Copy)]
pub struct TraceParams {
    pub r_max: f64,
    pub clearance: f64,
    /// Base step in z.
    pub step: f64,
    /// Closure detection radius.
    pub close_tol: f64,
    pub max_steps: usize,
    /// Which level is held constant: imaginary part (Stokes curves) when
    /// false, real part (support arcs) when true.
    pub follow_re: bool,
}

impl TraceParams {
    pub fn stokes(ctx: &BranchContext) -> Self {
        let r_max = 10.0
            * (1.0
                + ctx
                    .turning_points()
                    .points
                    .iter()
                    .map(|p| p.0.norm())
                    .fold(0.0, f64::max));
        TraceParams {
            r_max,
            clearance: ctx.clearance(),
            step: 0.01 * (1.0 + ctx.turning_points().diameter()),
            close_tol: 1e-4,
            max_steps: 40_000,
            follow_re: false,
        }
    }

    pub fn support(ctx: &BranchContext) -> Self {
        let mut p = TraceParams::stokes(ctx);
        p.follow_re = true;
        p
    }
}

/// Integrates the level curve from a seed.
///
/// The tangent is `v / (alpha w)` (times `i` for constant-real tracing) so
/// the held part of `alpha Phi` is constant by construction; a Newton
/// projection along `i/(alpha w)` pulls the accumulated drift back to the
/// level set after every step.
pub fn trace_curve(
    field: &RootField,
    seed: &Seed,
    tps: &[(C64, usize)],
    params: &TraceParams,
    m: usize,
) -> Result<TracedCurve> {
    trace_curve_with_cuts(field, seed, tps, params, m, &[])
}

/// Like [`trace_curve`], but crossings of the support arcs re-select the
/// cut-plane branch according to the measured factor of each arc.
///
/// This only applies to conjugate branch pairs (`p + q = 0 mod M`), whose
/// held level function is single-valued across the cut: for those the
/// curve continues as the level line of the same continuous function, as
/// it must for closed loops crossing the support. Other types keep the
/// plain analytic continuation.
pub fn trace_curve_with_cuts(
    field: &RootField,
    seed: &Seed,
    tps: &[(C64, usize)],
    params: &TraceParams,
    m: usize,
    cuts: &[CutArc],
) -> Result<TracedCurve> {
    let conjugate_pair = (seed.pair.0 + seed.pair.1) % m == 0;
    let cuts: &[CutArc] = if conjugate_pair { cuts } else { &[] };
    let omega = omega_pow(m, 1);
    let alpha = omega_pow(m, seed.pair.0) - omega_pow(m, seed.pair.1);
    let rot = if params.follow_re { c64(0.0, 1.0) } else { c64(1.0, 0.0) };
    // level value held fixed (drift measured against it)
    let held = |phi: C64| -> f64 {
        let v = alpha * phi * rot;
        v.im
    };
    let target = held(seed.phi);

    let mut points = vec![seed.z];
    let mut ws = vec![seed.w];
    let mut phis = vec![seed.phi];
    let mut z = seed.z;
    let mut w = seed.w;
    let mut phi = seed.phi;
    // orientation sign: fix v so the initial tangent matches the seed
    let t0 = rot / (alpha * w);
    let dir = t0 / t0.norm();
    let v_sign = if (dir.conj() * seed.direction).re >= 0.0 { 1.0 } else { -1.0 };

    let mut h = params.step;
    let mut closed = false;
    let mut escaped = false;
    let mut truncated = false;
    let mut hit_turning = None;
    let mut arc_len = 0.0f64;
    let mut cut_events: Vec<(usize, i64)> = Vec::new();

    'outer: for _ in 0..params.max_steps {
        // tangent field: dz/ds = v * rot / (alpha w), unit-speed in Phi.
        // Near a turning point the roots crowd together and both the
        // prediction and the curvature blow up: cap the step by the
        // distance so continuation margins stay meaningful.
        let d_tp = tps
            .iter()
            .map(|&(tp, _)| (z - tp).norm())
            .fold(f64::INFINITY, f64::min);
        let speed = (rot / (alpha * w)).norm();
        let h_cap = (0.15 * d_tp / speed.max(1e-300)).max(1e-6 * params.step);
        let mut accepted = false;
        for _ in 0..40 {
            let h_eff = h.min(h_cap);
            match rk4_step(field, z, w, h_eff, alpha, rot, v_sign) {
                Ok((z1, w1, dphi)) => {
                    // reject wildly turning steps
                    let t_new = rot / (alpha * w1);
                    let t_old = rot / (alpha * w);
                    let turn = (t_new / t_old).arg().abs();
                    if turn > 0.35 && h > 1e-9 * params.step {
                        h *= 0.5;
                        continue;
                    }
                    // support-cut transition: land just past the crossing
                    // and re-select the branch by the measured factor
                    if let Some((x, dsgn)) = cut_crossing(cuts, z, z1, params.clearance) {
                        // approach the cut with small steps so the hop gap
                        // stays well inside the quadrature budget
                        if (z1 - z).norm() > 0.05 * params.step {
                            h *= 0.4;
                            continue;
                        }
                        let u = (z1 - z) / (z1 - z).norm();
                        let eps_c = 1e-9 * (1.0 + x.norm());
                        let x_before = x - u * eps_c;
                        let x_mid = (z + x_before) * 0.5;
                        let (w_mid, mg0) = field.nearest(x_mid, field.predict(z, w, x_mid - z))?;
                        let (w_pre, mg1) = field.nearest(x_before, field.predict(x_mid, w_mid, x_before - x_mid))?;
                        let x_after = x + u * eps_c;
                        let guess = w_pre * omega.powi(dsgn as i32);
                        let (w_post, mg2) = field.nearest(x_after, guess)?;
                        if mg0 < 3.0 || mg1 < 3.0 || mg2 < 3.0 {
                            truncated = true;
                            break 'outer;
                        }
                        phi += (w + w_mid * 4.0 + w_pre) / 6.0 * (x_before - z) + w_post * (x_after - x_before);
                        arc_len += (x_after - z).norm();
                        z = x_after;
                        w = w_post;
                        points.push(z);
                        ws.push(w);
                        phis.push(phi);
                        cut_events.push((points.len() - 1, dsgn));
                        accepted = true;
                        break;
                    }
                    // accept
                    let mut z1 = z1;
                    let mut phi1 = phi + dphi;
                    let mut w1 = w1;
                    // Newton projection back to the level set
                    for _ in 0..2 {
                        let drift = held(phi1) - target;
                        if drift.abs() < 1e-14 {
                            break;
                        }
                        let corr = -drift * (rot * c64(0.0, 1.0)) / (alpha * w1 * rot);
                        let (w_corr, margin) = field.nearest(z1 + corr, field.predict(z1, w1, corr))?;
                        if margin < 3.0 {
                            break;
                        }
                        phi1 += (w1 + w_corr) * 0.5 * corr;
                        z1 += corr;
                        w1 = w_corr;
                    }
                    arc_len += (z1 - z).norm();
                    z = z1;
                    w = w1;
                    phi = phi1;
                    points.push(z);
                    ws.push(w);
                    phis.push(phi);
                    if turn < 0.08 {
                        h = (h * 1.4).min(params.step);
                    }
                    accepted = true;
                    break;
                }
                Err(_) => {
                    h *= 0.5;
                    if h < 1e-10 * params.step {
                        truncated = true;
                        break 'outer;
                    }
                }
            }
        }
        if !accepted {
            truncated = true;
            break;
        }
        // termination tests
        if z.norm() > params.r_max {
            escaped = true;
            break;
        }
        if let Some(i) = tps.iter().position(|&(tp, _)| (z - tp).norm() < params.clearance) {
            hit_turning = Some(i);
            break;
        }
        if arc_len > 10.0 * params.close_tol {
            // closure: head returns near the seed with consistent direction
            let d = (z - seed.z).norm();
            if d < params.close_tol && arc_len > 20.0 * params.close_tol {
                let t_now = v_sign * rot / (alpha * w);
                if (t_now.conj() * seed.direction).re > 0.0 {
                    closed = true;
                    points.push(seed.z);
                    ws.push(seed.w);
                    phis.push(phi + (w + seed.w) * 0.5 * (seed.z - z));
                    break;
                }
            }
        }
        if arc_len > 6.0 * params.r_max {
            truncated = true;
            break;
        }
    }

    let mut curve = TracedCurve {
        curve_type: seed.jj,
        origin: seed.origin,
        pair: seed.pair,
        points,
        w_base: ws,
        phi: phis,
        labels: Vec::new(),
        closed,
        escaped_to_infinity: escaped,
        truncated,
        hit_turning,
        inert: false,
        m_hint: m,
        cut_events,
    };
    curve.labels = label_curve(&curve);
    Ok(curve)
}

/// First crossing of the segment [a, b] with any cut arc, away from the
/// ambiguous zones at the arc endpoints. Returns the crossing point and the
/// signed branch-shift exponent for the traversal direction.
fn cut_crossing(cuts: &[CutArc], a: C64, b: C64, clearance: f64) -> Option<(C64, i64)> {
    let guard = 2.5 * clearance;
    for arc in cuts {
        let n = arc.points.len();
        if n < 2 {
            continue;
        }
        let first = arc.points[0];
        let last = arc.points[n - 1];
        for i in 0..n - 1 {
            let (p, q) = (arc.points[i], arc.points[i + 1]);
            if let Some(x) = super::support::segment_intersection(a, b, p, q) {
                if (x - first).norm() < guard || (x - last).norm() < guard {
                    continue;
                }
                let t_arc = (q - p) / (q - p).norm();
                let u = (b - a) / (b - a).norm();
                // left-to-right when the travel direction points against
                // the arc's left normal
                let lr = (u * t_arc.conj()).im < 0.0;
                let dsgn = if lr { arc.delta_lr } else { -arc.delta_lr };
                return Some((x, dsgn));
            }
        }
    }
    None
}

fn rk4_step(
    field: &RootField,
    z: C64,
    w: C64,
    h: f64,
    alpha: C64,
    rot: C64,
    v_sign: f64,
) -> Result<(C64, C64, C64)> {
    let f = |_zz: C64, ww: C64| -> C64 { v_sign * rot / (alpha * ww) };
    let w_at = |z_from: C64, w_from: C64, z_to: C64| -> Result<C64> {
        let pred = field.predict(z_from, w_from, z_to - z_from);
        let (wv, margin) = field.nearest(z_to, pred)?;
        if margin < 3.0 {
            return Err(Error::AmbiguousBranch { z: z_to });
        }
        Ok(wv)
    };
    let k1 = f(z, w);
    let zm1 = z + k1 * (h / 2.0);
    let wm1 = w_at(z, w, zm1)?;
    let k2 = f(zm1, wm1);
    let zm2 = z + k2 * (h / 2.0);
    let wm2 = w_at(z, w, zm2)?;
    let k3 = f(zm2, wm2);
    let ze = z + k3 * h;
    let we = w_at(zm2, wm2, ze)?;
    let k4 = f(ze, we);
    let z1 = z + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    let w1 = w_at(ze, we, z1)?;
    // phase increment by Simpson on the endpoints/midpoint values
    let wm = w_at(z, w, (z + z1) * 0.5)?;
    let dphi = (w + wm * 4.0 + w1) / 6.0 * (z1 - z);
    Ok((z1, w1, dphi))
}

/// Splits the samples into spans of constant dominance sign of
/// `Re[alpha Phi]`; a whole span within noise of zero is flagged degenerate.
pub fn label_curve(curve: &TracedCurve) -> Vec<LabelSpan> {
    let alpha = curve.alpha();
    let res: Vec<f64> = curve.phi.iter().map(|&p| (alpha * p).re).collect();
    let scale = res.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let eps = 1e-9 * scale.max(1e-12);
    let mut spans: Vec<LabelSpan> = Vec::new();
    let mut start = 0usize;
    let mut sign = 0i8;
    for (i, &r) in res.iter().enumerate() {
        let s = if r > eps {
            1i8
        } else if r < -eps {
            -1i8
        } else {
            0i8
        };
        if i == 0 {
            sign = s;
            continue;
        }
        if s != sign && s != 0 && sign != 0 {
            spans.push(LabelSpan {
                start,
                end: i - 1,
                first_dominant: sign > 0,
                degenerate: false,
            });
            start = i;
            sign = s;
        } else if sign == 0 && s != 0 {
            sign = s;
        }
    }
    let all_zero = res.iter().all(|r| r.abs() <= eps);
    spans.push(LabelSpan {
        start,
        end: res.len().saturating_sub(1),
        first_dominant: sign > 0,
        degenerate: all_zero,
    });
    spans
}

/// Re-integrates the phase along the stored polyline with adaptive
/// quadrature and reports the worst level-set drift `|Im[alpha (Phi -
/// Phi_seed)]|` (or `Re` for support-type curves).
pub fn verify_drift(curve: &TracedCurve, field: &RootField, follow_re: bool) -> Result<f64> {
    let alpha = curve.alpha();
    let rot = if follow_re { c64(0.0, 1.0) } else { c64(1.0, 0.0) };
    let target = (alpha * curve.phi[0] * rot).im;
    let integ = PathIntegrator::new(field, 1e-10);
    let omega = omega_pow(curve.m_hint, 1);
    let mut worst = 0.0f64;
    let mut phi = curve.phi[0];
    let mut w = curve.w_base[0];
    // verify in chunks, breaking at the recorded cut transitions
    let chunk = 64usize;
    let mut idx = 0usize;
    let mut events = curve.cut_events.iter().peekable();
    while idx + 1 < curve.points.len() {
        let mut end = (idx + chunk).min(curve.points.len() - 1);
        let mut pending_cut = None;
        if let Some(&&(ei, dsgn)) = events.peek() {
            if ei > idx && ei <= end {
                end = ei;
                pending_cut = Some(dsgn);
            }
        }
        if end == idx {
            break;
        }
        // integrate up to the sample just before a transition
        let stop = if pending_cut.is_some() { end - 1 } else { end };
        if stop > idx {
            let path = &curve.points[idx..=stop];
            let f: Box<dyn Fn(&PathPoint) -> C64> = Box::new(|p: &PathPoint| p.w);
            let (vals, w_end, _) = integ.integrate(path, w, &[&*f])?;
            phi += vals[0];
            w = w_end;
            let drift = ((alpha * phi * rot).im - target).abs();
            worst = worst.max(drift);
        }
        if let Some(dsgn) = pending_cut {
            // integrate the pre-cut branch over the gap by Simpson, then
            // hop with the recorded branch shift
            let z_prev = curve.points[stop];
            let z_next = curve.points[end];
            let z_mid = (z_prev + z_next) * 0.5;
            let (w_mid, _) = field.nearest(z_mid, field.predict(z_prev, w, z_mid - z_prev))?;
            let (w_honest, _) = field.nearest(z_next, field.predict(z_mid, w_mid, z_next - z_mid))?;
            phi += (w + w_mid * 4.0 + w_honest) / 6.0 * (z_next - z_prev);
            let guess = w_honest * omega.powi(dsgn as i32);
            let (w_post, _) = field.nearest(z_next, guess)?;
            w = w_post;
            events.next();
        }
        idx = end;
    }
    Ok(worst)
}

/// Short branch continuation helper for refinement steps.
pub fn continue_short(field: &RootField, z_from: C64, w_from: C64, z_to: C64) -> Result<C64> {
    if (z_to - z_from).norm() == 0.0 {
        return Ok(w_from);
    }
    Ok(BranchTrack::walk(field, z_from, z_to, w_from)?.w_end())
}
