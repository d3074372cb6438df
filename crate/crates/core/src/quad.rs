//! Adaptive Gauss-Legendre quadrature along polylines in the complex plane,
//! with branch-continued evaluation of roots of `rho_M(z) w^M = 1`.
//!
//! Branch continuation is decoupled from quadrature: a segment is first
//! walked adaptively to record a dense track of (position, root) samples,
//! then quadrature nodes snap to the nearest root predicted from the track.

use crate::algebra::ComplexPoly;
use crate::{c64, C64, Error, Result};
use std::sync::OnceLock;

const GL_N: usize = 15;
/// Margin by which the chosen root must beat the runner-up.
const BRANCH_MARGIN: f64 = 3.0;

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n from Chebyshev initial guesses.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_N))
}

/// The characteristic root field: solutions of `rho(z) w^m = 1`.
#[derive(Debug, Clone)]
pub struct RootField {
    pub rho: ComplexPoly,
    pub m: usize,
}

impl RootField {
    pub fn new(rho: ComplexPoly, m: usize) -> Self {
        RootField { rho, m }
    }

    /// All `m` root values at `z`.
    pub fn candidates(&self, z: C64) -> Result<Vec<C64>> {
        let r = self.rho.eval(z);
        if r.norm() < 1e-280 {
            return Err(Error::PathClearance { distance: 0.0, clearance: 0.0 });
        }
        let principal = (-r.ln() / self.m as f64).exp();
        Ok((0..self.m)
            .map(|s| principal * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / self.m as f64))
            .collect())
    }

    /// Root nearest to `guess`; errors when the margin over the runner-up is
    /// below the continuation threshold.
    pub fn nearest(&self, z: C64, guess: C64) -> Result<(C64, f64)> {
        let cands = self.candidates(z)?;
        let mut best = (c64(0.0, 0.0), f64::INFINITY);
        let mut second = f64::INFINITY;
        for c in cands {
            let d = (c - guess).norm();
            if d < best.1 {
                second = best.1;
                best = (c, d);
            } else if d < second {
                second = d;
            }
        }
        let margin = if best.1 == 0.0 { f64::INFINITY } else { second / best.1 };
        Ok((best.0, margin))
    }

    /// First-order prediction of the root after a step `dz` from `(z, w)`,
    /// from the logarithmic derivative `w'/w = -rho'/(m rho)`.
    pub fn predict(&self, z: C64, w: C64, dz: C64) -> C64 {
        let r = self.rho.eval(z);
        let dr = self.rho.derivative().eval(z);
        w * (c64(1.0, 0.0) - dr / r * dz / self.m as f64)
    }
}

/// Densely sampled branch values along one straight segment.
pub struct BranchTrack {
    a: C64,
    b: C64,
    ts: Vec<f64>,
    ws: Vec<C64>,
}

impl BranchTrack {
    /// Walks `a -> b` continuing the root from `w_a`, halving the step until
    /// the chosen root is uniquely nearest by the margin factor.
    pub fn walk(field: &RootField, a: C64, b: C64, w_a: C64) -> Result<BranchTrack> {
        let (w0, margin0) = field.nearest(a, w_a)?;
        if margin0 < BRANCH_MARGIN || (w0 - w_a).norm() > 0.5 * w_a.norm() {
            return Err(Error::AmbiguousBranch { z: a });
        }
        let mut ts = vec![0.0];
        let mut ws = vec![w0];
        let mut t = 0.0f64;
        let mut h = 0.25f64;
        let dzdt = b - a;
        while t < 1.0 {
            h = h.min(1.0 - t);
            let mut accepted = false;
            for _ in 0..48 {
                let t1 = t + h;
                let z0 = a + dzdt * t;
                let z1 = a + dzdt * t1;
                let w = *ws.last().unwrap();
                let pred = field.predict(z0, w, z1 - z0);
                match field.nearest(z1, pred) {
                    Ok((w1, margin)) if margin >= BRANCH_MARGIN => {
                        ts.push(t1);
                        ws.push(w1);
                        t = t1;
                        h = (h * 1.5).min(0.25);
                        accepted = true;
                        break;
                    }
                    _ => {
                        h *= 0.5;
                        if h < 1e-12 {
                            return Err(Error::AmbiguousBranch { z: z1 });
                        }
                    }
                }
            }
            if !accepted {
                return Err(Error::AmbiguousBranch { z: a + dzdt * t });
            }
        }
        Ok(BranchTrack { a, b, ts, ws })
    }

    pub fn w_end(&self) -> C64 {
        *self.ws.last().unwrap()
    }

    /// Root at parameter `t` in [0,1], predicted from the nearest recorded
    /// sample and snapped to the exact root set. Falls back to walking the
    /// gap when the one-hop prediction is not decisive.
    pub fn at(&self, field: &RootField, t: f64) -> Result<C64> {
        let idx = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let z_ref = self.a + (self.b - self.a) * self.ts[idx];
        let z = self.a + (self.b - self.a) * t;
        if (z - z_ref).norm() == 0.0 {
            return Ok(self.ws[idx]);
        }
        let pred = field.predict(z_ref, self.ws[idx], z - z_ref);
        let (w, margin) = field.nearest(z, pred)?;
        if margin < 3.0 {
            let sub = BranchTrack::walk(field, z_ref, z, self.ws[idx])?;
            return Ok(sub.w_end());
        }
        Ok(w)
    }
}

/// Evaluation context handed to path integrands.
#[derive(Debug, Clone, Copy)]
pub struct PathPoint {
    pub z: C64,
    /// Continued characteristic root at `z`.
    pub w: C64,
    /// `ln(z - center)` continued along the path, when a center was given.
    pub ln_t: C64,
}

pub type Integrand<'a> = &'a dyn Fn(&PathPoint) -> C64;

/// Adaptive integration of several integrands along the polyline `path`,
/// sharing one continued branch starting from `w_start`.
///
/// Returns the integrals and the continued root at the end of the path.
/// `center`, when present, threads a continuous logarithm of `z - center`
/// through the integration (`arg_start` is its imaginary part at the start).
pub struct PathIntegrator<'a> {
    pub field: &'a RootField,
    pub tol: f64,
    pub center: Option<(C64, f64)>,
}

impl<'a> PathIntegrator<'a> {
    pub fn new(field: &'a RootField, tol: f64) -> Self {
        PathIntegrator { field, tol, center: None }
    }

    pub fn with_center(field: &'a RootField, tol: f64, center: C64, arg_start: f64) -> Self {
        PathIntegrator { field, tol, center: Some((center, arg_start)) }
    }

    pub fn integrate(&self, path: &[C64], w_start: C64, fs: &[Integrand]) -> Result<(Vec<C64>, C64, f64)> {
        assert!(path.len() >= 2, "path needs at least two points");
        let mut totals = vec![c64(0.0, 0.0); fs.len()];
        let mut w = w_start;
        let mut arg = self.center.map(|(c, a0)| {
            let mut th = (path[0] - c).arg();
            let k = ((a0 - th) / (2.0 * std::f64::consts::PI)).round();
            th += 2.0 * std::f64::consts::PI * k;
            th
        });
        let total_len: f64 = path.windows(2).map(|p| (p[1] - p[0]).norm()).sum();
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if (b - a).norm() == 0.0 {
                continue;
            }
            let track = BranchTrack::walk(self.field, a, b, w)?;
            let seg_tol = self.tol * ((b - a).norm() / total_len.max(1e-300)).max(1e-3);
            let vals = self.segment(&track, a, b, fs, &mut arg, seg_tol, 0)?;
            for (tot, v) in totals.iter_mut().zip(vals) {
                *tot += v;
            }
            w = track.w_end();
        }
        let arg_end = arg.unwrap_or(0.0);
        Ok((totals, w, arg_end))
    }

    fn node_point(&self, track: &BranchTrack, a: C64, b: C64, t: f64, arg_ref: Option<(C64, f64)>) -> Result<PathPoint> {
        let z = a + (b - a) * t;
        let w = track.at(self.field, t)?;
        let ln_t = match (self.center, arg_ref) {
            (Some((c, _)), Some((z_ref, arg0))) => {
                let d = z - c;
                let mut th = d.arg();
                // unwrap relative to the reference point's continued argument
                let ref_th = (z_ref - c).arg();
                let dtheta = ((th - ref_th) + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                    - std::f64::consts::PI;
                th = arg0 + dtheta;
                c64(d.norm().ln(), th)
            }
            _ => c64(0.0, 0.0),
        };
        Ok(PathPoint { z, w, ln_t })
    }

    #[allow(clippy::too_many_arguments)]
    fn segment(
        &self,
        track: &BranchTrack,
        a: C64,
        b: C64,
        fs: &[Integrand],
        arg: &mut Option<f64>,
        tol: f64,
        depth: u32,
    ) -> Result<Vec<C64>> {
        // Recursive bisection comparing one GL panel against two.
        let whole = self.panel(track, a, b, fs, *arg, 0.0, 1.0)?;
        let (vals, err_acc) = self.refine(track, a, b, fs, *arg, 0.0, 1.0, &whole, tol, depth)?;
        if err_acc > 100.0 * tol.max(1e-14) {
            return Err(Error::Quadrature(format!(
                "accumulated panel error {err_acc:.3e} exceeds the budget for tol {tol:.3e}"
            )));
        }
        // advance the continued argument across the whole segment
        if let Some((c, _)) = self.center {
            let mut th = *arg;
            let steps = 64;
            let mut prev = (a - c).arg();
            let mut acc = th.take().unwrap_or(0.0);
            for i in 1..=steps {
                let z = a + (b - a) * (i as f64 / steps as f64);
                let cur = (z - c).arg();
                let mut d = cur - prev;
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                acc += d;
                prev = cur;
            }
            *arg = Some(acc);
        }
        Ok(vals)
    }

    /// Returns the refined panel values plus an accumulated error estimate;
    /// panels at the depth cap are accepted and their residual error is
    /// carried upward instead of failing outright.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        track: &BranchTrack,
        a: C64,
        b: C64,
        fs: &[Integrand],
        arg: Option<f64>,
        t0: f64,
        t1: f64,
        whole: &[C64],
        tol: f64,
        depth: u32,
    ) -> Result<(Vec<C64>, f64)> {
        let tm = 0.5 * (t0 + t1);
        let left = self.panel(track, a, b, fs, arg, t0, tm)?;
        let right = self.panel(track, a, b, fs, arg, tm, t1)?;
        let mut err = 0.0f64;
        let mut mag = 0.0f64;
        for k in 0..fs.len() {
            err = err.max((whole[k] - left[k] - right[k]).norm());
            mag = mag.max(left[k].norm() + right[k].norm());
        }
        // proportional tolerance with a rounding floor
        let local_tol = (tol * (t1 - t0)).max(1e-15 * (1.0 + mag));
        if err <= local_tol || depth >= 26 {
            let sum: Vec<C64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
            return Ok((sum, if err <= local_tol { 0.0 } else { err }));
        }
        let (lv, le) = self.refine(track, a, b, fs, arg, t0, tm, &left, tol, depth + 1)?;
        let (rv, re) = self.refine(track, a, b, fs, arg, tm, t1, &right, tol, depth + 1)?;
        let sum: Vec<C64> = lv.iter().zip(&rv).map(|(l, r)| l + r).collect();
        Ok((sum, le + re))
    }

    #[allow(clippy::too_many_arguments)]
    fn panel(
        &self,
        track: &BranchTrack,
        a: C64,
        b: C64,
        fs: &[Integrand],
        arg: Option<f64>,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<C64>> {
        let (nodes, weights) = gl15();
        let dz = b - a;
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        let mut acc = vec![c64(0.0, 0.0); fs.len()];
        let arg_ref = arg.map(|a0| (a + dz * t0, {
            // carry the argument from segment start to t0 along the chord
            let mut acc_arg = a0;
            if let Some((c, _)) = self.center {
                let steps = 32;
                let mut prev = (a - c).arg();
                for i in 1..=steps {
                    let z = a + dz * (t0 * i as f64 / steps as f64);
                    let cur = (z - c).arg();
                    let mut d = cur - prev;
                    while d > std::f64::consts::PI {
                        d -= 2.0 * std::f64::consts::PI;
                    }
                    while d < -std::f64::consts::PI {
                        d += 2.0 * std::f64::consts::PI;
                    }
                    acc_arg += d;
                    prev = cur;
                }
            }
            acc_arg
        }));
        for (x, wq) in nodes.iter().zip(weights) {
            let t = mid + half * x;
            let p = self.node_point(track, a, b, t, arg_ref)?;
            for (k, f) in fs.iter().enumerate() {
                acc[k] += f(&p) * *wq;
            }
        }
        let scale = dz * half;
        Ok(acc.into_iter().map(|v| v * scale).collect())
    }
}

/// Convenience: continue the branch along a polyline without integrating.
pub fn continue_root(field: &RootField, path: &[C64], w_start: C64) -> Result<C64> {
    let mut w = w_start;
    for seg in path.windows(2) {
        if (seg[1] - seg[0]).norm() == 0.0 {
            continue;
        }
        let track = BranchTrack::walk(field, seg[0], seg[1], w)?;
        w = track.w_end();
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(center: C64, r: f64, n: usize) -> Vec<C64> {
        (0..=n)
            .map(|k| center + C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect()
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (nodes, weights) = legendre_rule(15);
        // degree-28 polynomial is integrated exactly by GL15
        let f = |x: f64| x.powi(28) + 3.0 * x.powi(5) - x;
        let got: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * f(x)).sum();
        let want = 2.0 / 29.0;
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn arccosh_integral_on_real_segment() {
        // rho = z^2 - 1, w = (z^2-1)^{-1/2}; integral from 2 to 4 of w dz
        let field = RootField::new(ComplexPoly::from_real(&[-1.0, 0.0, 1.0]), 2);
        let a = c64(2.0, 0.0);
        let w_a = c64(1.0, 0.0) / (a * a - 1.0).sqrt();
        let integ = PathIntegrator::new(&field, 1e-12);
        let (vals, _, _) = integ
            .integrate(&[a, c64(4.0, 0.0)], w_a, &[&|p: &PathPoint| p.w])
            .unwrap();
        let want = (4.0 + 15f64.sqrt()).ln() - (2.0 + 3f64.sqrt()).ln();
        assert!((vals[0] - c64(want, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn loop_integral_of_w_counts_residue() {
        // rho = z^2: w = 1/z (principal branch at z=2 is 1/2); closed loop
        // integral is 2 pi i.
        let field = RootField::new(ComplexPoly::from_real(&[0.0, 0.0, 1.0]), 2);
        let path = circle(c64(0.0, 0.0), 2.0, 48);
        let w_a = c64(0.5, 0.0);
        let integ = PathIntegrator::new(&field, 1e-12);
        let (vals, w_end, _) = integ.integrate(&path, w_a, &[&|p: &PathPoint| p.w]).unwrap();
        assert!((vals[0] - c64(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-9);
        assert!((w_end - w_a).norm() < 1e-10);
    }

    #[test]
    fn winding_tracker_accumulates_2pi() {
        let field = RootField::new(ComplexPoly::from_real(&[0.0, 0.0, 1.0]), 2);
        let center = c64(0.0, 0.0);
        let path = circle(center, 1.5, 32);
        let integ = PathIntegrator::with_center(&field, 1e-10, center, 0.0);
        let (_, _, arg_end) = integ
            .integrate(&path, c64(1.0 / 1.5, 0.0), &[&|_p: &PathPoint| c64(0.0, 0.0)])
            .unwrap();
        assert!((arg_end - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn branch_continuation_monodromy_on_cube_roots() {
        // rho = z^3 - 1. Around all three zeros arg(rho) advances by 6 pi,
        // so w = rho^{-1/3} picks up e^{-2 pi i} = 1: trivial monodromy,
        // consistent with w ~ 1/z being single-valued near infinity. Around
        // a single simple zero the factor is e^{-2 pi i/3} (counterclockwise).
        let field = RootField::new(ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]), 3);
        let full = circle(c64(0.0, 0.0), 3.0, 64);
        let z0 = full[0];
        let w0 = (c64(1.0, 0.0) / (z0 * z0 * z0 - 1.0)).powf(1.0 / 3.0);
        let w_end = continue_root(&field, &full, w0).unwrap();
        assert!((w_end - w0).norm() < 1e-9, "full loop should be trivial, got {w_end} vs {w0}");

        let single = circle(c64(1.0, 0.0), 0.4, 64);
        let z1 = single[0];
        let w1 = (c64(1.0, 0.0) / (z1 * z1 * z1 - 1.0)).powf(1.0 / 3.0);
        let w1_end = continue_root(&field, &single, w1).unwrap();
        let expected = w1 * C64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
        assert!((w1_end - expected).norm() < 1e-9, "got {w1_end}, want {expected}");

        // clockwise reverses the factor
        let mut rev = single.clone();
        rev.reverse();
        let w2_end = continue_root(&field, &rev, w1).unwrap();
        let expected2 = w1 * C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!((w2_end - expected2).norm() < 1e-9);
    }
}
