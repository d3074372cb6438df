use super::trace::{omega_pow, CurveOrigin, Seed};
use crate::algebra::TurningLocal;
use crate::quad::continue_root;
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};

/// Raw sign-change ray at a turning point, before global branch labels are
/// attached: the local sheet pair plus the lifted angle.
#[derive(Debug, Clone, Copy)]
pub struct LocalRay {
    pub theta: f64,
    pub sheets: (usize, usize),
    /// Base-sheet antiderivative value at the ray point.
    pub phi_base: C64,
    /// Base-sheet root value at the ray point.
    pub w_base: C64,
}

/// Scans the circle of radius `r0` around the turning point for sign
/// changes of the scanned part of `(omega^{s1} - omega^{s2}) Phi_loc` over
/// every sheet pair. `im_part` selects Stokes rays (imaginary part) versus
/// support/anti-Stokes rays (real part). The window is `theta_from` to
/// `theta_from + 2 pi`, walked on the lifted cover so the continuation
/// never jumps.
pub fn scan_rays(
    local: &TurningLocal,
    r0: f64,
    theta_from: f64,
    im_part: bool,
    grid: usize,
) -> Vec<LocalRay> {
    let m = local.m;
    let mut rays = Vec::new();
    let part = |v: C64| if im_part { v.im } else { v.re };
    for s1 in 0..m {
        for s2 in s1 + 1..m {
            let a = omega_pow(m, s1) - omega_pow(m, s2);
            let h = |theta: f64| -> (C64, C64) {
                let ln_t = c64(r0.ln(), theta);
                (local.phi_sheet(0, ln_t), local.w_sheet(0, ln_t))
            };
            let mut prev = part(a * h(theta_from).0);
            for i in 1..=grid {
                let th = theta_from + 2.0 * std::f64::consts::PI * i as f64 / grid as f64;
                let cur = part(a * h(th).0);
                if prev == 0.0 || cur == 0.0 || prev.signum() != cur.signum() {
                    // bisection refine
                    let mut lo = theta_from + 2.0 * std::f64::consts::PI * (i - 1) as f64 / grid as f64;
                    let mut hi = th;
                    let mut flo = prev;
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        let fm = part(a * h(mid).0);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if fm.signum() == flo.signum() {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    let theta = 0.5 * (lo + hi);
                    let (phi_b, w_b) = h(theta);
                    rays.push(LocalRay { theta, sheets: (s1, s2), phi_base: phi_b, w_base: w_b });
                }
                prev = cur;
            }
        }
    }
    // deduplicate rays that refined to the same angle and pair
    rays.dedup_by(|a, b| a.sheets == b.sheets && (a.theta - b.theta).abs() < 1e-9);
    rays
}

/// Identifies the local sheet carrying the global `w_1` branch at the
/// outward point of the scan circle, and returns the lifted angle window
/// for a tree-slit scan.
pub struct SheetFrame {
    pub r0: f64,
    /// Sheet index s* with `w_1 = omega^{s*} w_base` near the turning point.
    pub base_sheet: usize,
    /// Start of the scan window on the lift (just past the tree direction).
    pub theta_from: f64,
}

/// Builds the sheet frame at `z_k`. `tree_angle`, when known, is the
/// direction in which the support arc leaves `z_k`; the scan window then
/// opens just past it so the circle walk never crosses the cut.
pub fn sheet_frame(
    ctx: &BranchContext,
    local: &TurningLocal,
    tree_angle: Option<f64>,
) -> Result<SheetFrame> {
    let z_k = local.z_k;
    let r0 = ctx.local_radius(z_k);
    let out_dir = z_k - ctx.centroid();
    let theta_out_raw = if out_dir.norm() > 1e-12 { out_dir.arg() } else { 0.0 };
    let slit = tree_angle.unwrap_or(theta_out_raw + std::f64::consts::PI);
    // lift theta_out into the scan window (slit, slit + 2 pi); the sheet
    // match must use the same lift the scan evaluates on, since the base
    // branch picks up a factor per turn of the cover
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut theta_out = theta_out_raw;
    while theta_out <= slit {
        theta_out += two_pi;
    }
    while theta_out > slit + two_pi {
        theta_out -= two_pi;
    }
    let z_out = z_k + C64::from_polar(r0, theta_out_raw);
    let w_out = ctx.w1_at(z_out)?;
    let (base_sheet, sep) = local.match_sheet(w_out, c64(r0.ln(), theta_out));
    if sep < 3.0 {
        return Err(Error::AmbiguousBranch { z: z_out });
    }
    Ok(SheetFrame { r0, base_sheet, theta_from: slit + 1e-7 })
}

/// Stokes seeds of one type `(j, j')` at the turning point, as the spec's
/// per-type operation; assembles from the all-types scan.
pub fn seed_stokes(
    ctx: &BranchContext,
    local: &TurningLocal,
    jj: (usize, usize),
    tree_angle: Option<f64>,
) -> Result<Vec<Seed>> {
    Ok(stokes_seeds_all(ctx, local, tree_angle)?
        .into_iter()
        .filter(|s| s.jj == jj)
        .collect())
}

/// All Stokes seeds at a turning point with global types attached.
///
/// The sheet-s scan values relate to the base sheet by constant rotations,
/// so one lifted-circle scan per unordered sheet pair covers every sheet;
/// rays are deduplicated by (angle, value pair) and typed against the
/// anchored `w_1` branch on the slit disk.
pub fn stokes_seeds_all(
    ctx: &BranchContext,
    local: &TurningLocal,
    tree_angle: Option<f64>,
) -> Result<Vec<Seed>> {
    let frame = sheet_frame(ctx, local, tree_angle)?;
    let m = local.m;
    let rays = scan_rays(local, frame.r0, frame.theta_from, true, 1440);
    let z_k = local.z_k;
    let mut seeds = Vec::new();
    for ray in rays {
        let z = z_k + C64::from_polar(frame.r0, ray.theta);
        // global branch indices relative to the anchored sheet
        let rel = |s: usize| (s + m - frame.base_sheet) % m + 1;
        let (mut j1, mut j2) = (rel(ray.sheets.0), rel(ray.sheets.1));
        let mut pair = (j1 - 1, j2 - 1);
        if j1 > j2 {
            std::mem::swap(&mut j1, &mut j2);
            pair = (j1 - 1, j2 - 1);
        }
        // the accumulated phase of the anchored germ
        let w1_here = omega_pow(m, frame.base_sheet) * ray.w_base;
        let phi1_here = omega_pow(m, frame.base_sheet) * ray.phi_base;
        let alpha = omega_pow(m, pair.0) - omega_pow(m, pair.1);
        // outward tangent
        let t = c64(1.0, 0.0) / (alpha * w1_here);
        let outward = C64::from_polar(1.0, ray.theta);
        let direction = if (t.conj() * outward).re >= 0.0 { t / t.norm() } else { -t / t.norm() };
        seeds.push(Seed {
            z,
            w: w1_here,
            phi: phi1_here,
            pair,
            jj: (j1, j2),
            direction,
            origin: CurveOrigin::Turning(z_k),
        });
    }
    Ok(seeds)
}

/// Support-arc candidate seeds: sign changes of the real part, without any
/// global branch attachment (the candidates are intrinsic to the local
/// value pairs; the meet-at-a-vertex selection happens downstream).
pub fn support_candidate_seeds(ctx: &BranchContext, local: &TurningLocal) -> Result<Vec<Seed>> {
    let z_k = local.z_k;
    let r0 = ctx.local_radius(z_k);
    let out_dir = z_k - ctx.centroid();
    let theta_out = if out_dir.norm() > 1e-12 { out_dir.arg() } else { 0.0 };
    let rays = scan_rays(local, r0, theta_out, false, 1440);
    let m = local.m;
    let mut seeds = Vec::new();
    for ray in rays {
        let z = z_k + C64::from_polar(r0, ray.theta);
        let pair = ray.sheets;
        let alpha = omega_pow(m, pair.0) - omega_pow(m, pair.1);
        let t = c64(0.0, 1.0) / (alpha * ray.w_base);
        let outward = C64::from_polar(1.0, ray.theta);
        let direction = if (t.conj() * outward).re >= 0.0 { t / t.norm() } else { -t / t.norm() };
        seeds.push(Seed {
            z,
            w: ray.w_base,
            phi: ray.phi_base,
            pair,
            jj: (pair.0 + 1, pair.1 + 1),
            direction,
            origin: CurveOrigin::Turning(z_k),
        });
    }
    Ok(seeds)
}

/// Continues the anchored `w_1` to a point near a leaf without crossing the
/// tree: outward approach, then around the scan circle on the side away
/// from the tree direction, then radially in.
pub fn w1_near_leaf(
    ctx: &BranchContext,
    local: &TurningLocal,
    tree_angle: f64,
    target: C64,
) -> Result<C64> {
    let z_k = local.z_k;
    let r0 = ctx.local_radius(z_k);
    let out_dir = z_k - ctx.centroid();
    let theta_out = if out_dir.norm() > 1e-12 { out_dir.arg() } else { 0.0 };
    let z_out = z_k + C64::from_polar(r0, theta_out);
    let w_out = ctx.w1_at(z_out)?;
    // lift the target angle into the slit window around theta_out
    let two_pi = 2.0 * std::f64::consts::PI;
    let slit = tree_angle;
    let mut th_t = (target - z_k).arg();
    while th_t <= slit {
        th_t += two_pi;
    }
    while th_t > slit + two_pi {
        th_t -= two_pi;
    }
    let mut th_o = theta_out;
    while th_o <= slit {
        th_o += two_pi;
    }
    while th_o > slit + two_pi {
        th_o -= two_pi;
    }
    // arc from th_o to th_t inside the window
    let steps = (((th_t - th_o).abs() / 0.1).ceil() as usize).max(1);
    let mut path = vec![z_out];
    for i in 1..=steps {
        let th = th_o + (th_t - th_o) * i as f64 / steps as f64;
        path.push(z_k + C64::from_polar(r0, th));
    }
    path.push(target);
    continue_root(ctx.field(), &path, w_out)
}
