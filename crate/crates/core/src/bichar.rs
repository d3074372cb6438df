//! Hamilton-Jacobi trajectories of the transformed operator's principal
//! symbol `rho_M(z) zeta^M - eps^M`, and the self-intersection scan of
//! their base-plane projections.
//!
//! With `eps = 1` the system collapses to `dz/dt = M rho_M(z)^{1/M}`,
//! `dy/dt = -M`, `zeta = rho_M(z)^{-1/M}`: the fiber variables are closed
//! forms of the trajectory, and `y` is injective in `t` along any ray.

use crate::operator::ESOperator;
use crate::wkb::BranchContext;
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// One sampled trajectory of the Hamilton-Jacobi system along the complex
/// ray `t = s * direction`.
#[derive(Debug, Clone, Serialize)]
pub struct BicharStrip {
    /// Ray angle of the complex time variable.
    pub theta: f64,
    /// Samples along the ray.
    pub samples: Vec<StripSample>,
    /// True when the trajectory entered a turning-point clearance disk;
    /// the zeros of the leading coefficient are genuine singular points.
    pub hit_turning: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StripSample {
    pub s: f64,
    #[serde(with = "crate::serde_c64")]
    pub z: C64,
    #[serde(with = "crate::serde_c64")]
    pub y: C64,
    #[serde(with = "crate::serde_c64")]
    pub zeta: C64,
    #[serde(with = "crate::serde_c64")]
    pub eps: C64,
    /// |rho_M(z) zeta^M - 1|, the symbol conservation residual.
    pub sigma_residual: f64,
}

/// Integrates the trajectory from `a` along the time ray for `s in [0, T]`.
///
/// The branch of `rho_M^{1/M}` at the start is fixed by continuation from
/// the anchor (`1/w_1(a)`) and carried along the trajectory by nearest-root
/// continuation. `y` and `eps` come from their closed forms: `eps = 1`,
/// `y(t) = y(0) - M t`.
pub fn integrate_bichar(
    op: &ESOperator,
    ctx: &BranchContext,
    a: C64,
    direction: C64,
    t_total: f64,
    steps: usize,
) -> Result<BicharStrip> {
    let diag = op.validate();
    if diag.perfect_power_leading {
        return Err(Error::DegenerateLeading);
    }
    let m = op.order() as f64;
    let field = ctx.field();
    let dir = direction / direction.norm();
    let w_a = ctx.w1_at(a)?;
    let mut u = c64(1.0, 0.0) / w_a;
    let mut z = a;
    let y0 = c64(0.0, 0.0);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut hit_turning = false;
    let push = |samples: &mut Vec<StripSample>, s: f64, z: C64, u: C64| {
        let zeta = c64(1.0, 0.0) / u;
        let sigma = (op.leading().eval(z) * zeta.powu(op.order() as u32) - 1.0).norm();
        samples.push(StripSample {
            s,
            z,
            y: y0 - dir * (m * s),
            zeta,
            eps: c64(1.0, 0.0),
            sigma_residual: sigma,
        });
    };
    push(&mut samples, 0.0, z, u);
    let ds = t_total / steps as f64;
    let u_at = |z_from: C64, u_from: C64, z_to: C64| -> Result<C64> {
        let w_from = c64(1.0, 0.0) / u_from;
        let pred = field.predict(z_from, w_from, z_to - z_from);
        let (w_to, margin) = field.nearest(z_to, pred)?;
        if margin < 3.0 {
            return Err(Error::AmbiguousBranch { z: z_to });
        }
        Ok(c64(1.0, 0.0) / w_to)
    };
    'outer: for i in 0..steps {
        let mut s_local = 0.0;
        while s_local < ds {
            let d_tp = ctx.turning_points().nearest_distance(z);
            if d_tp < ctx.clearance() {
                hit_turning = true;
                break 'outer;
            }
            let speed = m * u.norm();
            let h = (ds - s_local).min(0.2 * d_tp / speed.max(1e-300)).max(1e-9 * ds);
            // RK4 on dz/ds = dir * M * u(z)
            let f = |uu: C64| dir * uu * m;
            let k1 = f(u);
            let um1 = u_at(z, u, z + k1 * (h / 2.0))?;
            let k2 = f(um1);
            let um2 = u_at(z, u, z + k2 * (h / 2.0))?;
            let k3 = f(um2);
            let ue = u_at(z, um2, z + k3 * h)?;
            let k4 = f(ue);
            let z1 = z + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            u = u_at(z, u, z1)?;
            z = z1;
            s_local += h;
        }
        push(&mut samples, (i + 1) as f64 * ds, z, u);
    }
    Ok(BicharStrip { theta: dir.arg(), samples, hit_turning })
}

/// A candidate self-intersection of the base-plane projections.
#[derive(Debug, Clone, Serialize)]
pub struct IntersectionHit {
    pub strip_a: usize,
    pub strip_b: usize,
    #[serde(with = "crate::serde_c64")]
    pub z: C64,
    pub y_gap: f64,
    pub s_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub hits: Vec<IntersectionHit>,
    pub pairs_checked: usize,
}

/// Searches for parameter pairs where the (z, y) projections of two
/// trajectories (or two separated windows of one) coincide within `tol`.
///
/// Both complex coordinates must match: a z-plane crossing alone is a
/// projection artifact, which is exactly what the planted negative control
/// distinguishes.
pub fn self_intersection_scan(strips: &[BicharStrip], tol: f64) -> ScanReport {
    let mut hits = Vec::new();
    let mut pairs = 0usize;
    for ia in 0..strips.len() {
        for ib in ia..strips.len() {
            pairs += 1;
            let a = &strips[ia];
            let b = &strips[ib];
            if a.samples.len() < 2 || b.samples.len() < 2 {
                continue;
            }
            let step_s = a.samples[1].s - a.samples[0].s;
            for sa in a.samples.iter() {
                for sb in b.samples.iter() {
                    if ia == ib && (sa.s - sb.s).abs() < 4.0 * step_s {
                        continue;
                    }
                    if ia != ib && sa.s + sb.s < 4.0 * step_s {
                        // rays from a common start point share it trivially
                        continue;
                    }
                    if (sa.z - sb.z).norm() <= tol && (sa.y - sb.y).norm() <= tol {
                        hits.push(IntersectionHit {
                            strip_a: ia,
                            strip_b: ib,
                            z: sa.z,
                            y_gap: (sa.y - sb.y).norm(),
                            s_gap: (sa.s - sb.s).abs(),
                        });
                    }
                }
            }
        }
    }
    ScanReport { hits, pairs_checked: pairs }
}

/// Ray sweep from one start point: integrates trajectories over a fan of
/// time-ray angles and scans all pairs. Candidate hits must persist under
/// step halving to be reported.
pub fn ray_sweep_scan(
    op: &ESOperator,
    ctx: &BranchContext,
    a: C64,
    n_angles: usize,
    t_total: f64,
    steps: usize,
    tol: f64,
) -> Result<ScanReport> {
    let run = |steps: usize| -> Result<ScanReport> {
        let mut strips = Vec::new();
        for k in 0..n_angles {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n_angles as f64;
            strips.push(integrate_bichar(op, ctx, a, C64::from_polar(1.0, th), t_total, steps)?);
        }
        Ok(self_intersection_scan(&strips, tol))
    };
    let first = run(steps)?;
    if first.hits.is_empty() {
        return Ok(first);
    }
    let second = run(steps * 2)?;
    let persistent: Vec<IntersectionHit> = first
        .hits
        .into_iter()
        .filter(|h| second.hits.iter().any(|g| (g.z - h.z).norm() < 10.0 * tol))
        .collect();
    Ok(ScanReport { hits: persistent, pairs_checked: first.pairs_checked + second.pairs_checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;

    fn op_m2() -> ESOperator {
        ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::from_real(&[-1.0, 0.0, 1.0])]).unwrap()
    }

    fn op_unity() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn y_is_linear_and_eps_constant() {
        let op = op_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let strip = integrate_bichar(&op, &ctx, c64(2.0, 1.0), c64(1.0, 0.4), 1.5, 60).unwrap();
        for s in &strip.samples {
            let dir = C64::from_polar(1.0, strip.theta);
            let want = -dir * (3.0 * s.s);
            assert!((s.y - want).norm() < 1e-14, "y not linear at s = {}", s.s);
            assert_eq!(s.eps, c64(1.0, 0.0));
        }
    }

    #[test]
    fn symbol_conservation_along_sampled_strips() {
        let op = op_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let mut checked = 0;
        for k in 0..20 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 20.0;
            let strip =
                integrate_bichar(&op, &ctx, c64(2.2, 0.3), C64::from_polar(1.0, th), 1.0, 50).unwrap();
            for s in &strip.samples {
                assert!(s.sigma_residual <= 1e-8, "sigma residual {}", s.sigma_residual);
                checked += 1;
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn branch_continuity_of_zeta() {
        // zeta must stay consistent with the velocity: dz/dt = M / zeta
        let op = op_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let strip = integrate_bichar(&op, &ctx, c64(1.5, 1.5), c64(0.3, 1.0), 1.0, 400).unwrap();
        for pair in strip.samples.windows(2) {
            let ds = pair[1].s - pair[0].s;
            let dzdt = (pair[1].z - pair[0].z) / (ds * C64::from_polar(1.0, strip.theta));
            let zeta_mid = (pair[0].zeta + pair[1].zeta) * 0.5;
            let resid = (zeta_mid * dzdt / 3.0 - 1.0).norm();
            assert!(resid < 1e-3, "zeta/velocity mismatch {resid}");
        }
    }

    #[test]
    fn trajectory_matches_closed_form_solution() {
        // dz/dt = 2 sqrt(z^2 - 1) solves z(t) = cosh(2t + arccosh(a)).
        let op = op_m2();
        let ctx = BranchContext::new(&op).unwrap();
        let a = c64(3.0, 0.0);
        let strip = integrate_bichar(&op, &ctx, a, c64(1.0, 0.0), 0.8, 80).unwrap();
        let c0 = (a + (a * a - c64(1.0, 0.0)).sqrt()).ln();
        for s in &strip.samples {
            let arg = c0 + 2.0 * s.s;
            let want = (arg.exp() + (-arg).exp()) * 0.5;
            assert!(
                (s.z - want).norm() < 1e-7 * (1.0 + want.norm()),
                "s={}: {} vs {want}",
                s.s,
                s.z
            );
        }
    }

    #[test]
    fn degenerate_leading_is_refused() {
        let op = ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::monomial(c64(1.0, 0.0), 2)]).unwrap();
        let ctx = BranchContext::new(&op).unwrap();
        assert!(matches!(
            integrate_bichar(&op, &ctx, c64(1.0, 1.0), c64(1.0, 0.0), 1.0, 10),
            Err(Error::DegenerateLeading)
        ));
    }

    #[test]
    fn no_self_intersections_for_the_test_operators() {
        for op in [op_m2(), op_unity()] {
            let ctx = BranchContext::new(&op).unwrap();
            let diam = ctx.turning_points().diameter();
            let report =
                ray_sweep_scan(&op, &ctx, c64(1.7, 0.9), 16, 1.5 * diam, 220, 1e-6 * (1.0 + diam))
                    .unwrap();
            assert!(report.hits.is_empty(), "unexpected hits: {:?}", report.hits);
        }
    }

    #[test]
    fn planted_crossings_are_detected() {
        // Fixture: a true 4D crossing must be reported; an identical z-path
        // with offset y must not; collapsing y to its real part (dropping a
        // real dimension) turns it into a spurious hit the scanner sees.
        let mk = |pts: Vec<(f64, C64, C64)>| BicharStrip {
            theta: 0.0,
            samples: pts
                .into_iter()
                .map(|(s, z, y)| StripSample {
                    s,
                    z,
                    y,
                    zeta: c64(1.0, 0.0),
                    eps: c64(1.0, 0.0),
                    sigma_residual: 0.0,
                })
                .collect(),
            hit_turning: false,
        };
        let a = mk((0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, c64(t, 0.0), c64(0.3, -t))
            })
            .collect());
        let b = mk((0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, c64(1.0, t - 1.0), c64(0.3, -1.0))
            })
            .collect());
        // same z-path and same Re[y], but Im[y] offset: no true crossing
        let c = mk((0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, c64(t, 0.0), c64(0.3, -t + 5.0))
            })
            .collect());
        let report = self_intersection_scan(&[a.clone(), b.clone(), c.clone()], 1e-6);
        assert_eq!(report.hits.len(), 1, "hits {:?}", report.hits);
        assert_eq!((report.hits[0].strip_a, report.hits[0].strip_b), (0, 1));
        // negative control: same strips with Im(y) dropped
        let project = |s: &BicharStrip| BicharStrip {
            theta: s.theta,
            samples: s
                .samples
                .iter()
                .map(|p| StripSample { y: c64(p.y.re, 0.0), ..*p })
                .collect(),
            hit_turning: false,
        };
        let degraded = self_intersection_scan(&[project(&a), project(&c)], 1e-6);
        assert!(!degraded.hits.is_empty(), "projection control must fire");
    }
}
