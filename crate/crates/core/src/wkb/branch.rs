use crate::algebra::TurningLocal;
use crate::operator::{ESOperator, TurningPointSet};
use crate::quad::{continue_root, RootField};
use crate::{c64, C64, Error, Result};

/// Branch bookkeeping for the characteristic roots of
/// `rho_M(z) w^M = 1`.
///
/// `w_1` is pinned far from the turning points by its `1/z` asymptotic and
/// carried elsewhere by root continuation along canonical paths: a circular
/// arc at a large radius around the hull followed by a radial entry, with
/// detours around turning-point clearance disks on the hull-exterior side.
/// The effective cut sits along the ray `tau` from the farthest turning
/// point away from the centroid, which is where the anchor lies.
#[derive(Debug, Clone)]
pub struct BranchContext {
    field: RootField,
    tps: TurningPointSet,
    pub anchor: C64,
    pub anchor_values: Vec<C64>,
    /// Representative polyline of the cut from the support to infinity.
    pub cut: Vec<C64>,
    centroid: C64,
    r_big: f64,
    clearance: f64,
}

impl BranchContext {
    pub fn new(op: &ESOperator) -> Result<Self> {
        let m = op.order();
        let tps = op.turning_points()?;
        let centroid = tps.centroid();
        let hull_radius = tps
            .points
            .iter()
            .map(|p| (p.0 - centroid).norm())
            .fold(0.0, f64::max);
        let r_big = 8.0 * (1.0 + hull_radius + centroid.norm());
        // cut direction: away from the centroid through the farthest
        // turning point; degenerate single-point case uses the real axis
        let z_far = tps
            .points
            .iter()
            .map(|p| p.0)
            .max_by(|a, b| (a - centroid).norm().partial_cmp(&(b - centroid).norm()).unwrap())
            .unwrap();
        let dir = if (z_far - centroid).norm() > 1e-12 {
            (z_far - centroid) / (z_far - centroid).norm()
        } else {
            c64(1.0, 0.0)
        };
        let anchor = centroid + dir * r_big;
        let field = RootField::new(op.leading().clone(), m);
        // w_1(anchor) is the root closest to 1/anchor
        let cands = field.candidates(anchor)?;
        let target = c64(1.0, 0.0) / anchor;
        let w1 = cands
            .iter()
            .copied()
            .min_by(|a, b| (a - target).norm().partial_cmp(&(b - target).norm()).unwrap())
            .unwrap();
        if (w1 * anchor - c64(1.0, 0.0)).norm() > 10.0 / anchor.norm() {
            return Err(Error::InvalidOperator(format!(
                "anchor asymptotic check failed: w1*anchor = {}",
                w1 * anchor
            )));
        }
        let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / m as f64);
        let anchor_values: Vec<C64> = (0..m).map(|s| w1 * omega.powu(s as u32)).collect();
        let clearance = (1e-2 * tps.diameter()).max(1e-2);
        let cut = vec![z_far, centroid + dir * (3.0 * r_big)];
        Ok(BranchContext {
            field,
            tps,
            anchor,
            anchor_values,
            cut,
            centroid,
            r_big,
            clearance,
        })
    }

    pub fn field(&self) -> &RootField {
        &self.field
    }

    pub fn order(&self) -> usize {
        self.field.m
    }

    pub fn turning_points(&self) -> &TurningPointSet {
        &self.tps
    }

    pub fn centroid(&self) -> C64 {
        self.centroid
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn r_big(&self) -> f64 {
        self.r_big
    }

    pub fn omega(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI / self.field.m as f64)
    }

    /// Local expansion data at the turning point nearest to `z_k`.
    pub fn turning_local(&self, z_k: C64) -> Result<TurningLocal> {
        let &(center, mult) = self
            .tps
            .points
            .iter()
            .min_by(|a, b| (a.0 - z_k).norm().partial_cmp(&(b.0 - z_k).norm()).unwrap())
            .ok_or_else(|| Error::RootFinding("no turning points".into()))?;
        if (center - z_k).norm() > 1e-6 * (1.0 + z_k.norm()) {
            return Err(Error::RootFinding(format!("{z_k} is not a turning point")));
        }
        TurningLocal::new(&self.field.rho, self.field.m, center, mult, 48)
    }

    /// Radius for local (Puiseux) work around `z_k`: well inside the
    /// convergence disk and clear of the other turning points.
    pub fn local_radius(&self, z_k: C64) -> f64 {
        let nearest_other = self
            .tps
            .points
            .iter()
            .map(|p| (p.0 - z_k).norm())
            .filter(|d| *d > 1e-9)
            .fold(f64::INFINITY, f64::min);
        let base = 0.35 * nearest_other.min(2.0 * (1.0 + z_k.norm()));
        base.max(2.0 * self.clearance)
    }

    /// Canonical polyline from the anchor to `z`: counterclockwise arc at
    /// the big radius to the angle of `z`, then a radial entry with detours
    /// around clearance disks on their hull-exterior side.
    pub fn canonical_path(&self, z: C64) -> Result<Vec<C64>> {
        let d = self.tps.nearest_distance(z);
        if d < 0.9 * self.clearance {
            return Err(Error::PathClearance { distance: d, clearance: self.clearance });
        }
        let mut path = vec![self.anchor];
        let th_a = (self.anchor - self.centroid).arg();
        let th_z = (z - self.centroid).arg();
        let mut sweep = th_z - th_a;
        while sweep < 0.0 {
            sweep += 2.0 * std::f64::consts::PI;
        }
        let steps = (sweep / 0.1).ceil() as usize;
        for i in 1..=steps.max(1) {
            let th = th_a + sweep * i as f64 / steps.max(1) as f64;
            path.push(self.centroid + C64::from_polar(self.r_big, th));
        }
        let entry = *path.last().unwrap();
        let mut radial = self.segment_with_detours(entry, z)?;
        path.append(&mut radial);
        Ok(path)
    }

    /// Straight polyline `a -> b`, detouring around any clearance disk it
    /// crosses (arc on the side away from the centroid).
    pub fn segment_with_detours(&self, a: C64, b: C64) -> Result<Vec<C64>> {
        let mut points = vec![a];
        let dir = b - a;
        let len = dir.norm();
        if len == 0.0 {
            points.push(b);
            return Ok(points);
        }
        let u = dir / len;
        // collect crossings sorted along the segment
        let mut hits: Vec<(f64, C64)> = Vec::new();
        for &(q, _) in &self.tps.points {
            let t = ((q - a).re * u.re + (q - a).im * u.im).clamp(0.0, len);
            let closest = a + u * t;
            let disk = 1.2 * self.clearance;
            if (closest - q).norm() < disk && t > 1e-12 && t < len - 1e-12 {
                if (a - q).norm() < disk || (b - q).norm() < disk {
                    return Err(Error::PathClearance {
                        distance: (a - q).norm().min((b - q).norm()),
                        clearance: disk,
                    });
                }
                hits.push((t, q));
            }
        }
        hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for (_, q) in hits {
            let disk = 1.3 * self.clearance;
            // entry/exit points of the chord through the disk
            let pa = *points.last().unwrap();
            let tq = ((q - pa).re * u.re + (q - pa).im * u.im).max(0.0);
            let perp = (q - pa) - u * tq;
            let h2 = disk * disk - perp.norm_sqr();
            if h2 <= 0.0 {
                continue;
            }
            let h = h2.sqrt();
            let t_in = tq - h;
            let t_out = tq + h;
            let e1 = pa + u * t_in;
            let e2 = pa + u * t_out;
            points.push(e1);
            // arc from e1 to e2 around q, on the side away from the centroid
            let th1 = (e1 - q).arg();
            let th2 = (e2 - q).arg();
            let mut d_ccw = th2 - th1;
            while d_ccw <= 0.0 {
                d_ccw += 2.0 * std::f64::consts::PI;
            }
            let mid_ccw = q + C64::from_polar(disk, th1 + d_ccw / 2.0);
            let mid_cw = q + C64::from_polar(disk, th1 + (d_ccw - 2.0 * std::f64::consts::PI) / 2.0);
            let ccw = (mid_ccw - self.centroid).norm() >= (mid_cw - self.centroid).norm();
            let (sweep, steps) = if ccw {
                (d_ccw, (d_ccw / 0.2).ceil() as usize)
            } else {
                let d = d_ccw - 2.0 * std::f64::consts::PI;
                (d, (d.abs() / 0.2).ceil() as usize)
            };
            for i in 1..=steps.max(1) {
                let th = th1 + sweep * i as f64 / steps.max(1) as f64;
                points.push(q + C64::from_polar(disk, th));
            }
        }
        points.push(b);
        Ok(points)
    }

    /// Value of the `w_1` branch at `z`, continued along the canonical path.
    pub fn w1_at(&self, z: C64) -> Result<C64> {
        let path = self.canonical_path(z)?;
        continue_root(&self.field, &path, self.anchor_values[0])
    }

    /// Value of the branch `w_j = omega^{j-1} w_1` at `z`.
    pub fn w_at(&self, z: C64, j: usize) -> Result<C64> {
        Ok(self.w1_at(z)? * self.omega().powu(j as u32 - 1))
    }

    /// Continues `w_1` from the anchor along a caller-supplied polyline.
    /// The path must start at the anchor and keep clear of the zeros of
    /// `rho_M`.
    pub fn continue_branch(&self, path: &[C64]) -> Result<C64> {
        if path.is_empty() || (path[0] - self.anchor).norm() > 1e-9 * self.anchor.norm() {
            return Err(Error::Config("continuation path must start at the anchor".into()));
        }
        for &p in path {
            let d = self.tps.nearest_distance(p);
            if d < 0.5 * self.clearance {
                return Err(Error::PathClearance { distance: d, clearance: self.clearance });
            }
        }
        continue_root(&self.field, path, self.anchor_values[0])
    }
}
