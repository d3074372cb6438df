use crate::operator::ESOperator;
use crate::wkb::{cauchy_ratio_terms, BranchContext, Reference, WKBSeries};
use crate::{c64, C64, Error, Result};

/// Cauchy data `(v, v', ..., v^{(M-1)})` of the truncated WKB solution at
/// `z0`: `v^{(i)} = Y_i(z0) v(z0)` with the symbolic derivative ratios of
/// the exponent series.
pub fn cauchy_data(
    series: &WKBSeries,
    ctx: &BranchContext,
    op: &ESOperator,
    z0: C64,
    eta: C64,
    n_trunc: usize,
    reference: Reference,
) -> Result<Vec<C64>> {
    let m = op.order();
    let v0 = crate::wkb::wkb_truncated(series, ctx, z0, eta, n_trunc, reference)?;
    let w0 = ctx.w_at(z0, series.j)?;
    let ratios = cauchy_ratio_terms(series, m - 1);
    let mut out = Vec::with_capacity(m);
    for (i, terms) in ratios.iter().enumerate() {
        // Y_i = sum_t terms[t] eta^{i - t}
        let mut y = c64(0.0, 0.0);
        for (t, elem) in terms.iter().enumerate() {
            if !elem.is_zero() {
                y += elem.eval(z0, w0) * eta.powi(i as i32 - t as i32);
            }
        }
        out.push(y * v0);
    }
    Ok(out)
}

/// Integrates the order-M equation `sum_k rho_k v^{(k)} = eta^M v` along a
/// polyline with the given Cauchy data at the start; returns the value of
/// `v` at the endpoint. RK4 with step doubling and local extrapolation.
pub fn reference_solution(
    op: &ESOperator,
    eta: C64,
    path: &[C64],
    init: &[C64],
    rel_tol: f64,
) -> Result<C64> {
    let m = op.order();
    assert_eq!(init.len(), m, "Cauchy data must have M entries");
    let eta_m = eta.powu(m as u32);
    let deriv = |z: C64, y: &[C64]| -> Result<Vec<C64>> {
        let rho_m = op.leading().eval(z);
        if rho_m.norm() < 1e-12 {
            return Err(Error::PathClearance { distance: 0.0, clearance: 1e-12 });
        }
        let mut d = Vec::with_capacity(m);
        for i in 0..m - 1 {
            d.push(y[i + 1]);
        }
        let mut top = eta_m * y[0];
        for k in 1..m {
            let c = op.rho(k).eval(z);
            if c.norm() > 0.0 {
                top -= c * y[k];
            }
        }
        d.push(top / rho_m);
        Ok(d)
    };
    let mut y = init.to_vec();
    for seg in path.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if (b - a).norm() == 0.0 {
            continue;
        }
        let dz = b - a;
        // dy/dt = dz * f(a + dz t, y), t in [0, 1]
        let f = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
            let d = deriv(a + dz * t, y)?;
            Ok(d.into_iter().map(|v| v * dz).collect())
        };
        let mut t = 0.0f64;
        let mut h = 0.05f64;
        let mut guard = 0usize;
        while t < 1.0 {
            guard += 1;
            if guard > 2_000_000 {
                return Err(Error::OdeStep("step budget exhausted".into()));
            }
            h = h.min(1.0 - t);
            let full = rk4(&f, t, &y, h)?;
            let half1 = rk4(&f, t, &y, h / 2.0)?;
            let half2 = rk4(&f, t + h / 2.0, &half1, h / 2.0)?;
            let mut err = 0.0f64;
            let mut scale = 1e-300f64;
            for i in 0..m {
                err = err.max((full[i] - half2[i]).norm());
                scale = scale.max(half2[i].norm());
            }
            let tol = rel_tol * scale;
            if err <= tol || h < 1e-12 {
                t += h;
                // local extrapolation to fifth order
                y = (0..m).map(|i| half2[i] + (half2[i] - full[i]) / 15.0).collect();
                let grow = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
                h *= grow.clamp(0.5, 2.5);
            } else {
                h *= 0.9 * (tol / err).powf(0.25).clamp(0.1, 0.9);
            }
        }
    }
    Ok(y[0])
}

fn rk4(
    f: &dyn Fn(f64, &[C64]) -> Result<Vec<C64>>,
    t: f64,
    y: &[C64],
    h: f64,
) -> Result<Vec<C64>> {
    let k1 = f(t, y)?;
    let y2: Vec<C64> = y.iter().zip(&k1).map(|(a, b)| a + b * (h / 2.0)).collect();
    let k2 = f(t + h / 2.0, &y2)?;
    let y3: Vec<C64> = y.iter().zip(&k2).map(|(a, b)| a + b * (h / 2.0)).collect();
    let k3 = f(t + h / 2.0, &y3)?;
    let y4: Vec<C64> = y.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
    let k4 = f(t + h, &y4)?;
    Ok((0..y.len())
        .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;
    use crate::linalg::{lu_decompose, CMatrix};
    use crate::wkb::riccati_series;

    fn euler_cauchy3() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::monomial(c64(0.5, 0.0), 1),
            ComplexPoly::monomial(c64(-0.25, 0.1), 2),
            ComplexPoly::monomial(c64(1.0, 0.0), 3),
        ])
        .unwrap()
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
    fn euler_cauchy_transport_matches_power_solution() {
        // exact solutions are z^{w_j(eps)}: transport one along a path and
        // compare against the closed form from the indicial calculus
        let op = euler_cauchy3();
        let ec = crate::eulercauchy::EulerCauchyOp::new(3, vec![c64(0.5, 0.0), c64(-0.25, 0.1)]).unwrap();
        let br = ec.h_coefficients(1, 30).unwrap();
        let eta = c64(10.0, 0.0);
        let eps = c64(1.0, 0.0) / eta;
        let w = crate::eulercauchy::EulerCauchyOp::branch_value(&br, eps);
        let z0 = c64(2.0, 0.0);
        let z1 = c64(1.0, 1.5);
        // Cauchy data of z^w at z0
        let mut init = Vec::new();
        let mut ff = c64(1.0, 0.0);
        for i in 0..3 {
            init.push(ff * ((w - i as f64) * z0.ln()).exp());
            ff *= w - i as f64;
        }
        let got = reference_solution(&op, eta, &[z0, z1], &init, 1e-12).unwrap();
        let want = (w * z1.ln()).exp();
        assert!((got - want).norm() <= 1e-8 * want.norm(), "{got} vs {want}");
    }

    #[test]
    fn linearity_in_the_initial_data() {
        let op = op_unity();
        let eta = c64(6.0, 0.0);
        let init = vec![c64(1.0, 0.2), c64(0.3, 0.0), c64(0.0, -0.1)];
        let doubled: Vec<C64> = init.iter().map(|v| v * 2.0).collect();
        let path = [c64(3.0, 0.0), c64(2.0, 1.0)];
        let a = reference_solution(&op, eta, &path, &init, 1e-11).unwrap();
        let b = reference_solution(&op, eta, &path, &doubled, 1e-11).unwrap();
        assert!((b - a * 2.0).norm() <= 1e-9 * b.norm());
    }

    #[test]
    fn three_branch_seeds_stay_independent() {
        // Fundamental-system check: transporting WKB data of the three
        // branches, the endpoint value/derivative matrix has full rank.
        let op = op_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let eta = c64(10.0, 0.0);
        let z0 = c64(3.5, 0.5);
        let z1 = c64(2.5, 1.5);
        let mut endpoint = CMatrix::zeros(3, 3);
        for j in 1..=3 {
            let series = riccati_series(&op, j, 8).unwrap();
            let init = cauchy_data(&series, &ctx, &op, z0, eta, 6, Reference::Point(z0)).unwrap();
            // transport v and its first two derivatives via three nearby runs
            // of the full system: the system state itself carries them
            let mut y = init.clone();
            // integrate the full system but record all components at z1
            // (reuse reference_solution on the vector by stepping manually)
            let m = 3;
            let eta_m = eta.powu(3);
            let deriv = |z: C64, y: &Vec<C64>| -> Vec<C64> {
                let rho_m = op.leading().eval(z);
                let mut d = vec![y[1], y[2], c64(0.0, 0.0)];
                d[2] = eta_m * y[0] / rho_m;
                d
            };
            let steps = 4000;
            let dz = (z1 - z0) / steps as f64;
            let mut z = z0;
            for _ in 0..steps {
                // RK4
                let k1 = deriv(z, &y);
                let y2: Vec<C64> = (0..m).map(|i| y[i] + k1[i] * dz * 0.5).collect();
                let k2 = deriv(z + dz * 0.5, &y2);
                let y3: Vec<C64> = (0..m).map(|i| y[i] + k2[i] * dz * 0.5).collect();
                let k3 = deriv(z + dz * 0.5, &y3);
                let y4: Vec<C64> = (0..m).map(|i| y[i] + k3[i] * dz).collect();
                let k4 = deriv(z + dz, &y4);
                y = (0..m)
                    .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * dz / 6.0)
                    .collect();
                z += dz;
            }
            for i in 0..3 {
                endpoint.set(i, j - 1, y[i]);
            }
        }
        // condition estimate via determinant against column scales
        let lu = lu_decompose(&endpoint).unwrap();
        let det = lu.det();
        let mut scale = 1.0f64;
        for j in 0..3 {
            let col: f64 = (0..3).map(|i| endpoint.at(i, j).norm_sqr()).sum::<f64>().sqrt();
            scale *= col;
        }
        let cond_proxy = scale / det.norm();
        assert!(cond_proxy < 1e6, "near-degenerate fundamental system ({cond_proxy:.3e})");
    }
}
