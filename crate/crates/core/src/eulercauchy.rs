//! Euler-Cauchy operators `z^M v^(M) + sum a_k z^k v^(k) - eta^M v = 0`:
//! indicial calculus, convergent branch series `w_j(eps) = sum h_{j,k}
//! eps^{k-1}`, exact solutions `z^{w_j(eps)}`, and a single-valuedness check
//! showing the asymptotic data carries no discontinuities.

use crate::algebra::{poly_roots, ComplexPoly};
use crate::linalg::{lu_decompose, CMatrix};
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// Coefficients `a_1 ... a_{M-1}` of an Euler-Cauchy operator (`a_M = 1`),
/// together with the derived indicial polynomial.
#[derive(Debug, Clone)]
pub struct EulerCauchyOp {
    m: usize,
    a: Vec<C64>,
    /// `P(w) = w^M + A_{M-1} w^{M-1} + ... + A_1 w`, defined by
    /// `(operator) z^w = P(w) z^w`. The constant term is always zero.
    indicial: ComplexPoly,
}

/// Convergent coefficient series of one indicial branch.
#[derive(Debug, Clone, Serialize)]
pub struct IndicialBranch {
    pub j: usize,
    #[serde(with = "crate::serde_c64::vec")]
    pub h: Vec<C64>,
    /// Domb-Sykes estimate of the convergence radius in eps.
    pub radius_estimate: f64,
}

impl EulerCauchyOp {
    pub fn new(m: usize, a: Vec<C64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidOperator("order must be at least 2".into()));
        }
        if a.len() != m - 1 {
            return Err(Error::InvalidOperator(format!(
                "expected {} lower coefficients, got {}",
                m - 1,
                a.len()
            )));
        }
        // z^k d^k/dz^k z^w = w(w-1)...(w-k+1) z^w; sum the falling-factorial
        // polynomials term by term.
        let mut indicial = ComplexPoly::zero();
        for k in 1..=m {
            let coeff = if k == m { c64(1.0, 0.0) } else { a[k - 1] };
            if coeff.norm() == 0.0 {
                continue;
            }
            indicial = &indicial + &falling_factorial_poly(k).scale(coeff);
        }
        debug_assert!(indicial.coeff(0).norm() == 0.0);
        Ok(EulerCauchyOp { m, a, indicial })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[C64] {
        &self.a
    }

    /// `P(w)`: the image of `z^w` under the operator, divided by `z^w`.
    pub fn indicial_poly(&self) -> &ComplexPoly {
        &self.indicial
    }

    /// The M roots of `P(w) = 1/eps^M`, matched to branches by continuity
    /// from small eps (branch j leads with `omega^{j-1}/eps`).
    pub fn indicial_roots(&self, eps: C64) -> Result<Vec<C64>> {
        if eps.norm() == 0.0 {
            return Err(Error::Config("indicial roots need eps != 0".into()));
        }
        let rhs = (c64(1.0, 0.0) / eps).powu(self.m as u32);
        let shifted = &self.indicial - &ComplexPoly::constant(rhs);
        let roots = poly_roots(&shifted)?;
        let mut out = Vec::with_capacity(self.m);
        let mut used = vec![false; roots.len()];
        for j in 0..self.m {
            let target = omega(self.m, j) / eps;
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for (i, r) in roots.iter().enumerate() {
                if !used[i] {
                    let d = (r - target).norm();
                    if d < best_d {
                        best_d = d;
                        best = Some(i);
                    }
                }
            }
            let i = best.expect("root count matches order");
            used[i] = true;
            out.push(roots[i]);
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if (out[i] - out[j]).norm() <= 1e-10 * (1.0 + out[i].norm()) {
                    return Err(Error::RootFinding(format!("indicial root collision at eps = {eps}")));
                }
            }
        }
        Ok(out)
    }

    /// Taylor coefficients `h_{j,0..K}` of the branch `y_j(eps) = w_j * eps`
    /// solving `y^M + sum_k A_k eps^{M-k} y^k - 1 = 0`, by Newton iteration
    /// on truncated power series.
    pub fn h_coefficients(&self, j: usize, k_order: usize) -> Result<IndicialBranch> {
        assert!(j >= 1 && j <= self.m, "branch index in 1..=M");
        assert!(k_order >= 1);
        let h0 = omega(self.m, j - 1);
        let dfy0 = h0.powu(self.m as u32 - 1) * self.m as f64;
        if dfy0.norm() < 1e-12 {
            return Err(Error::IndicialDegenerate);
        }
        let len = k_order + 1;
        let mut y = vec![c64(0.0, 0.0); len];
        y[0] = h0;
        let a_coeff: Vec<C64> = (1..self.m).map(|k| self.indicial.coeff(k)).collect();
        let eval_f = |y: &[C64]| -> Vec<C64> {
            let mut f = series_pow(y, self.m, len);
            for (k, &ak) in a_coeff.iter().enumerate().map(|(i, a)| (i + 1, a)) {
                if ak.norm() == 0.0 {
                    continue;
                }
                let yk = series_pow(y, k, len);
                let shift = self.m - k;
                for (i, &c) in yk.iter().enumerate() {
                    if i + shift < len {
                        f[i + shift] += ak * c;
                    }
                }
            }
            f[0] -= 1.0;
            f
        };
        let eval_dfy = |y: &[C64]| -> Vec<C64> {
            let mut d = series_pow(y, self.m - 1, len);
            for c in d.iter_mut() {
                *c *= self.m as f64;
            }
            for (k, &ak) in a_coeff.iter().enumerate().map(|(i, a)| (i + 1, a)) {
                if ak.norm() == 0.0 || k == 0 {
                    continue;
                }
                let yk = series_pow(y, k - 1, len);
                let shift = self.m - k;
                for (i, &c) in yk.iter().enumerate() {
                    if i + shift < len {
                        d[i + shift] += ak * c * k as f64;
                    }
                }
            }
            d
        };
        // Newton on series roughly doubles the correct order per pass; run
        // on the measured residual with a generous cap.
        let max_passes = 2 * (usize::BITS - len.leading_zeros()) as usize + 6;
        for _ in 0..max_passes {
            let f = eval_f(&y);
            if f.iter().all(|c| c.norm() <= 1e-14) {
                break;
            }
            let dfy = eval_dfy(&y);
            let delta = series_div(&f, &dfy, len);
            for i in 0..len {
                y[i] -= delta[i];
            }
        }
        let f = eval_f(&y);
        let fmax = f.iter().map(|c| c.norm()).fold(0.0, f64::max);
        // Rounding scale: the residual coefficients are convolutions of up
        // to M copies of y, so compare against that magnitude.
        let gabs: Vec<C64> = y.iter().map(|c| c64(c.norm(), 0.0)).collect();
        let conv_scale = series_pow(&gabs, self.m, len)
            .iter()
            .map(|c| c.re)
            .fold(1.0, f64::max);
        if fmax > 1e-11 * conv_scale * len as f64 {
            return Err(Error::RootFinding(format!(
                "branch series residual {fmax:.3e} (scale {conv_scale:.3e}) for j = {j}"
            )));
        }
        let radius_estimate = domb_sykes_radius(&y);
        Ok(IndicialBranch { j, h: y, radius_estimate })
    }

    /// Branch value `w_j(eps) = sum_k h_{j,k} eps^{k-1}` from the series.
    pub fn branch_value(branch: &IndicialBranch, eps: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        let mut p = c64(1.0, 0.0) / eps;
        for &h in &branch.h {
            acc += h * p;
            p *= eps;
        }
        acc
    }

    /// Largest relative residual of the exact solution `v = z^{w_j(eps)}` in
    /// the differential equation over the given z samples.
    ///
    /// The equation collapses to `(P(w_j) - eps^{-M}) z^{w_j}`, so the
    /// residual relative to `eta^M v` is `|P(w_j) - eps^{-M}| |eps|^M` at
    /// every z; each sample is still formed explicitly as a cross-check of
    /// the factorization.
    pub fn exact_solution_residual(&self, branch: &IndicialBranch, eps: C64, z_samples: &[C64]) -> f64 {
        let w = Self::branch_value(branch, eps);
        let inv = (c64(1.0, 0.0) / eps).powu(self.m as u32);
        let mut worst = 0.0f64;
        for &z in z_samples {
            assert!(z.norm() > 0.0, "z samples must avoid the origin");
            let v = (w * z.ln()).exp();
            // left side = sum_k a_k z^k (d^k v) - eta^M v with d^k v = ff_k(w) z^{w-k}
            let mut lhs = c64(0.0, 0.0);
            for k in 1..=self.m {
                let coeff = if k == self.m { c64(1.0, 0.0) } else { self.a[k - 1] };
                if coeff.norm() == 0.0 {
                    continue;
                }
                let mut ff = c64(1.0, 0.0);
                for i in 0..k {
                    ff *= w - i as f64;
                }
                lhs += coeff * ff * v;
            }
            lhs -= inv * v;
            worst = worst.max((lhs / (inv * v)).norm());
        }
        worst
    }

    /// Wronskian of the M solutions `z^{w_j}` at `z` (rows: derivative
    /// orders 0..M-1; columns: branches).
    pub fn wronskian(&self, branches: &[IndicialBranch], eps: C64, z: C64) -> C64 {
        let m = self.m;
        let mut mat = CMatrix::zeros(m, m);
        for (col, br) in branches.iter().enumerate() {
            let w = Self::branch_value(br, eps);
            let mut ff = c64(1.0, 0.0);
            for i in 0..m {
                let zp = ((w - i as f64) * z.ln()).exp();
                mat.set(i, col, ff * zp);
                ff *= w - i as f64;
            }
        }
        match lu_decompose(&mat) {
            Ok(lu) => lu.det(),
            Err(_) => c64(0.0, 0.0),
        }
    }

    /// Continues `v = z^w` around a circle about the origin and compares
    /// with the closed-form multiplier `exp(2 pi i w)`. Returns the relative
    /// mismatch; single-valued asymptotic data means there is no
    /// discontinuous change across any candidate curve.
    pub fn monodromy_check(&self, branch: &IndicialBranch, eps: C64, z0: C64, samples: usize) -> f64 {
        let w = Self::branch_value(branch, eps);
        // v'/v = w/z integrates exactly per chord: w * ln(z_next/z_prev).
        let mut acc = c64(0.0, 0.0);
        let r = z0.norm();
        let th0 = z0.arg();
        let mut prev = z0;
        for k in 1..=samples {
            let th = th0 + 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let z = C64::from_polar(r, th);
            acc += w * (z / prev).ln();
            prev = z;
        }
        let factor = acc.exp();
        let expected = (c64(0.0, 2.0 * std::f64::consts::PI) * w).exp();
        (factor - expected).norm() / expected.norm()
    }
}

fn omega(m: usize, j: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64)
}

/// `w (w-1) ... (w-k+1)` as a polynomial in w.
fn falling_factorial_poly(k: usize) -> ComplexPoly {
    let mut p = ComplexPoly::one();
    for i in 0..k {
        p = &p * &ComplexPoly::new(vec![c64(-(i as f64), 0.0), c64(1.0, 0.0)]);
    }
    p
}

fn series_mul(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![c64(0.0, 0.0); len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x.norm() == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn series_pow(a: &[C64], k: usize, len: usize) -> Vec<C64> {
    let mut out = vec![c64(0.0, 0.0); len];
    out[0] = c64(1.0, 0.0);
    for _ in 0..k {
        out = series_mul(&out, a, len);
    }
    out
}

fn series_div(num: &[C64], den: &[C64], len: usize) -> Vec<C64> {
    assert!(den[0].norm() > 0.0, "series division needs a nonzero constant term");
    let mut out = vec![c64(0.0, 0.0); len];
    for i in 0..len {
        let mut acc = if i < num.len() { num[i] } else { c64(0.0, 0.0) };
        for j in 0..i {
            acc -= out[j] * den[i - j];
        }
        out[i] = acc / den[0];
    }
    out
}

/// Domb-Sykes: extrapolates `|h_{k+1}/h_k|` linearly in 1/k; the intercept
/// estimates the inverse radius of convergence.
fn domb_sykes_radius(h: &[C64]) -> f64 {
    let ratios: Vec<(f64, f64)> = h
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].norm() > 1e-280 && w[1].norm() > 1e-280)
        .map(|(k, w)| (1.0 / (k as f64 + 1.0), w[1].norm() / w[0].norm()))
        .collect();
    if ratios.len() < 4 {
        let r = ratios.iter().map(|p| p.1).fold(0.0, f64::max);
        return if r > 0.0 { 1.0 / r } else { f64::INFINITY };
    }
    let tail = &ratios[ratios.len() / 2..];
    let n = tail.len() as f64;
    let sx: f64 = tail.iter().map(|p| p.0).sum();
    let sy: f64 = tail.iter().map(|p| p.1).sum();
    let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let b = if denom.abs() > 1e-300 { (sy * sxx - sx * sxy) / denom } else { sy / n };
    if b > 1e-300 {
        1.0 / b
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op3() -> EulerCauchyOp {
        EulerCauchyOp::new(3, vec![c64(0.5, 0.0), c64(-0.25, 0.1)]).unwrap()
    }

    #[test]
    fn indicial_quadratic_closed_form() {
        // M = 2, pure z^2 v'': w(w-1) = 1/eps^2
        let op = EulerCauchyOp::new(2, vec![c64(0.0, 0.0)]).unwrap();
        let eps = c64(0.3, 0.1);
        let roots = op.indicial_roots(eps).unwrap();
        let disc = (c64(1.0, 0.0) + (c64(2.0, 0.0) / eps).powu(2)).sqrt();
        let w_plus = (c64(1.0, 0.0) + disc) * 0.5;
        let w_minus = (c64(1.0, 0.0) - disc) * 0.5;
        assert!((roots[0] - w_plus).norm() < 1e-9 * w_plus.norm());
        assert!((roots[1] - w_minus).norm() < 1e-9 * w_minus.norm());
    }

    #[test]
    fn roots_approach_unity_over_eps() {
        let op = op3();
        let eps = c64(1e-4, 0.0);
        let roots = op.indicial_roots(eps).unwrap();
        for (j, r) in roots.iter().enumerate() {
            let lead = omega(3, j) / eps;
            assert!((r - lead).norm() < 3.0, "branch {j} far from its leading term");
        }
    }

    #[test]
    fn vieta_product_of_roots() {
        let op = op3();
        let eps = c64(0.2, -0.05);
        let roots = op.indicial_roots(eps).unwrap();
        let prod: C64 = roots.iter().product();
        // P(w) - eps^{-M} is monic with constant term -eps^{-M}, so the
        // product of roots is (-1)^M * (-eps^{-M}).
        let expected = -(c64(1.0, 0.0) / eps).powu(3) * (-1.0f64).powi(3);
        assert!((prod - expected).norm() < 1e-8 * expected.norm());
    }

    #[test]
    fn h0_is_mth_root_of_unity() {
        let op = op3();
        for j in 1..=3 {
            let br = op.h_coefficients(j, 24).unwrap();
            assert!((br.h[0].powu(3) - c64(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_operator_series_converges_geometrically() {
        let op = EulerCauchyOp::new(3, vec![c64(0.0, 0.0), c64(0.0, 0.0)]).unwrap();
        let br = op.h_coefficients(1, 30).unwrap();
        let eps = c64(0.05, 0.0);
        let from_series = EulerCauchyOp::branch_value(&br, eps);
        let direct = op.indicial_roots(eps).unwrap()[0];
        assert!((from_series - direct).norm() < 1e-10 * direct.norm());
        // Partial sums converge at least geometrically down to the direct
        // root's own accuracy floor; the series is sparse (odd powers), so
        // compare the ends rather than consecutive cuts.
        let mut errs = Vec::new();
        for cut in [2usize, 3, 4, 5, 6] {
            let trunc = IndicialBranch { j: 1, h: br.h[..cut].to_vec(), radius_estimate: 0.0 };
            errs.push((EulerCauchyOp::branch_value(&trunc, eps) - direct).norm());
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "non-monotone decay: {errs:?}");
        }
        assert!(errs[0] > 1e4 * errs[4], "no decay: {errs:?}");
    }

    #[test]
    fn series_vs_roots_cross_validation() {
        let op = op3();
        for j in 1..=3 {
            let br = op.h_coefficients(j, 40).unwrap();
            let eps = c64(0.5 * br.radius_estimate.min(0.4), 0.02);
            let from_series = EulerCauchyOp::branch_value(&br, eps);
            let direct = op.indicial_roots(eps).unwrap()[j - 1];
            assert!(
                (from_series - direct).norm() <= 1e-8 * direct.norm(),
                "branch {j}: {from_series} vs {direct}"
            );
        }
    }

    #[test]
    fn exact_solution_residual_small() {
        let op = op3();
        let br = op.h_coefficients(2, 30).unwrap();
        let eps = c64(0.08, 0.02);
        let zs = [c64(2.0, 0.0), c64(0.5, 1.0), c64(-1.0, 2.0)];
        let r = op.exact_solution_residual(&br, eps, &zs);
        assert!(r <= 1e-10, "residual {r:.3e}");
    }

    #[test]
    fn wronskian_nonzero() {
        let op = op3();
        let eps = c64(0.08, 0.0);
        let branches: Vec<IndicialBranch> = (1..=3).map(|j| op.h_coefficients(j, 30).unwrap()).collect();
        let det = op.wronskian(&branches, eps, c64(2.0, 0.0));
        assert!(det.norm() > 1e-8, "Wronskian {det}");
    }

    #[test]
    fn monodromy_matches_closed_form() {
        let op = op3();
        let br = op.h_coefficients(1, 30).unwrap();
        let rel = op.monodromy_check(&br, c64(0.1, 0.0), c64(2.0, 0.0), 4000);
        assert!(rel < 1e-6, "monodromy mismatch {rel:.3e}");
    }

    #[test]
    fn ratio_test_bounded_root_growth() {
        // |h_k|^{1/k} stays bounded: convergent series, in contrast with
        // the factorial growth of generic WKB coefficient streams.
        let op = op3();
        let br = op.h_coefficients(1, 40).unwrap();
        for (k, h) in br.h.iter().enumerate().skip(5) {
            let g = h.norm().powf(1.0 / k as f64);
            assert!(g < 3.0, "k={k}: |h_k|^(1/k) = {g}");
        }
    }
}
