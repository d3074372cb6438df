use super::{hadamard, BranchContext, PhasePair, WKBSeries};
use crate::operator::ESOperator;
use crate::{c64, C64, Error, Result};

/// Reference point of the WKB exponent integrals.
#[derive(Debug, Clone, Copy)]
pub enum Reference {
    /// Ordinary integrals from a regular point.
    Point(C64),
    /// Finite-part integrals from a turning point.
    Turning(C64),
}

/// Truncated WKB value
/// `eta^{-1/2} exp( sum_{k=0}^{N} eta^{1-k} I_k )` with `I_k` the ordinary
/// or finite-part integrals of `S_k` from the reference to `z`, on the
/// branch of the series.
pub fn wkb_truncated(
    series: &WKBSeries,
    ctx: &BranchContext,
    z: C64,
    eta: C64,
    n_trunc: usize,
    reference: Reference,
) -> Result<C64> {
    let ints = wkb_exponent_integrals(series, ctx, z, reference)?;
    if n_trunc >= ints.len() {
        return Err(Error::OrderUnavailable { requested: n_trunc, available: ints.len() - 1 });
    }
    let mut expo = c64(0.0, 0.0);
    for (k, i_k) in ints.iter().enumerate().take(n_trunc + 1) {
        expo += eta.powi(1 - k as i32) * i_k;
    }
    Ok(expo.exp() / eta.sqrt())
}

/// The integrals `I_0 ... I_N` used in the WKB exponent.
pub fn wkb_exponent_integrals(
    series: &WKBSeries,
    ctx: &BranchContext,
    z: C64,
    reference: Reference,
) -> Result<Vec<C64>> {
    let w_z = ctx.w_at(z, series.j)?;
    match reference {
        Reference::Turning(z_k) => {
            let local = ctx.turning_local(z_k)?;
            hadamard::wkb_integrals(series, &local, z, w_z, ctx)
        }
        Reference::Point(z_ref) => {
            let w_ref = ctx.w_at(z_ref, series.j)?;
            let (vals, w_end) = hadamard::ordinary_integrals(series, z_ref, w_ref, z, ctx)?;
            // consistency of the global branch with the path continuation
            if (w_end - w_z).norm() > 1e-6 * (1.0 + w_z.norm()) {
                return Err(Error::AmbiguousBranch { z });
            }
            Ok(vals)
        }
    }
}

/// `ln Q_n(z)`: direct Horner when the magnitude fits f64, otherwise a sum
/// of root logarithms.
pub fn log_eigenpoly(op: &ESOperator, n: usize, z: C64) -> Result<C64> {
    let eig = op.eigenpolynomial(n)?;
    let direct = eig.q.eval(z);
    if direct.norm() > 1e-280 && direct.norm() < 1e280 && direct.re.is_finite() && direct.im.is_finite() {
        return Ok(direct.ln());
    }
    let roots = op.root_counting_measure(n)?;
    let mut acc = c64(0.0, 0.0);
    for r in roots {
        acc += (z - r).ln();
    }
    Ok(acc)
}

/// Normalized eigenpolynomial ratios
/// `R_n = Q_n(z) exp(-n Phi_0 + ((M-1)/2 - rho_{M-1,M-1}/M) Phi_0 - Phi_1)`;
/// they tend to 1 with O(1/n) error on compacts away from the support.
pub fn theorem1_check(op: &ESOperator, ctx: &BranchContext, z: C64, n_list: &[usize]) -> Result<Vec<C64>> {
    let phases = PhasePair::new(op, ctx)?;
    let (phi0, phi1) = phases.phases(z)?;
    let beta = phases.beta;
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let ln_q = log_eigenpoly(op, n, z)?;
        let r = (ln_q - phi0 * n as f64 + beta * phi0 - phi1).exp();
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexPoly;
    use crate::wkb::riccati_series;

    fn cubic_unity() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    fn euler_cauchy3() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::monomial(c64(0.5, 0.0), 1),
            ComplexPoly::monomial(c64(-0.25, 0.1), 2),
            ComplexPoly::monomial(c64(1.0, 0.0), 3),
        ])
        .unwrap()
    }

    #[test]
    fn leading_order_is_exponential_of_i0() {
        let op = cubic_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let series = riccati_series(&op, 1, 3).unwrap();
        let z_ref = c64(3.0, 1.0);
        let z = c64(2.0, 2.0);
        let eta = c64(5.0, 0.0);
        let v0 = wkb_truncated(&series, &ctx, z, eta, 0, Reference::Point(z_ref)).unwrap();
        let ints = wkb_exponent_integrals(&series, &ctx, z, Reference::Point(z_ref)).unwrap();
        let want = (eta * ints[0]).exp() / eta.sqrt();
        assert!((v0 - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn euler_cauchy_ratios_are_exactly_one() {
        let op = euler_cauchy3();
        let ctx = BranchContext::new(&op).unwrap();
        let z = c64(2.0, 1.0);
        let rs = theorem1_check(&op, &ctx, z, &[3, 10, 25]).unwrap();
        for r in rs {
            assert!((r - c64(1.0, 0.0)).norm() < 1e-8, "R = {r}");
        }
    }

    #[test]
    fn ratio_error_halves_when_n_doubles() {
        // O(1/n) signature at z = 3 for the cubic operator
        let op = cubic_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let z = c64(3.0, 0.0);
        let rs = theorem1_check(&op, &ctx, z, &[20, 40, 80, 160]).unwrap();
        let errs: Vec<f64> = rs.iter().map(|r| (r - c64(1.0, 0.0)).norm()).collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                (0.3..=0.7).contains(&ratio),
                "halving ratio {ratio} outside [0.3, 0.7]; errors {errs:?}"
            );
        }
    }

    #[test]
    fn ratios_bounded_to_n_200() {
        let op = cubic_unity();
        let ctx = BranchContext::new(&op).unwrap();
        let z = c64(3.0, 0.0);
        let ns: Vec<usize> = (1..=8).map(|k| 25 * k).collect();
        let rs = theorem1_check(&op, &ctx, z, &ns).unwrap();
        for r in rs {
            assert!(r.norm() < 3.0 && r.norm() > 1.0 / 3.0, "unbounded ratio {r}");
        }
    }
}
