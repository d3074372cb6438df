use crate::wkb::{wkb_exponent_integrals, BranchContext, Reference, WKBSeries};
use crate::{c64, C64, Error, Result};
use serde::Serialize;

/// Transform data of one WKB solution at a point: the leading integral
/// `y0 = int S_0` and the coefficient stream `f_0 ... f_N` of
/// `exp(sum_{k>=1} eta^{1-k} I_k) = sum_n f_n eta^{-n} / f-normalization`.
#[derive(Debug, Clone, Serialize)]
pub struct BorelCoefficients {
    #[serde(with = "crate::serde_c64")]
    pub z: C64,
    pub j: usize,
    #[serde(with = "crate::serde_c64")]
    pub y0: C64,
    #[serde(with = "crate::serde_c64::vec")]
    pub f: Vec<C64>,
}

/// Formal exponentiation of the sub-leading WKB exponent.
///
/// With `T(x) = sum_{m>=1} I_{m+1} x^m` in `x = 1/eta`, the coefficients of
/// `exp(I_1) exp(T)` satisfy `n E_n = sum_k k T_k E_{n-k}`; the whole
/// stream is scaled by `exp(I_1)`.
pub fn borel_coefficients(
    series: &WKBSeries,
    ctx: &BranchContext,
    z: C64,
    reference: Reference,
    n_order: usize,
) -> Result<BorelCoefficients> {
    if n_order + 1 > series.n {
        return Err(Error::OrderUnavailable { requested: n_order, available: series.n.saturating_sub(1) });
    }
    let ints = wkb_exponent_integrals(series, ctx, z, reference)?;
    let y0 = ints[0];
    let mut t = vec![c64(0.0, 0.0); n_order + 1];
    for m in 1..=n_order {
        t[m] = ints[m + 1];
    }
    let mut e = vec![c64(0.0, 0.0); n_order + 1];
    e[0] = c64(1.0, 0.0);
    for n in 1..=n_order {
        let mut acc = c64(0.0, 0.0);
        for k in 1..=n {
            acc += t[k] * k as f64 * e[n - k];
        }
        e[n] = acc / n as f64;
    }
    let scale = ints[1].exp();
    let f = e.into_iter().map(|c| c * scale).collect();
    Ok(BorelCoefficients { z, j: series.j, y0, f })
}

/// `Gamma(n + 1/2)` by the exact recurrence from `Gamma(1/2) = sqrt(pi)`.
pub fn gamma_half(n: usize) -> f64 {
    let mut g = std::f64::consts::PI.sqrt();
    for k in 0..n {
        g *= k as f64 + 0.5;
    }
    g
}
