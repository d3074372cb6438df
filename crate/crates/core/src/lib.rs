//! Spectral asymptotics toolkit for exactly solvable differential operators.
//!
//! The crate computes three layers of data for an operator
//! `M = sum_k rho_k(z) d^k/dz^k` with polynomial coefficients:
//!
//! * exact eigenpolynomials and their root clouds ([`operator`]),
//! * formal WKB series, phase primitives, finite-part integrals and
//!   Borel resummation ([`wkb`], [`borel`]),
//! * the Stokes complex, the support tree of the limiting root measure,
//!   the boundary polygon of the phase-plane region, and bicharacteristic
//!   trajectories ([`geometry`], [`bichar`]).
//!
//! Euler-Cauchy operators, for which the WKB machinery collapses to a
//! convergent indicial calculus, live in [`eulercauchy`].

pub mod algebra;
pub mod bichar;
pub mod borel;
pub mod dd;
pub mod eulercauchy;
pub mod geometry;
pub mod linalg;
pub mod operator;
pub mod quad;
pub mod wkb;

use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("leading coefficient is a perfect power (z - a)^M; this input is rejected here")]
    DegenerateLeading,
    #[error("eigenvalue collision: lambda_{n} == lambda_{m}, eigenpolynomial not unique")]
    EigenvalueCollision { n: usize, m: usize },
    #[error("root finding did not converge: {0}")]
    RootFinding(String),
    #[error("algebraic elements built over different moduli")]
    ModulusMismatch,
    #[error("series truncation order too low: {0}")]
    TruncationOrder(String),
    #[error("path passes too close to a turning point (clearance {clearance:.3e}, got {distance:.3e})")]
    PathClearance { distance: f64, clearance: f64 },
    #[error("branch continuation ambiguous at z = {z}; nearest-root margin below threshold")]
    AmbiguousBranch { z: C64 },
    #[error("seed circle radius fell below the minimum around z_k = {0}")]
    SeedRadius(C64),
    #[error("support arcs do not meet at a common vertex: {0}")]
    ArcsDoNotMeet(String),
    #[error("quadrature did not reach the requested tolerance ({0})")]
    Quadrature(String),
    #[error("ODE integration failed: {0}")]
    OdeStep(String),
    #[error("Pade approximant pole on the Laplace ray at distance {distance:.3e}")]
    PadePoleOnRay { distance: f64 },
    #[error("Pade system singular for all attempted orders")]
    PadeDegenerate,
    #[error("requested order {requested} exceeds available coefficients {available}")]
    OrderUnavailable { requested: usize, available: usize },
    #[error("limit extrapolation did not converge: {0}")]
    Extrapolation(String),
    #[error("indicial derivative vanishes at the seed root; branch series undefined")]
    IndicialDegenerate,
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Convenience constructor mirroring `Complex64::new`.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Serde adapter: complex numbers as `[re, im]` pairs on the wire.
pub mod serde_c64 {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }

    /// Same adapter for vectors of complex numbers.
    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
            let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
            pairs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
            let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
            Ok(pairs.into_iter().map(|p| C64::new(p[0], p[1])).collect())
        }
    }
}
