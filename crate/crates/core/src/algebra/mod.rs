//! Complex polynomial arithmetic, root finding, rational functions, and the
//! algebraic extension `C(z)[w] / (rho_M(z) w^M - 1)` in which all WKB
//! coefficients live exactly.

mod element;
mod poly;
pub mod puiseux;
mod rational;
mod roots;

pub use element::{alg_arith, AlgOp, AlgebraicElement, Modulus};
pub use poly::ComplexPoly;
pub use puiseux::{puiseux_at, FracSeries, TurningLocal};
pub use rational::RationalFn;
pub use roots::{cluster_roots, companion_eigenvalues, poly_roots, poly_roots_refined, root_clusters, RootCluster};
