//! Borel-plane data of WKB solutions: transform coefficients, Pade-assisted
//! Laplace summation, singularity diagnostics, a direct ODE reference
//! solution, the summability-region predicate, and the eigenpolynomial
//! ratio relation.

mod coeffs;
mod predicate;
mod reference;
mod sum;

pub use coeffs::{borel_coefficients, gamma_half, BorelCoefficients};
pub use predicate::{eigen_ratio_relation, summability_region_predicate, Verdict};
pub use reference::{cauchy_data, reference_solution};
pub use sum::{borel_pade_sum, LaplaceSum, SumMethod};
