//! Branch-tracked evaluation of the characteristic roots, the phase
//! primitives, the Riccati recursion producing the WKB coefficient
//! functions, finite-part integrals from turning points, truncated WKB
//! evaluation, and the eigenpolynomial asymptotics check.

mod asymptotics;
mod branch;
mod hadamard;
mod phase;
mod riccati;

pub use asymptotics::{log_eigenpoly, theorem1_check, wkb_exponent_integrals, wkb_truncated, Reference};
pub use branch::BranchContext;
pub use hadamard::{hadamard_fp, wkb_integrals, HadamardFP, SingularTerm};
pub use phase::{s1_closed_form, PhasePair};
pub use riccati::{cauchy_ratio_terms, riccati_residual, riccati_series, WKBSeries};
