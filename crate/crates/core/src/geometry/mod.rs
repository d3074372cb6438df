//! Stokes curves, their labels, ordered crossings and the curves they
//! spawn, inertness bookkeeping, the support tree of the limiting root
//! measure, and the boundary polygon of the phase-plane region.

mod bregion;
mod complex;
mod seeds;
mod support;
mod trace;

mod relative;

pub use bregion::{b_region_polygon, BRegionPolygon};
pub use complex::{build_stokes_complex, classify_inert, find_ordered_crossings, trace_both_ways_with_cuts, Crossing, StokesComplex};
pub use relative::stokes_relative;
pub use seeds::{seed_stokes, stokes_seeds_all, w1_near_leaf, LocalRay};
pub use support::{build_support_tree, CutArc, SupportTree};
pub use trace::{
    label_curve, point_polyline_distance, trace_curve, trace_curve_with_cuts, verify_drift,
    CurveOrigin, LabelSpan, Seed, TraceParams, TracedCurve,
};
