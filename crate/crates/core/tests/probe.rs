use stokes_atlas_core::algebra::ComplexPoly;
use stokes_atlas_core::borel::*;
use stokes_atlas_core::operator::*;
use stokes_atlas_core::wkb::*;
use stokes_atlas_core::{c64, C64};

#[test]
fn probe_timing() {
    let op = ESOperator::new(vec![
        ComplexPoly::zero(), ComplexPoly::zero(),
        ComplexPoly::from_roots(&[c64(2.5, 0.0), c64(-1.0, 0.2), c64(-0.2, -1.1)]),
    ]).unwrap();
    let ctx = BranchContext::new(&op).unwrap();
    for n in [6usize, 9, 11, 13] {
        let t0 = std::time::Instant::now();
        let series = riccati_series(&op, 2, n).unwrap();
        println!("riccati N={n}: {:?}", t0.elapsed());
        for (k, t) in series.terms.iter().enumerate().skip(n.saturating_sub(1)) {
            for (i, c) in t.w_coeffs().iter().enumerate() {
                if !c.is_zero() {
                    println!("  S_{k} w^{i}: num {:?} den {:?}", c.num().degree(), c.den().degree());
                }
            }
        }
    }
    let series = riccati_series(&op, 2, 13).unwrap();
    let z_k = c64(2.5, 0.0);
    let z = c64(1.0, -1.1);
    let t0 = std::time::Instant::now();
    let c = borel_coefficients(&series, &ctx, z, Reference::Turning(z_k), 12);
    println!("coeffs at one z: {:?} -> {}", t0.elapsed(), c.is_ok());
}
