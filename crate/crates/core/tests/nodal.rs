//! The nodal identity on small-amplitude waves.

use whitham_core::continuation::switch_at_simple;
use whitham_core::diagnostics::{nodal_report, nodal_residual};
use whitham_core::symbol::simple_bifurcation_points;
use whitham_core::{Error, SteadyState, SymbolParams};

fn wave(t: f64) -> SteadyState {
    let p = SymbolParams::new(0.5, 1.0).unwrap();
    let bp = simple_bifurcation_points(&p, 1)[0];
    switch_at_simple(&bp, t, 1.0, 32, 1e-14, 30).unwrap().state
}

#[test]
fn mismatch_shrinks_with_quadrature() {
    let s = wave(0.05);
    let errs: Vec<f64> = [4, 8, 16, 32].iter().map(|&q| nodal_report(&s, q, 8).unwrap().mismatch).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-3 * errs[0]);
}

#[test]
fn converged_wave_satisfies_the_identity() {
    let s = wave(0.02);
    let rep = nodal_report(&s, 200, 16).unwrap();
    assert!(rep.mismatch <= 1e-8);
    assert!(rep.decreasing);
    assert!(nodal_residual(&s, 200).unwrap() <= 1e-8);
}

#[test]
fn coarse_quadrature_is_flagged() {
    let s = wave(0.05);
    assert!(matches!(nodal_residual(&s, 4), Err(Error::Accuracy { .. })));
}
