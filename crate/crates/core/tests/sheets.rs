//! Two-dimensional sheets near double points.

use std::f64::consts::PI;

use whitham_core::symbol::{critical_T, find_double_point};
use whitham_core::twodim::{projected_secondary_branch, sample_sheet, sheet_gradient, solve_sheet_point, SheetOptions};
use whitham_core::{BifurcationPoint, Error};

fn base(k1: u32, k2: u32) -> BifurcationPoint {
    find_double_point(critical_T(k1 as f64, k2 as f64).unwrap(), k1, k2).unwrap()
}

#[test]
fn non_resonant_sheet_is_flat_at_the_origin() {
    let b = base(2, 3);
    let opts = SheetOptions::default();
    let g = sheet_gradient(&b, 0.005, &opts).unwrap();
    for v in g.grad_r.iter().chain(&g.grad_p) {
        assert!(v.abs() < 5e-5, "{g:?}");
    }
    // extrapolation improves on the raw fit
    let coarse = g.coarse_p[0].hypot(g.coarse_p[1]);
    assert!(g.grad_p[0].hypot(g.grad_p[1]) < coarse);
}

#[test]
fn secondary_slices_connect_the_pure_branches() {
    let b = base(2, 3);
    let opts = SheetOptions::default();
    let k0 = b.params.kappa;
    for dk in [1e-4, -1e-4] {
        let br = projected_secondary_branch(&b, k0 + dk, 8, &opts).unwrap();
        assert!(br.len() >= 2);
        for s in &br.points {
            assert!(s.residual_norm <= 1e-11);
            assert_eq!(s.params.kappa, k0 + dk);
            assert!(s.u.coeffs[2] != 0.0 && s.u.coeffs[3] != 0.0);
        }
        // one end is dominated by cos 2x, the other by cos 3x
        let (first, last) = (&br.points[0], br.points.last().unwrap());
        let ratio = |s: &whitham_core::SteadyState| (s.u.coeffs[3] / s.u.coeffs[2]).abs();
        assert!(ratio(first) < 0.2 || ratio(last) > 5.0, "{} {}", ratio(first), ratio(last));
        assert!(br.points.iter().all(|s| (s.c - b.c0).abs() <= opts.r_bound));
    }
}

#[test]
fn secondary_slice_far_away_is_not_found() {
    let b = base(2, 3);
    assert!(matches!(projected_secondary_branch(&b, 2.0, 8, &SheetOptions::default()), Err(Error::NotFound(_))));
}

#[test]
fn secondary_slice_rejects_resonant_points() {
    let b = base(1, 2);
    assert!(matches!(projected_secondary_branch(&b, 1.0, 8, &SheetOptions::default()), Err(Error::Precondition(_))));
}

#[test]
fn resonant_slit_along_the_lower_mode() {
    let b = base(1, 2);
    let opts = SheetOptions::default();
    let rho = [0.005, 0.01, 0.02];
    let axis = sample_sheet(&b, &rho, &[0.0], &opts).unwrap();
    assert!(axis.samples.iter().all(|s| !s.converged));
    let vertical = sample_sheet(&b, &rho, &[0.5 * PI], &opts).unwrap();
    assert!(vertical.samples.iter().all(|s| s.converged));
}

#[test]
fn resonant_sheet_is_symmetric_under_half_period_shift() {
    // x ↦ x + π flips cos x and keeps cos 2x
    let b = base(1, 2);
    let opts = SheetOptions::default();
    let a = solve_sheet_point(&b, 0.004, 0.01, None, &opts).unwrap();
    let m = solve_sheet_point(&b, -0.004, 0.01, None, &opts).unwrap();
    assert!(a.converged && m.converged);
    assert!((a.r - m.r).abs() < 1e-12 && (a.p - m.p).abs() < 1e-12);
    for (n, (x, y)) in a.state.u.coeffs.iter().zip(&m.state.u.coeffs).enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        assert!((x - sign * y).abs() < 1e-12, "mode {n}");
    }
}

#[test]
fn sheet_sampling_is_deterministic() {
    let b = base(2, 3);
    let opts = SheetOptions::default();
    let rho = [0.004, 0.008];
    let theta = [0.3, 1.9, 4.0];
    assert_eq!(sample_sheet(&b, &rho, &theta, &opts).unwrap(), sample_sheet(&b, &rho, &theta, &opts).unwrap());
}
