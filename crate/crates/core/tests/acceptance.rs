//! Acceptance suite: one PASS/FAIL line per criterion, with wall time against budget.
//!
//! Run with `cargo test -p whitham-core --test acceptance`. Set
//! `WHITHAM_STRICT_ACCEPTANCE=1` to turn any failing criterion into a nonzero exit.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use whitham_core::asymptotics::{expansion_at, large_wavenumber_asymptote, predict_state, small_wavenumber_asymptote};
use whitham_core::continuation::{
    continue_branch, newton_correct, outward_tangent, resume_branch, switch_at_simple, Branch, Constraint,
    ContinuationConfig, EventKind, Origin,
};
use whitham_core::diagnostics::{galilean_image, integral_identity_residual, nodal_report, region_checks};
use whitham_core::io::{branch_from_str, branch_to_string, sheet_from_str, sheet_to_string};
use whitham_core::kernel::{
    decay_strip, estimate_decay, probe_complete_monotonicity, singular_limit, uniform_grid, KernelKind,
};
use whitham_core::spectral::{max_norm, residual};
use whitham_core::symbol::{
    critical_T, eval_l, eval_l_prime, eval_m, find_double_point, simple_bifurcation_points, T_COMPLETE_MONOTONE,
};
use whitham_core::twodim::{
    check_2d_determinant, rho_grid, sample_sheet, sheet_gradient, theta_grid, Sheet, SheetOptions,
};
use whitham_core::{BifurcationKind, CosineSeries, SteadyState, SymbolParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// States produced by the other criteria, audited in criterion 11.
#[derive(Default)]
struct Emitted {
    states: Vec<(String, SteadyState)>,
}

impl Emitted {
    fn add(&mut self, tag: &str, s: &SteadyState) {
        self.states.push((tag.to_string(), s.clone()));
    }

    fn add_branch(&mut self, tag: &str, b: &Branch) {
        for s in &b.points {
            self.add(tag, s);
        }
    }
}

fn params(t: f64, kappa: f64) -> SymbolParams {
    SymbolParams::new(t, kappa).unwrap()
}

// ---------------------------------------------------------------------------

fn symbol_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut worst_lm: f64 = 0.0;
    let mut worst_dl: f64 = 0.0;
    for _ in 0..10_000 {
        let t = rng.random_range(0.01..3.0);
        let xi = 10f64.powf(rng.random_range(-2.0..2.0));
        let p = params(t, 1.0);
        let l = eval_l(&p, xi).unwrap();
        let m = eval_m(&p, xi).unwrap();
        worst_lm = worst_lm.max((l * m - 1.0).abs());
        // Richardson-combined central differences, O(h⁴)
        let h = 1e-3 * xi.max(1.0);
        let d = |h: f64| (eval_l(&p, xi + h).unwrap() - eval_l(&p, xi - h).unwrap()) / (2.0 * h);
        let fd = (4.0 * d(0.5 * h) - d(h)) / 3.0;
        let an = eval_l_prime(&p, xi).unwrap();
        // relative to |l'|, floored at the rounding level of the difference quotient
        let floor = 1e-6 * l / xi;
        worst_dl = worst_dl.max((fd - an).abs() / an.abs().max(floor));
    }
    outcome(worst_lm <= 1e-14 && worst_dl <= 1e-8, format!("max|l·m−1| = {worst_lm:.2e}, max rel l' error = {worst_dl:.2e}"))
}

fn resonance_surface() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k1, k2) in [(1u32, 2u32), (2, 3), (1, 3), (2, 5)] {
        let t = critical_T(k1 as f64, k2 as f64).unwrap();
        let p = params(t, 1.0);
        worst = worst.max((eval_l(&p, k1 as f64).unwrap() - eval_l(&p, k2 as f64).unwrap()).abs());
    }
    // 30-digit evaluations of the closed form
    let t12 = critical_T(1.0, 2.0).unwrap();
    let t23 = critical_T(2.0, 3.0).unwrap();
    let ok12 = (t12 - 0.239_682_565_394_110_76).abs() < 5e-6 && format!("{t12:.5}") == "0.23968";
    let ok23 = (t23 - 0.142_207_528_071_726_84).abs() < 5e-6 && format!("{t23:.5}") == "0.14221";
    outcome(
        worst <= 1e-12 && ok12 && ok23,
        format!("max|l(k1)−l(k2)| = {worst:.2e}, T*(1;2) = {t12:.8}, T*(2;3) = {t23:.8}"),
    )
}

fn kernel_singularity() -> Outcome {
    let mut worst: f64 = 0.0;
    for t in [0.2, 0.5, 1.0] {
        let p = params(t, 1.0);
        let lim = singular_limit(&p, 1e-6, 2.5e-7).unwrap();
        let expect = 1.0 / (2.0 * PI * t).sqrt();
        worst = worst.max((lim / expect - 1.0).abs());
    }
    outcome(worst <= 1e-3, format!("max relative deviation from 1/√(2πT) = {worst:.2e}"))
}

fn monotonicity_threshold() -> Outcome {
    let grid = uniform_grid(0.05, PI - 0.05, 400);
    let mut lines = Vec::new();
    let mut pass = true;
    for t in [T_COMPLETE_MONOTONE, 0.5, 1.0] {
        let rep = probe_complete_monotonicity(&params(t, 1.0), KernelKind::Periodic, &grid, 3).unwrap();
        pass &= rep.passed();
        lines.push(format!("T={t:.4}: {} violations", rep.violations.len()));
    }
    for t in [0.2, 0.35] {
        let rep = probe_complete_monotonicity(&params(t, 1.0), KernelKind::Periodic, &grid, 3).unwrap();
        let order = rep.first_violation_order();
        pass &= order.is_some_and(|o| o <= 1);
        lines.push(format!("T={t}: first violation order {order:?}"));
    }
    outcome(pass, lines.join("; "))
}

fn decay_rate() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for t in [0.5, 1.0, T_COMPLETE_MONOTONE] {
        let est = estimate_decay(&params(t, 1.0), (2.0, 12.0)).unwrap();
        let ratio = est.delta_hat / decay_strip(t);
        pass &= (0.8..=1.1).contains(&ratio);
        lines.push(format!("T={t:.4}: δ̂/δ* = {ratio:.4}"));
    }
    outcome(pass, lines.join("; "))
}

fn bifurcation_speeds(out: &mut Emitted) -> Outcome {
    let p = params(0.5, 1.0);
    let n = 16;
    let start = SteadyState::new(CosineSeries::zeros(n), 0.5, p);
    let mut dir = vec![0.0; n + 2];
    dir[n + 1] = 1.0;
    let speeds: Vec<f64> = simple_bifurcation_points(&p, 5).iter().map(|b| b.c0).collect();
    let cfg = ContinuationConfig {
        ds: 0.01,
        ds_max: 0.02,
        c_max: speeds[4] + 0.05,
        max_steps: 400,
        ..Default::default()
    };
    let b = continue_branch(&start, &dir, Origin::Start, &cfg).unwrap();
    out.add_branch("trivial", &b);
    let detected: Vec<f64> = b.events_of(EventKind::BifurcationDetected).map(|e| e.c).collect();
    let errs: Vec<f64> = speeds
        .iter()
        .map(|ck| detected.iter().map(|c| (c - ck).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("{} detections, max|Δc| over k=1..5 = {worst:.2e}", detected.len()))
}

fn pinned_branch(out: &mut Emitted) -> Outcome {
    let p = params(0.5, 1.0);
    let exp = expansion_at(&p, 1).unwrap();
    let h = 1e-2;
    let solve = |t: f64| {
        let guess = predict_state(&exp, t, 32);
        newton_correct(&guess, &Constraint::Phase { k: 1, value: t }, 1e-14, 30).unwrap().state
    };
    let (sp, sm) = (solve(h), solve(-h));
    out.add("pinned", &sp);
    out.add("pinned", &sm);
    let first = ((sp.c - sm.c) / (2.0 * h)).abs();
    let second = (sp.c - 2.0 * exp.c0 + sm.c) / (h * h);
    let rel = (second / exp.c2dot - 1.0).abs();
    let r1 = max_norm(&residual(&predict_state(&exp, 1e-2, 16)).coeffs);
    let r2 = max_norm(&residual(&predict_state(&exp, 1e-3, 16)).coeffs);
    let slope = (r1 / r2).log10();
    outcome(
        first <= 1e-6 && rel <= 0.01 && (2.8..=3.2).contains(&slope),
        format!(
            "first difference {first:.2e}, second difference {second:.4} vs c̈(0) = {:.4} (rel {rel:.2e}), residual slope {slope:.3}",
            exp.c2dot
        ),
    )
}

fn cdotdot_asymptotes() -> Outcome {
    let t = 0.5;
    let p = params(t, 1.0);
    let rel = |k: u32| {
        let exact = expansion_at(&p, k).unwrap().c2dot;
        let asym = large_wavenumber_asymptote(t, k as f64);
        (exact - asym).abs() / asym.abs()
    };
    let errs: Vec<f64> = [50, 100, 200, 400].iter().map(|&k| rel(k)).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let small = expansion_at(&params(0.5, 0.05), 1).unwrap().c2dot;
    let small_asym = small_wavenumber_asymptote(0.5, 0.05);
    let small_rel = (small - small_asym).abs() / small_asym.abs();
    outcome(
        errs[1] <= 0.2 && decreasing && small_rel <= 0.25,
        format!(
            "rel error at k=50,100,200,400: {:.3} {:.3} {:.3} {:.3}; small-wavenumber rel error {small_rel:.3}",
            errs[0], errs[1], errs[2], errs[3]
        ),
    )
}

fn sector_distance(theta: f64) -> f64 {
    // distance to the nearest of 0, π (mod 2π)
    let a = theta.rem_euclid(PI);
    a.min(PI - a)
}

fn two_dimensional_sheets(out: &mut Emitted, sheets: &mut Vec<(Sheet, SheetOptions)>) -> Outcome {
    let rho_max = 0.05;
    let opts = SheetOptions::default();
    let rho = rho_grid(rho_max, 10);
    let theta = theta_grid(64);

    // non-resonant pair
    let t23 = critical_T(2.0, 3.0).unwrap();
    let base = find_double_point(t23, 2, 3).unwrap();
    let sheet = sample_sheet(&base, &rho, &theta, &opts).unwrap();
    let ratio = sheet.convergence_ratio();
    for s in sheet.samples.iter().filter(|s| s.converged) {
        out.add("sheet(2,3)", &s.state);
    }
    let grad = sheet_gradient(&base, 0.1 * rho_max, &opts).unwrap();
    let gr = grad.grad_r[0].hypot(grad.grad_r[1]);
    let gp = grad.grad_p[0].hypot(grad.grad_p[1]);
    let grad_ok = gr <= 1e-3 * rho_max && gp <= 1e-3 * rho_max;
    let mut lost_rings = Vec::new();
    for (j, r) in rho.iter().enumerate() {
        let lost = (0..theta.len()).filter(|&i| !sheet.at(i, j).converged).count();
        if lost > 0 {
            lost_rings.push(format!("ρ={r:.3}:{lost}"));
        }
    }
    sheets.push((sheet, opts));

    // resonant pair
    let t12 = critical_T(1.0, 2.0).unwrap();
    let base = find_double_point(t12, 1, 2).unwrap();
    let sheet = sample_sheet(&base, &rho, &theta, &opts).unwrap();
    for s in sheet.samples.iter().filter(|s| s.converged) {
        out.add("sheet(1,2)", &s.state);
    }
    let half_width = PI / 4.0;
    let failures: Vec<f64> = sheet.samples.iter().filter(|s| !s.converged).map(|s| s.theta()).collect();
    let stray = failures.iter().filter(|&&th| sector_distance(th) > half_width).count();
    let mut ring_notes = Vec::new();
    for (j, r) in rho.iter().enumerate() {
        let fails: Vec<f64> = (0..theta.len()).filter(|&i| !sheet.at(i, j).converged).map(|i| theta[i]).collect();
        let st = fails.iter().filter(|&&th| sector_distance(th) > half_width).count();
        if !fails.is_empty() {
            ring_notes.push(format!("ρ={r:.3}:{}({st} outside)", fails.len()));
        }
    }
    let vertical = sample_sheet(&base, &rho, &[0.5 * PI], &opts).unwrap();
    let vertical_ok = vertical.samples.iter().all(|s| s.converged);
    let axis = sample_sheet(&base, &rho, &[0.0], &opts).unwrap();
    let axis_lost = axis.samples.iter().filter(|s| !s.converged).count();
    sheets.push((sheet, opts));

    let pass = ratio >= 0.99 && grad_ok && stray == 0 && vertical_ok;
    outcome(
        pass,
        format!(
            "(2,3): convergence {:.1}% (lost per ring [{}]), |∇r| = {gr:.2e}, |∇p| = {gp:.2e} vs {:.1e}; \
             (1,2): {} failures, {stray} outside ±π/4 of {{0, π}} [{}], θ=π/2 ray converged: {vertical_ok}, θ=0 ray lost {axis_lost}/{}",
            100.0 * ratio,
            lost_rings.join(" "),
            1e-3 * rho_max,
            failures.len(),
            ring_notes.join(" "),
            rho.len()
        ),
    )
}

fn determinant_condition() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (k1, k2) in [(1u32, 2u32), (2, 3)] {
        let base = find_double_point(critical_T(k1 as f64, k2 as f64).unwrap(), k1, k2).unwrap();
        let det = check_2d_determinant(&base).unwrap();
        let p = base.params;
        let d1 = eval_l_prime(&p, p.kappa * k1 as f64).unwrap();
        let d2 = eval_l_prime(&p, p.kappa * k2 as f64).unwrap();
        pass &= det != 0.0 && det.is_finite() && d1 * d2 < 0.0;
        lines.push(format!("({k1},{k2}): det = {det:.4e}, l'(k1) = {d1:.3e}, l'(k2) = {d2:.3e}"));
    }
    outcome(pass, lines.join("; "))
}

fn long_branch(out: &mut Emitted) -> Branch {
    let p = params(0.5, 1.0);
    let bp = simple_bifurcation_points(&p, 1)[0];
    let start = switch_at_simple(&bp, 0.01, 1.0, 32, 1e-13, 30).unwrap().state;
    let dir = outward_tangent(&start, 1).unwrap();
    let cfg = ContinuationConfig { ds: 0.005, max_steps: 200, newton_tol: 1e-12, ..Default::default() };
    let b = continue_branch(&start, &dir, Origin::Bifurcation { point: bp }, &cfg).unwrap();
    out.add_branch("k=1 branch", &b);
    b
}

fn exact_identities(out: &Emitted) -> Outcome {
    let mut worst_id: f64 = 0.0;
    let mut worst_gal: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (tag, s) in &out.states {
        let id = integral_identity_residual(s).abs();
        let gal = galilean_image(s).residual_norm;
        worst_id = worst_id.max(id);
        worst_gal = worst_gal.max(gal);
        let mut bad = id > 1e-10 || gal > 1e-10;
        if s.params.t >= T_COMPLETE_MONOTONE {
            let gap = region_checks(s).max_u - s.c * s.c / 4.0;
            worst_gap = worst_gap.max(gap);
            bad |= gap > 1e-8;
        }
        if bad && failures.len() < 5 {
            failures.push(format!("{tag}@c={:.6}", s.c));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} states: max identity {worst_id:.2e}, max Galilean {worst_gal:.2e}, max(max u − c²/4) = {worst_gap:.2e}{}",
            out.states.len(),
            if failures.is_empty() { String::new() } else { format!(", failing: {}", failures.join(" ")) }
        ),
    )
}

fn nodal_identity(out: &mut Emitted) -> Outcome {
    let p = params(0.5, 1.0);
    let bp = simple_bifurcation_points(&p, 1)[0];
    let s = switch_at_simple(&bp, 0.01, 1.0, 32, 1e-14, 30).unwrap().state;
    out.add("nodal", &s);
    let rep = nodal_report(&s, 2000, 32).unwrap();
    let interior = (1..200).map(|i| PI * i as f64 / 200.0).all(|x| s.u.eval_derivative(x) < 0.0);
    outcome(
        rep.mismatch <= 1e-4 && rep.decreasing && interior,
        format!(
            "mismatch {:.2e} (quadrature change {:.2e}), u' < 0 on (0, π): {}",
            rep.mismatch,
            rep.quadrature_error,
            rep.decreasing && interior
        ),
    )
}

fn persistence(out: &mut Emitted, sheets: &[(Sheet, SheetOptions)]) -> Outcome {
    let p = params(0.5, 1.0);
    let bp = simple_bifurcation_points(&p, 2)[1];
    let start = switch_at_simple(&bp, 0.01, 1.0, 16, 1e-13, 30).unwrap().state;
    let dir = outward_tangent(&start, 2).unwrap();
    let cfg = ContinuationConfig { ds: 0.005, ds_max: 0.01, max_steps: 30, ..Default::default() };
    let origin = Origin::Bifurcation { point: bp };
    let full = continue_branch(&start, &dir, origin.clone(), &cfg).unwrap();
    out.add_branch("k=2 branch", &full);
    let half = continue_branch(&start, &dir, origin, &ContinuationConfig { max_steps: 15, ..cfg.clone() }).unwrap();
    // resume from the serialized file, not the in-memory branch
    let (mut resumed, rcfg) = branch_from_str(&branch_to_string(&half, &cfg)).unwrap();
    resume_branch(&mut resumed, 15, &rcfg).unwrap();
    let text_full = branch_to_string(&full, &cfg);
    let resume_ok = branch_to_string(&resumed, &cfg) == text_full;
    let (b2, c2) = branch_from_str(&text_full).unwrap();
    let branch_rt = branch_to_string(&b2, &c2) == text_full;
    let sheet_rt = sheets.iter().all(|(s, o)| {
        let text = sheet_to_string(s, o);
        let (s2, o2) = sheet_from_str(&text).unwrap();
        sheet_to_string(&s2, &o2) == text
    });
    outcome(
        resume_ok && branch_rt && sheet_rt && full.len() > 15,
        format!(
            "branch round-trip {branch_rt}, {} sheet round-trips {sheet_rt}, resumed 15+15 == uninterrupted 30: {resume_ok}",
            sheets.len()
        ),
    )
}

// ---------------------------------------------------------------------------

struct Report {
    failed: usize,
}

impl Report {
    fn run<F: FnOnce() -> Outcome>(&mut self, id: u32, name: &str, budget: Option<Duration>, f: F) {
        let t0 = Instant::now();
        let o = f();
        let dt = t0.elapsed();
        let in_budget = budget.is_none_or(|b| dt <= b);
        let pass = o.pass && in_budget;
        if !pass {
            self.failed += 1;
        }
        let budget_note = match budget {
            Some(b) => format!("{:.2}s / {:.0}s", dt.as_secs_f64(), b.as_secs_f64()),
            None => format!("{:.2}s", dt.as_secs_f64()),
        };
        println!("[{}] {id:>2} {name} ({budget_note}): {}", if pass { "PASS" } else { "FAIL" }, o.detail);
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn main() {
    // sanity: both tested pairs really are double points
    for (k1, k2) in [(1u32, 2u32), (2, 3)] {
        let bp = find_double_point(critical_T(k1 as f64, k2 as f64).unwrap(), k1, k2).unwrap();
        assert_eq!(bp.kind, BifurcationKind::Double { k1, k2 });
    }
    let mut emitted = Emitted::default();
    let mut sheets = Vec::new();
    let mut rep = Report { failed: 0 };
    rep.run(1, "symbol correctness", secs(1), symbol_correctness);
    rep.run(2, "resonance surface", secs(1), resonance_surface);
    rep.run(3, "kernel singularity law", secs(30), kernel_singularity);
    rep.run(4, "monotonicity threshold", secs(60), monotonicity_threshold);
    rep.run(5, "decay rate", secs(60), decay_rate);
    rep.run(6, "bifurcation speeds", secs(10), || bifurcation_speeds(&mut emitted));
    rep.run(7, "pinned-amplitude branch", secs(30), || pinned_branch(&mut emitted));
    rep.run(8, "c̈(0) asymptotes", secs(5), cdotdot_asymptotes);
    rep.run(9, "two-dimensional sheets", secs(600), || two_dimensional_sheets(&mut emitted, &mut sheets));
    rep.run(10, "determinant condition", secs(1), determinant_condition);
    rep.run(12, "nodal identity", secs(120), || nodal_identity(&mut emitted));
    rep.run(13, "persistence", secs(10), || persistence(&mut emitted, &sheets));
    let t0 = Instant::now();
    let b = long_branch(&mut emitted);
    println!(
        "     (k=1 branch at T=0.5: {} points up to c = {:.4}, N = {}, {:.1}s)",
        b.len(),
        b.points.last().unwrap().c,
        b.points.last().unwrap().order(),
        t0.elapsed().as_secs_f64()
    );
    rep.run(11, "exact identities on emitted states", None, || exact_identities(&emitted));
    println!("{} of 13 criteria failed", rep.failed);
    // failures are reported, not fatal, unless strict mode is requested
    if rep.failed > 0 && std::env::var_os("WHITHAM_STRICT_ACCEPTANCE").is_some() {
        std::process::exit(1);
    }
}
