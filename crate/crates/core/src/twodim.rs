//! Two-parameter sheets of bimodal waves at a double point `l(κ₀k₁) = l(κ₀k₂)`.
//!
//! A sheet point pins the amplitudes `a_{k₁} = t₁`, `a_{k₂} = t₂` (for a zero
//! wavenumber the mean `2a₀` is pinned) and solves `F(u, c₀ + r; κ₀ + p) = 0` for
//! the remaining coefficients together with `r` and `p`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuation::{newton_correct, smallest_eigenvalues, state_vector, Branch, Constraint, Origin};
use crate::error::{Error, Result};
use crate::spectral::{d_residual_dc, d_residual_dkappa, jacobian, max_norm, residual, CosineSeries, SteadyState};
use crate::symbol::{eval_l, eval_l_prime, BifurcationKind, BifurcationPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetOptions {
    /// Truncation order of every sheet state.
    pub n: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub rho_max: f64,
    /// A point only counts as converged if `|r|` and `|p|` stay below these.
    pub r_bound: f64,
    pub p_bound: f64,
}

impl Default for SheetOptions {
    fn default() -> Self {
        Self { n: 64, tol: 1e-12, max_iters: 30, rho_max: 0.1, r_bound: 0.25, p_bound: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetPoint {
    pub t1: f64,
    pub t2: f64,
    pub converged: bool,
    /// `c − c₀`.
    pub r: f64,
    /// `κ − κ₀`.
    pub p: f64,
    pub iterations: usize,
    pub state: SteadyState,
}

impl SheetPoint {
    pub fn rho(&self) -> f64 {
        self.t1.hypot(self.t2)
    }

    pub fn theta(&self) -> f64 {
        self.t2.atan2(self.t1).rem_euclid(2.0 * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub base: BifurcationPoint,
    pub resonant: bool,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// Ray-major: `samples[i * rho.len() + j]` sits at `(rho[j], theta[i])`.
    pub samples: Vec<SheetPoint>,
}

impl Sheet {
    pub fn at(&self, i_theta: usize, j_rho: usize) -> &SheetPoint {
        &self.samples[i_theta * self.rho.len() + j_rho]
    }

    pub fn convergence_ratio(&self) -> f64 {
        let ok = self.samples.iter().filter(|s| s.converged).count();
        ok as f64 / self.samples.len().max(1) as f64
    }
}

fn double_pair(base: &BifurcationPoint) -> Result<(u32, u32)> {
    match base.kind {
        BifurcationKind::Double { k1, k2 } => Ok((k1, k2)),
        _ => Err(Error::Precondition("sheets need a double bifurcation point".into())),
    }
}

// coefficient value realizing the pinned amplitude of wavenumber k
fn pin_value(k: u32, t: f64) -> f64 {
    if k == 0 {
        0.5 * t
    } else {
        t
    }
}

fn trivial_point(base: &BifurcationPoint, n: usize) -> SheetPoint {
    SheetPoint {
        t1: 0.0,
        t2: 0.0,
        converged: true,
        r: 0.0,
        p: 0.0,
        iterations: 0,
        state: SteadyState::new(CosineSeries::zeros(n), base.c0, base.params),
    }
}

/// Minimum-norm least-squares solve; the pinned system is rank deficient on the
/// pure-mode axes, where `κ` is not determined.
fn min_norm_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    svd.solve(b, eps).ok()
}

/// Solves for the sheet point with amplitudes `(t1, t2)`, optionally warm-started.
pub fn solve_sheet_point(
    base: &BifurcationPoint,
    t1: f64,
    t2: f64,
    guess: Option<&SheetPoint>,
    opts: &SheetOptions,
) -> Result<SheetPoint> {
    let (k1, k2) = double_pair(base)?;
    // slack for points placed on the outer circle by (ρ cos θ, ρ sin θ)
    if t1.hypot(t2) > opts.rho_max * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|(t1, t2)| = {} exceeds rho_max = {}", t1.hypot(t2), opts.rho_max)));
    }
    let n = opts.n.max(2 * k1.max(k2) as usize + 1);
    if t1 == 0.0 && t2 == 0.0 {
        return Ok(trivial_point(base, n));
    }
    let (i1, i2) = (k1 as usize, k2 as usize);
    let (mut u, mut r, mut p) = match guess {
        Some(g) => (g.state.u.resized(n), g.r, g.p),
        None => (CosineSeries::zeros(n), 0.0, 0.0),
    };
    u.coeffs[i1] = pin_value(k1, t1);
    u.coeffs[i2] = pin_value(k2, t2);
    let free: Vec<usize> = (0..=n).filter(|&j| j != i1 && j != i2).collect();
    let state_of = |u: &CosineSeries, r: f64, p: f64| SteadyState {
        u: u.clone(),
        c: base.c0 + r,
        params: base.params.with_kappa(base.params.kappa + p),
        residual_norm: f64::NAN,
    };
    let mut iterations = 0;
    let mut converged = false;
    let mut s = state_of(&u, r, p);
    for it in 0..=opts.max_iters {
        iterations = it;
        if s.params.kappa <= 0.0 {
            break;
        }
        let f = residual(&s);
        s.residual_norm = max_norm(&f.coeffs);
        if s.residual_norm <= opts.tol {
            converged = true;
            break;
        }
        if it == opts.max_iters || !s.residual_norm.is_finite() || s.residual_norm > 1e3 {
            break;
        }
        let j = jacobian(&s);
        let mut a = DMatrix::zeros(n + 1, n + 1);
        for (col, &fj) in free.iter().enumerate() {
            a.set_column(col, &j.column(fj));
        }
        a.set_column(n - 1, &d_residual_dc(&s));
        a.set_column(n, &d_residual_dkappa(&s));
        let rhs = DVector::from_iterator(n + 1, f.coeffs.iter().map(|v| -v));
        let Some(delta) = min_norm_solve(a, &rhs) else { break };
        for (col, &fj) in free.iter().enumerate() {
            u.coeffs[fj] += delta[col];
        }
        r += delta[n - 1];
        p += delta[n];
        s = state_of(&u, r, p);
    }
    if s.params.kappa <= 0.0 {
        // diverged past κ = 0: keep a valid state for storage, `p` still records the iterate
        s.params = base.params;
        s.residual_norm = f64::NAN;
    }
    if s.residual_norm.is_nan() {
        s.residual_norm = max_norm(&residual(&s).coeffs);
    }
    let converged = converged && r.abs() <= opts.r_bound && p.abs() <= opts.p_bound;
    Ok(SheetPoint { t1, t2, converged, r, p, iterations, state: s })
}

/// `θ_i = (i + ½)·2π/m`, which never lands on a pure-mode axis.
pub fn theta_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) * 2.0 * PI / m as f64).collect()
}

/// `ρ_j = j·ρ_max/m` for `j = 1..=m`.
pub fn rho_grid(rho_max: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 * rho_max / m as f64).collect()
}

// linear extrapolation in ρ through the last two accepted points of a ray
fn extrapolate((ra, a): &(f64, SheetPoint), (rb, b): &(f64, SheetPoint), rho: f64) -> SheetPoint {
    let (ra, rb) = (*ra, *rb);
    let w = if rb > ra { (rho - rb) / (rb - ra) } else { 0.0 };
    let n = b.state.order();
    let ua = a.state.u.resized(n);
    let coeffs = b.state.u.coeffs.iter().zip(&ua.coeffs).map(|(y, x)| y + w * (y - x)).collect();
    let mut g = b.clone();
    g.state.u = CosineSeries { coeffs };
    g.r = b.r + w * (b.r - a.r);
    g.p = b.p + w * (b.p - a.p);
    g
}

/// Continues along a ray with substeps of at most `ρ_max/64`, halving on failure.
fn sweep_ray(base: &BifurcationPoint, rho: &[f64], theta: f64, opts: &SheetOptions) -> Result<Vec<SheetPoint>> {
    let h_max = opts.rho_max / 64.0;
    let h_min = h_max / 1024.0;
    let (ct, st) = (theta.cos(), theta.sin());
    let mut out: Vec<SheetPoint> = Vec::with_capacity(rho.len());
    let mut hist: Vec<(f64, SheetPoint)> = vec![(0.0, solve_sheet_point(base, 0.0, 0.0, None, opts)?)];
    let mut lost = false;
    for &target in rho {
        if lost {
            out.push(solve_sheet_point(base, target * ct, target * st, None, opts)?);
            continue;
        }
        let mut h = h_max;
        loop {
            let (at, last) = hist.last().unwrap();
            let at = *at;
            if at >= target {
                break;
            }
            let next = (at + h).min(target);
            let guess = match hist.len() {
                1 => None,
                k => Some(extrapolate(&hist[k - 2], &hist[k - 1], next)),
            };
            let pt = solve_sheet_point(base, next * ct, next * st, guess.as_ref().or(Some(last)), opts)?;
            if pt.converged {
                hist.push((next, pt));
                if hist.len() > 2 {
                    hist.remove(0);
                }
                h = (2.0 * h).min(h_max);
            } else {
                h *= 0.5;
                if h < h_min {
                    lost = true;
                    out.push(pt);
                    break;
                }
            }
        }
        if !lost {
            out.push(hist.last().unwrap().1.clone());
        }
    }
    Ok(out)
}

/// Sweeps each `θ` ray outward in `ρ`, warm-starting from the last converged point
/// on the ray. Rays are solved concurrently; the result does not depend on scheduling.
pub fn sample_sheet(base: &BifurcationPoint, rho: &[f64], theta: &[f64], opts: &SheetOptions) -> Result<Sheet> {
    let (k1, k2) = double_pair(base)?;
    let mut rho = rho.to_vec();
    rho.sort_by(f64::total_cmp);
    if rho.first().is_some_and(|r| *r < 0.0) {
        return Err(Error::Domain("negative radius in sheet grid".into()));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(theta.len().max(1));
    let chunk = theta.len().div_ceil(workers).max(1);
    let rays: Vec<Result<Vec<SheetPoint>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = theta
            .chunks(chunk)
            .map(|ths| {
                let rho = &rho;
                scope.spawn(move || ths.iter().map(|&th| sweep_ray(base, rho, th, opts)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sheet worker panicked")).collect()
    });
    let mut samples = Vec::with_capacity(rho.len() * theta.len());
    for ray in rays {
        samples.extend(ray?);
    }
    Ok(Sheet { base: *base, resonant: base.is_resonant() || k2 == 0 || k1 == 0, rho, theta: theta.to_vec(), samples })
}

/// `c₀ l(κ₀k₁)[l'(κ₀k₂)k₂ − l'(κ₀k₁)k₁]`, the determinant of the reduced
/// `(r, p)` system; derivatives of `l` are taken in its argument.
pub fn check_2d_determinant(base: &BifurcationPoint) -> Result<f64> {
    let (k1, k2) = double_pair(base)?;
    let p = base.params;
    let unit = p.with_kappa(1.0);
    let x1 = p.kappa * k1 as f64;
    let x2 = p.kappa * k2 as f64;
    let lp = |x: f64| if x == 0.0 { Ok(0.0) } else { eval_l_prime(&unit, x) };
    Ok(base.c0 * eval_l(&unit, x1)? * (lp(x2)? * k2 as f64 - lp(x1)? * k1 as f64))
}

/// Polar form of the determinant; it carries the extra factor `sin ϑ`.
pub fn check_2d_determinant_polar(base: &BifurcationPoint, theta: f64) -> Result<f64> {
    Ok(check_2d_determinant(base)? * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetGradient {
    /// Richardson-combined estimates.
    pub grad_r: [f64; 2],
    pub grad_p: [f64; 2],
    /// Raw fits on the coarse stencil.
    pub coarse_r: [f64; 2],
    pub coarse_p: [f64; 2],
    /// Outer radius of the coarse stencil.
    pub radius: f64,
}

fn stencil_fit(base: &BifurcationPoint, h: f64, opts: &SheetOptions) -> Result<([f64; 2], [f64; 2])> {
    const ROTATION: f64 = 0.3;
    let (sr, cr) = ROTATION.sin_cos();
    let mut rows = Vec::new();
    let mut rv = Vec::new();
    let mut pv = Vec::new();
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let (a, b) = (i as f64 * h, j as f64 * h);
            let (x, y) = (cr * a - sr * b, sr * a + cr * b);
            let pt = solve_sheet_point(base, x, y, None, opts)?;
            if !pt.converged {
                return Err(Error::NotFound(format!("stencil point ({x:.3e}, {y:.3e}) did not converge")));
            }
            rows.push([1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y]);
            rv.push(pt.r);
            pv.push(pt.p);
        }
    }
    let a = DMatrix::from_fn(rows.len(), 10, |i, j| rows[i][j]);
    let svd = a.svd(true, true);
    let fit = |v: &[f64]| -> Result<[f64; 2]> {
        let c = svd
            .solve(&DVector::from_column_slice(v), 0.0)
            .map_err(|e| Error::Domain(format!("stencil fit failed: {e}")))?;
        Ok([c[1], c[2]])
    };
    Ok((fit(&rv)?, fit(&pv)?))
}

/// Gradients of `r` and `p` at the origin.
///
/// A cubic least-squares fit over a 5×5 stencil (rotated off the pure-mode axes,
/// corners at distance `radius`) has an `O(h⁴)` error in its linear part; fits at
/// spacings `h` and `h/2` are combined to cancel it.
pub fn sheet_gradient(base: &BifurcationPoint, radius: f64, opts: &SheetOptions) -> Result<SheetGradient> {
    let h = radius / (2.0 * 2f64.sqrt());
    let (cr, cp) = stencil_fit(base, h, opts)?;
    let (fr, fp) = stencil_fit(base, 0.5 * h, opts)?;
    let rich = |f: [f64; 2], c: [f64; 2]| [(16.0 * f[0] - c[0]) / 15.0, (16.0 * f[1] - c[1]) / 15.0];
    Ok(SheetGradient { grad_r: rich(fr, cr), grad_p: rich(fp, cp), coarse_r: cr, coarse_p: cp, radius })
}

// root of ρ ↦ p(ρ, θ) − Δκ on the part of a ray connected to the origin, by
// continuation outward and Illinois false position inside the first sign change
fn slice_on_ray(base: &BifurcationPoint, theta: f64, dk: f64, opts: &SheetOptions) -> Result<Option<SheetPoint>> {
    let (ct, st) = (theta.cos(), theta.sin());
    let radii = rho_grid(opts.rho_max, 64);
    let ray = sweep_ray(base, &radii, theta, opts)?;
    // the origin brackets only when Δκ ≠ 0; otherwise p vanishes there trivially
    let mut lo: Option<(f64, f64, Option<&SheetPoint>)> = (dk != 0.0).then_some((0.0, -dk, None));
    let mut bracket = None;
    for (rho, pt) in radii.iter().zip(&ray) {
        if !pt.converged {
            break;
        }
        let g = pt.p - dk;
        if g == 0.0 {
            return Ok(Some(pt.clone()));
        }
        if let Some((r0, g0, p0)) = lo {
            if g0.signum() != g.signum() {
                bracket = Some((r0, g0, p0, *rho, g, pt));
                break;
            }
        }
        lo = Some((*rho, g, Some(pt)));
    }
    let Some((mut a, mut fa, near, mut b, mut fb, far)) = bracket else { return Ok(None) };
    let mut best = near.unwrap_or(far).clone();
    let (r_lo, r_hi) = (a, b);
    for _ in 0..80 {
        let m = (a * fb - b * fa) / (fb - fa);
        let pt = solve_sheet_point(base, m * ct, m * st, Some(&best), opts)?;
        if !pt.converged {
            return Ok(None);
        }
        let fm = pt.p - dk;
        best = pt;
        if fm.abs() <= 1e-14 || (b - a).abs() <= 1e-15 {
            break;
        }
        if fm.signum() == fb.signum() {
            b = m;
            fb = fm;
            fa *= 0.5;
        } else {
            a = b;
            fa = fb;
            b = m;
            fb = fm;
        }
    }
    // a root outside the initial bracket belongs to another family
    let rho = best.rho();
    Ok((rho >= r_lo * (1.0 - 1e-12) && rho <= r_hi * (1.0 + 1e-12)).then_some(best))
}

/// Mixed waves at fixed `κ` between the pure `k₁` and `k₂` directions.
///
/// On rays `θ_i ∈ (0, π/2)` the radius with `p(ρ, θ) = κ − κ₀` is located; each hit
/// is re-solved at exactly that `κ` with `a_{k₁}` held. Points are ordered by `θ`.
pub fn projected_secondary_branch(base: &BifurcationPoint, kappa: f64, rays: usize, opts: &SheetOptions) -> Result<Branch> {
    let (k1, _) = double_pair(base)?;
    if base.is_resonant() {
        return Err(Error::Precondition("secondary slices need a non-resonant double point".into()));
    }
    let dk = kappa - base.params.kappa;
    let mut points: Vec<SteadyState> = Vec::new();
    for i in 0..rays {
        let theta = (i as f64 + 0.5) * 0.5 * PI / rays as f64;
        let Some(hit) = slice_on_ray(base, theta, dk, opts)? else { continue };
        let mut s = hit.state;
        s.params = base.params.with_kappa(kappa);
        let amp = s.u.coeffs[k1 as usize];
        if let Ok(c) = newton_correct(&s, &Constraint::Phase { k: k1 as usize, value: amp }, opts.tol, opts.max_iters) {
            points.push(c.state);
        }
    }
    if points.is_empty() {
        return Err(Error::NotFound(format!("no mixed waves at kappa = {kappa} within rho <= {}", opts.rho_max)));
    }
    let mut step_sizes = vec![0.0];
    for w in points.windows(2) {
        let (a, b) = (state_vector(&w[0]), state_vector(&w[1]));
        step_sizes.push(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
    }
    let min_eigs = points.iter().map(|s| smallest_eigenvalues(&jacobian(s), 6)[0]).collect();
    Ok(Branch {
        next_steps: step_sizes.clone(),
        step_sizes,
        min_eigs,
        points,
        events: Vec::new(),
        origin: Origin::Bifurcation { point: *base },
    })
}
