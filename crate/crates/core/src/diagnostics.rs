//! Exact identities and qualitative checks for computed steady states and branches.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::kernel::{PeriodicKernel, DEFAULT_PERIODIC_TERMS};
use crate::spectral::{max_norm, residual, CosineSeries, SteadyState};
use crate::special::gauss_legendre;
use crate::symbol::T_COMPLETE_MONOTONE;

/// Slack allowed on the bound `max u ≤ c²/4`.
pub const AMPLITUDE_BOUND_SLACK: f64 = 1e-8;

/// `(c − 1)⟨u, 1⟩ − ⟨u, u⟩`, which vanishes for every solution.
///
/// Equals `−2F₀(u, c)`, the mean mode of the residual.
pub fn integral_identity_residual(s: &SteadyState) -> f64 {
    let a = &s.u.coeffs;
    let mean = 2.0 * a[0];
    let sq = 2.0 * a[0] * a[0] + a[1..].iter().map(|v| v * v).sum::<f64>();
    (s.c - 1.0) * mean - sq
}

/// The symmetry `c ↦ 2 − c`, `u ↦ u + 1 − c`.
pub fn galilean_image(s: &SteadyState) -> SteadyState {
    let mut u = s.u.clone();
    u.coeffs[0] += 1.0 - s.c;
    SteadyState::new(u, 2.0 - s.c, s.params)
}

fn second_derivative(u: &CosineSeries, x: f64) -> f64 {
    -u.coeffs.iter().enumerate().skip(1).map(|(n, a)| (n * n) as f64 * a * (n as f64 * x).cos()).sum::<f64>()
}

/// Location and value of the maximum (`sign = 1`) or minimum (`sign = −1`) of `u`
/// from `16N` samples on `[0, π]` refined by Newton on `u'`.
fn extremum(u: &CosineSeries, sign: f64) -> (f64, f64) {
    let m = 16 * u.order().max(1);
    let h = PI / m as f64;
    let (mut best_x, mut best) = (0.0, sign * u.eval(0.0));
    for i in 1..=m {
        let x = i as f64 * h;
        let v = sign * u.eval(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let mut x = best_x;
    for _ in 0..20 {
        let d2 = second_derivative(u, x);
        if d2 == 0.0 {
            break;
        }
        let step = u.eval_derivative(x) / d2;
        let nx = (x - step).clamp((best_x - h).max(0.0), (best_x + h).min(PI));
        if (nx - x).abs() <= 1e-15 {
            x = nx;
            break;
        }
        x = nx;
    }
    let v = sign * u.eval(x);
    if v >= best {
        (x, v * sign)
    } else {
        (best_x, best * sign)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub c: f64,
    pub max_u: f64,
    pub argmax_u: f64,
    pub min_u: f64,
    /// `max u < min{0, c − 1}` lies in a region without solutions.
    pub in_excluded_region: bool,
    /// A nonconstant state at `c = 1`, where only `u = 0` solves.
    pub nontrivial_at_unit_speed: bool,
    /// `max u − c²/4`, reported when `T ≥ 4/π²`.
    pub bound_gap: Option<f64>,
    pub violates_bound: bool,
    pub dist_zero_line: f64,
    pub dist_constant_line: f64,
    pub dist_half_speed: f64,
}

impl RegionReport {
    pub fn passed(&self) -> bool {
        !(self.in_excluded_region || self.nontrivial_at_unit_speed || self.violates_bound)
    }
}

pub fn region_checks(s: &SteadyState) -> RegionReport {
    let (argmax_u, max_u) = extremum(&s.u, 1.0);
    let (_, min_u) = extremum(&s.u, -1.0);
    let c = s.c;
    let nonconstant = s.u.coeffs[1..].iter().any(|a| *a != 0.0);
    let bound_gap = (s.params.t >= T_COMPLETE_MONOTONE).then(|| max_u - c * c / 4.0);
    RegionReport {
        c,
        max_u,
        argmax_u,
        min_u,
        in_excluded_region: max_u < 0.0f64.min(c - 1.0),
        nontrivial_at_unit_speed: c == 1.0 && (nonconstant || s.u.coeffs[0] != 0.0),
        bound_gap,
        violates_bound: bound_gap.is_some_and(|g| g > AMPLITUDE_BOUND_SLACK),
        dist_zero_line: max_u,
        dist_constant_line: max_u - (c - 1.0),
        dist_half_speed: max_u - 0.5 * c,
    }
}

/// Identity checks applied to every emitted state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateCheck {
    pub residual: f64,
    pub identity: f64,
    pub galilean_residual: f64,
    pub region: RegionReport,
}

impl StateCheck {
    /// Residual and identity within `tol`, Galilean image within `tol + 10⁻¹²`, region checks clean.
    pub fn passed(&self, tol: f64) -> bool {
        self.residual <= tol
            && self.identity.abs() <= tol
            && self.galilean_residual <= tol + 1e-12
            && self.region.passed()
    }
}

pub fn check_state(s: &SteadyState) -> StateCheck {
    StateCheck {
        residual: max_norm(&residual(s).coeffs),
        identity: integral_identity_residual(s),
        galilean_residual: galilean_image(s).residual_norm,
        region: region_checks(s),
    }
}

/// Both sides of the nodal identity `u'(x) = 2∫₀^π (K_p(x−y) − K_p(x+y))(c/2 − u(y))u'(y) dy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub x: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub mismatch: f64,
    /// Change of the right-hand side when the quadrature is halved.
    pub quadrature_error: f64,
    /// `u' < 0` at every sampled `x`.
    pub decreasing: bool,
}

/// Chebyshev points of the first kind on `(0, π)`.
pub fn chebyshev_points(m: usize) -> Vec<f64> {
    (0..m).map(|j| 0.5 * PI * (1.0 - ((2 * j + 1) as f64 * PI / (2 * m) as f64).cos())).collect()
}

fn nodal_rhs(s: &SteadyState, k: &PeriodicKernel, x: f64, rule: &[(f64, f64)]) -> Result<f64> {
    let g = |y: f64| (0.5 * s.c - s.u.eval(y)) * s.u.eval_derivative(y);
    let mut sum = 0.0;
    // y = x − x v² on [0, x] and y = x + (π − x)v² on [x, π] absorb |x − y|^{-1/2}
    for &(node, w) in rule {
        let v = 0.5 * (node + 1.0);
        let w = 0.5 * w;
        for (len, sgn) in [(x, -1.0), (PI - x, 1.0)] {
            if len <= 0.0 {
                continue;
            }
            let d = len * v * v;
            let y = x + sgn * d;
            let kern = k.eval(d)? - k.eval(x + y)?;
            sum += w * 2.0 * len * v * kern * g(y);
        }
    }
    Ok(2.0 * sum)
}

/// Nodal identity on `points` Chebyshev abscissae with `quad_points` nodes per side.
pub fn nodal_report(s: &SteadyState, quad_points: usize, points: usize) -> Result<NodalReport> {
    if quad_points < 2 {
        return Err(Error::Domain("need at least two quadrature points".into()));
    }
    let k = PeriodicKernel::new(&s.params, DEFAULT_PERIODIC_TERMS);
    let fine = gauss_legendre(quad_points / 2);
    let coarse = gauss_legendre((quad_points / 4).max(1));
    let x = chebyshev_points(points);
    let mut lhs = Vec::with_capacity(points);
    let mut rhs = Vec::with_capacity(points);
    let mut mismatch: f64 = 0.0;
    let mut qerr: f64 = 0.0;
    for &xi in &x {
        let l = s.u.eval_derivative(xi);
        let r = nodal_rhs(s, &k, xi, &fine)?;
        let rc = nodal_rhs(s, &k, xi, &coarse)?;
        mismatch = mismatch.max((l - r).abs());
        qerr = qerr.max((r - rc).abs());
        lhs.push(l);
        rhs.push(r);
    }
    let decreasing = lhs.iter().all(|v| *v < 0.0);
    Ok(NodalReport { x, lhs, rhs, mismatch, quadrature_error: qerr, decreasing })
}

/// Largest mismatch of the nodal identity over 16 Chebyshev abscissae, with
/// `quad_points` quadrature nodes in total.
///
/// Fails with [`Error::Accuracy`] when halving the quadrature moves the right-hand
/// side by more than `10⁻⁶ · max|u'|` (plus `10⁻¹⁴`).
pub fn nodal_residual(s: &SteadyState, quad_points: usize) -> Result<f64> {
    let rep = nodal_report(s, quad_points, 16)?;
    let scale = rep.lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let requested = 1e-6 * scale + 1e-14;
    if rep.quadrature_error > requested {
        return Err(Error::Accuracy { achieved: rep.quadrature_error, requested });
    }
    Ok(rep.mismatch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub c: f64,
    /// `‖u − (c − 1)‖` in `L²(−π, π)`.
    pub l2_to_constant: f64,
    pub sup_to_constant: f64,
    pub sup_u: f64,
    /// `max u − c/2`.
    pub max_minus_half_speed: f64,
}

pub fn norm_tracks(b: &Branch) -> Vec<NormRow> {
    b.points
        .iter()
        .map(|s| {
            let a = &s.u.coeffs;
            let d0 = a[0] - (s.c - 1.0);
            let l2 = (2.0 * PI * d0 * d0 + PI * a[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
            let mut shifted = s.u.clone();
            shifted.coeffs[0] = d0;
            let sup_to_constant = extremum(&shifted, 1.0).1.max(-extremum(&shifted, -1.0).1);
            let (_, max_u) = extremum(&s.u, 1.0);
            let (_, min_u) = extremum(&s.u, -1.0);
            NormRow {
                c: s.c,
                l2_to_constant: l2,
                sup_to_constant,
                sup_u: max_u.max(-min_u),
                max_minus_half_speed: max_u - 0.5 * s.c,
            }
        })
        .collect()
}

pub fn write_norm_tracks<W: Write>(rows: &[NormRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "c,l2_to_constant,sup_to_constant,sup_u,max_minus_half_speed")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.c, r.l2_to_constant, r.sup_to_constant, r.sup_u, r.max_minus_half_speed
        )?;
    }
    Ok(())
}
