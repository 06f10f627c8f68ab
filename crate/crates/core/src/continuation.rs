//! Newton correction, pseudo-arclength continuation in `(u, c)` and branch switching.
//!
//! Points live in the product space of cosine coefficients and wavespeed; the
//! vector `z = (a₀, …, a_N, c)` is used for predictors, secants and the arclength
//! constraint.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{expansion_at, predict_state};
use crate::error::{Error, Result};
use crate::spectral::{d_residual_dc, is_resolved, jacobian, max_norm, residual, CosineSeries, SteadyState};
use crate::symbol::{BifurcationKind, BifurcationPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_steps: usize,
    pub c_min: f64,
    pub c_max: f64,
    /// Stop once `‖u‖∞` exceeds this.
    pub amp_max: f64,
    /// Truncation is doubled when the coefficient tail exceeds `resolve_rtol · max|a_n|`.
    pub resolve_rtol: f64,
    pub n_max: usize,
    /// Bisection target on `|Δc|` when localizing a detected event.
    pub event_tol: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            ds: 0.01,
            ds_min: 1e-8,
            ds_max: 0.1,
            newton_tol: 1e-11,
            max_newton_iters: 12,
            max_steps: 5000,
            c_min: -10.0,
            c_max: 10.0,
            amp_max: 25.0,
            resolve_rtol: 1e-10,
            n_max: 1024,
            event_tol: 1e-8,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.ds, self.ds_min, self.ds_max, self.newton_tol, self.event_tol, self.amp_max];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("step sizes and tolerances must be positive".into()));
        }
        if !(self.ds_min <= self.ds && self.ds <= self.ds_max) {
            return Err(Error::Domain(format!(
                "need ds_min <= ds <= ds_max, got {} <= {} <= {}",
                self.ds_min, self.ds, self.ds_max
            )));
        }
        if self.c_min >= self.c_max || self.max_newton_iters == 0 {
            return Err(Error::Domain("empty wavespeed window or zero Newton iterations".into()));
        }
        Ok(())
    }
}

/// Extra scalar equation closing the Newton system.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `c` held at the guess value; unknowns are the coefficients only.
    FixC,
    /// `⟨z − prev, tangent⟩ = ds`.
    Arclength { prev: Vec<f64>, tangent: Vec<f64>, ds: f64 },
    /// `a_k = value`.
    Phase { k: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrected {
    pub state: SteadyState,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// `(a₀, …, a_N, c)`.
pub fn state_vector(s: &SteadyState) -> Vec<f64> {
    let mut z = s.u.coeffs.clone();
    z.push(s.c);
    z
}

/// Re-embeds a product-space vector at truncation order `n`, keeping `c` last.
pub fn embed(z: &[f64], n: usize) -> Vec<f64> {
    let (coeffs, c) = z.split_at(z.len() - 1);
    let mut out = coeffs.to_vec();
    out.resize(n + 1, 0.0);
    out.push(c[0]);
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn secant(a: &SteadyState, b: &SteadyState) -> Vec<f64> {
    let n = a.order().max(b.order());
    let za = embed(&state_vector(a), n);
    let zb = embed(&state_vector(b), n);
    normalized(zb.iter().zip(&za).map(|(x, y)| x - y).collect())
}

fn constraint_value(s: &SteadyState, c: &Constraint) -> f64 {
    match c {
        Constraint::FixC => 0.0,
        Constraint::Arclength { prev, tangent, ds } => {
            let z = state_vector(s);
            let prev = embed(prev, s.order());
            let tangent = embed(tangent, s.order());
            z.iter().zip(&prev).zip(&tangent).map(|((a, b), t)| (a - b) * t).sum::<f64>() - ds
        }
        Constraint::Phase { k, value } => s.u.coeffs[*k] - value,
    }
}

/// Solves `A x = b`, rejecting numerically singular matrices.
pub(crate) fn solve_checked(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    let diag = lu.u().diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min > 1e-14 * max) {
        return Err(Error::NearBifurcation(format!("pivot ratio {:e}", min / max)));
    }
    lu.solve(b).ok_or_else(|| Error::NearBifurcation("LU solve failed".into()))
}

/// Sign and `log|det|` of a square matrix via LU.
pub fn sign_log_det(a: &DMatrix<f64>) -> (f64, f64) {
    let lu = a.clone().lu();
    let mut sign: f64 = lu.p().determinant();
    let mut log = 0.0;
    for v in lu.u().diagonal().iter() {
        if *v == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        sign *= v.signum();
        log += v.abs().ln();
    }
    (sign, log)
}

fn bordered(s: &SteadyState, row: &[f64]) -> DMatrix<f64> {
    let n = s.order() + 1;
    let j = jacobian(s);
    let fc = d_residual_dc(s);
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&j);
    a.view_mut((0, n), (n, 1)).copy_from(&fc);
    for (col, v) in row.iter().enumerate() {
        a[(n, col)] = *v;
    }
    a
}

/// Newton iteration on `F(u, c) = 0` closed by `constraint`.
pub fn newton_correct(guess: &SteadyState, constraint: &Constraint, tol: f64, max_iters: usize) -> Result<Corrected> {
    let mut s = guess.clone();
    let mut history = Vec::new();
    let n = s.order() + 1;
    for it in 0..=max_iters {
        let f = residual(&s);
        let fnorm = max_norm(&f.coeffs);
        let g = constraint_value(&s, constraint);
        history.push(fnorm.max(g.abs()));
        s.residual_norm = fnorm;
        if fnorm <= tol && g.abs() <= tol {
            return Ok(Corrected { state: s, iterations: it, history });
        }
        let diverged = !fnorm.is_finite() || fnorm > 1e8;
        if it == max_iters || diverged {
            return Err(Error::NewtonFailure {
                iterations: it,
                last_norm: fnorm,
                history,
                last: Some(Box::new(s)),
            });
        }
        let rhs_f = DVector::from_iterator(n, f.coeffs.iter().map(|v| -v));
        match constraint {
            Constraint::FixC => {
                let delta = solve_checked(jacobian(&s), &rhs_f)?;
                for (a, d) in s.u.coeffs.iter_mut().zip(delta.iter()) {
                    *a += d;
                }
            }
            _ => {
                let row = match constraint {
                    Constraint::Arclength { tangent, .. } => embed(tangent, s.order()),
                    Constraint::Phase { k, .. } => {
                        let mut r = vec![0.0; n + 1];
                        r[*k] = 1.0;
                        r
                    }
                    Constraint::FixC => unreachable!(),
                };
                let mut rhs = rhs_f.resize_vertically(n + 1, 0.0);
                rhs[n] = -g;
                let delta = solve_checked(bordered(&s, &row), &rhs)?;
                for (a, d) in s.u.coeffs.iter_mut().zip(delta.iter()) {
                    *a += d;
                }
                s.c += delta[n];
            }
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    FoldDetected,
    BifurcationDetected,
    ToleranceFailure,
    DomainBoundary,
    LoopClosed,
}

impl EventKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EventKind::FoldDetected => "FoldDetected",
            EventKind::BifurcationDetected => "BifurcationDetected",
            EventKind::ToleranceFailure => "ToleranceFailure",
            EventKind::DomainBoundary => "DomainBoundary",
            EventKind::LoopClosed => "LoopClosed",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "FoldDetected" => EventKind::FoldDetected,
            "BifurcationDetected" => EventKind::BifurcationDetected,
            "ToleranceFailure" => EventKind::ToleranceFailure,
            "DomainBoundary" => EventKind::DomainBoundary,
            "LoopClosed" => EventKind::LoopClosed,
            _ => return None,
        })
    }
}

/// An event attached to the point at `index`; `c` is the localized wavespeed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub index: usize,
    pub kind: EventKind,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Origin {
    Bifurcation { point: BifurcationPoint },
    Start,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<SteadyState>,
    /// Arclength step that produced each point (0 for the first).
    pub step_sizes: Vec<f64>,
    /// Step proposed after each point.
    pub next_steps: Vec<f64>,
    /// Smallest eigenvalue magnitude of `D_u F` at each point.
    pub min_eigs: Vec<f64>,
    pub events: Vec<BranchEvent>,
    pub origin: Origin,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn is_closed(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::LoopClosed)
    }
}

/// Magnitudes of the `count` smallest eigenvalues of `j`, by inverse subspace iteration.
pub fn smallest_eigenvalues(j: &DMatrix<f64>, count: usize) -> Vec<f64> {
    let n = j.nrows();
    let m = count.min(n);
    let lu = j.clone().lu();
    // deterministic, generic start block
    let mut q = DMatrix::from_fn(n, m, |i, c| ((i + 1) as f64 * (c as f64 + 0.5)).sin() + if i % m == c { 1.0 } else { 0.0 });
    q = q.qr().q();
    for _ in 0..6 {
        match lu.solve(&q) {
            Some(z) if z.iter().all(|v| v.is_finite()) => q = z.qr().q(),
            _ => return vec![0.0; m],
        }
    }
    let h = q.transpose() * j * &q;
    let mut mags: Vec<f64> = h.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    mags
}

#[derive(Debug, Clone, Copy)]
struct TestFns {
    det_u: f64,
    det_aug: f64,
}

fn test_functions(s: &SteadyState, tangent: &[f64]) -> TestFns {
    let (det_u, _) = sign_log_det(&jacobian(s));
    let (det_aug, _) = sign_log_det(&bordered(s, &embed(tangent, s.order())));
    TestFns { det_u, det_aug }
}

fn sup_norm(u: &CosineSeries) -> f64 {
    let m = 4 * (u.order() + 1);
    (0..=m).map(|i| u.eval(std::f64::consts::PI * i as f64 / m as f64).abs()).fold(0.0, f64::max)
}

/// Continues from a converged `start` along `direction` (product-space vector,
/// zero-padded as needed) for at most `cfg.max_steps` steps.
pub fn continue_branch(start: &SteadyState, direction: &[f64], origin: Origin, cfg: &ContinuationConfig) -> Result<Branch> {
    cfg.validate()?;
    let start = newton_correct(start, &Constraint::FixC, cfg.newton_tol, cfg.max_newton_iters)?.state;
    let tangent = normalized(embed(direction, start.order()));
    let mut branch = Branch {
        min_eigs: vec![smallest_eigenvalues(&jacobian(&start), 6)[0]],
        points: vec![start],
        step_sizes: vec![0.0],
        next_steps: vec![cfg.ds],
        events: Vec::new(),
        origin,
    };
    march(&mut branch, Some(tangent), cfg.max_steps, cfg)?;
    Ok(branch)
}

/// Appends up to `steps` points to an existing branch with at least two points.
///
/// The continuation state is recovered from the stored points and the stored next
/// step, so resuming reproduces an uninterrupted run bit for bit.
pub fn resume_branch(branch: &mut Branch, steps: usize, cfg: &ContinuationConfig) -> Result<()> {
    cfg.validate()?;
    if branch.len() < 2 {
        return Err(Error::Precondition("resuming needs at least two points".into()));
    }
    march(branch, None, steps, cfg)
}

fn march(branch: &mut Branch, first_tangent: Option<Vec<f64>>, steps: usize, cfg: &ContinuationConfig) -> Result<()> {
    let mut first_tangent = first_tangent;
    let mut ds = *branch.next_steps.last().expect("nonempty branch");
    let tangent_into = |b: &Branch, first: &Option<Vec<f64>>| -> Vec<f64> {
        let n = b.len();
        if n >= 2 {
            secant(&b.points[n - 2], &b.points[n - 1])
        } else {
            first.clone().expect("direction for a single-point branch")
        }
    };
    let mut prev_tf = test_functions(branch.points.last().unwrap(), &tangent_into(branch, &first_tangent));
    for _ in 0..steps {
        let last = branch.points.last().unwrap().clone();
        let tangent = match first_tangent.take() {
            Some(t) if branch.len() == 1 => t,
            _ => tangent_into(branch, &None),
        };
        let z_last = state_vector(&last);
        let mut accepted = None;
        while accepted.is_none() {
            match corrector_step(&last, &z_last, &tangent, ds, cfg) {
                Ok(c) => accepted = Some(c),
                Err(_) => {
                    ds *= 0.5;
                    if ds < cfg.ds_min {
                        let i = branch.len() - 1;
                        branch.events.push(BranchEvent { index: i, kind: EventKind::ToleranceFailure, c: last.c });
                        *branch.next_steps.last_mut().unwrap() = ds;
                        return Ok(());
                    }
                }
            }
        }
        let corr = accepted.unwrap();
        let next_ds = if corr.iterations <= 3 { (1.3 * ds).min(cfg.ds_max) } else { ds };
        let state = corr.state;
        let idx = branch.len();
        let tf = test_functions(&state, &secant(&last, &state));
        if tf.det_u != prev_tf.det_u {
            let kind = if tf.det_aug != prev_tf.det_aug { EventKind::BifurcationDetected } else { EventKind::FoldDetected };
            let c = locate_event(&last, &tangent, ds, prev_tf.det_u, &state, cfg);
            branch.events.push(BranchEvent { index: idx, kind, c });
        }
        prev_tf = tf;
        branch.min_eigs.push(smallest_eigenvalues(&jacobian(&state), 6)[0]);
        branch.step_sizes.push(ds);
        branch.next_steps.push(next_ds);
        let out_of_window = state.c < cfg.c_min || state.c > cfg.c_max || sup_norm(&state.u) > cfg.amp_max;
        let c_now = state.c;
        branch.points.push(state);
        if out_of_window {
            branch.events.push(BranchEvent { index: idx, kind: EventKind::DomainBoundary, c: c_now });
            return Ok(());
        }
        if idx >= 10 {
            let z0 = state_vector(&branch.points[0]);
            let zi = state_vector(&branch.points[idx]);
            let n = branch.points[0].order().max(branch.points[idx].order());
            let (z0, zi) = (embed(&z0, n), embed(&zi, n));
            let dist = z0.iter().zip(&zi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist < ds {
                branch.events.push(BranchEvent { index: idx, kind: EventKind::LoopClosed, c: c_now });
                return Ok(());
            }
        }
        ds = next_ds;
    }
    Ok(())
}

// predictor plus arclength-constrained Newton, doubling the truncation if the
// corrected state is under-resolved
fn corrector_step(last: &SteadyState, z_last: &[f64], tangent: &[f64], ds: f64, cfg: &ContinuationConfig) -> Result<Corrected> {
    let mut n = last.order();
    loop {
        let zl = embed(z_last, n);
        let t = embed(tangent, n);
        let pred: Vec<f64> = zl.iter().zip(&t).map(|(a, b)| a + ds * b).collect();
        let guess = SteadyState {
            u: CosineSeries { coeffs: pred[..=n].to_vec() },
            c: pred[n + 1],
            params: last.params,
            residual_norm: f64::NAN,
        };
        let constraint = Constraint::Arclength { prev: zl, tangent: t, ds };
        let corr = newton_correct(&guess, &constraint, cfg.newton_tol, cfg.max_newton_iters)?;
        if is_resolved(&corr.state.u, cfg.resolve_rtol) || 2 * n > cfg.n_max {
            return Ok(corr);
        }
        n *= 2;
    }
}

// bisection in arclength between `last` (sign `sign_lo`) and the accepted point
fn locate_event(last: &SteadyState, tangent: &[f64], ds: f64, sign_lo: f64, accepted: &SteadyState, cfg: &ContinuationConfig) -> f64 {
    let z_last = state_vector(last);
    let (mut lo, mut hi) = (0.0, ds);
    let (mut c_lo, mut c_hi) = (last.c, accepted.c);
    for _ in 0..80 {
        if (c_hi - c_lo).abs() <= cfg.event_tol || hi - lo <= 1e-12 * ds {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let n = accepted.order();
        let zl = embed(&z_last, n);
        let t = embed(tangent, n);
        let pred: Vec<f64> = zl.iter().zip(&t).map(|(a, b)| a + mid * b).collect();
        let guess = SteadyState {
            u: CosineSeries { coeffs: pred[..=n].to_vec() },
            c: pred[n + 1],
            params: last.params,
            residual_norm: f64::NAN,
        };
        let constraint = Constraint::Arclength { prev: zl, tangent: t, ds: mid };
        let Ok(corr) = newton_correct(&guess, &constraint, cfg.newton_tol, cfg.max_newton_iters) else {
            break;
        };
        let (sign, _) = sign_log_det(&jacobian(&corr.state));
        if sign == sign_lo {
            lo = mid;
            c_lo = corr.state.c;
        } else {
            hi = mid;
            c_hi = corr.state.c;
        }
    }
    0.5 * (c_lo + c_hi)
}

/// Tangent of the amplitude-parameterized branch through `s`: solves
/// `[D_uF  F_c; e_kᵀ 0] ż = e_{N+1}`.
pub fn phase_tangent(s: &SteadyState, k: usize) -> Result<Vec<f64>> {
    let n = s.order() + 1;
    let mut row = vec![0.0; n + 1];
    row[k] = 1.0;
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let t = solve_checked(bordered(s, &row), &rhs)?;
    Ok(normalized(t.iter().copied().collect()))
}

/// Leaves a simple bifurcation point on the side `sign(side)` with `⟨u, cos(k·)⟩ = side·t0`.
///
/// The second-order expansion supplies the predictor; when it is degenerate the
/// first-order predictor `t0 cos(kx)` at `c₀` is used instead.
pub fn switch_at_simple(bp: &BifurcationPoint, t0: f64, side: f64, n: usize, tol: f64, max_iters: usize) -> Result<Corrected> {
    let k = match bp.kind {
        BifurcationKind::Simple { k } => k,
        BifurcationKind::Transcritical => {
            return Err(Error::PredictorUnavailable(
                "the transcritical point c0 = 1 has no pitchfork expansion; use the two-dimensional solver".into(),
            ))
        }
        BifurcationKind::Double { k1, k2 } => {
            return Err(Error::Precondition(format!("({k1}, {k2}) is a double point; use the sheet solver")))
        }
    };
    if side == 0.0 || !side.is_finite() {
        return Err(Error::Domain("side must be +1 or -1".into()));
    }
    let amp = side.signum() * t0;
    let ku = k as usize;
    let n = n.max(2 * ku + 1);
    let guess = match expansion_at(&bp.params, k) {
        Ok(exp) => predict_state(&exp, amp, n),
        Err(Error::DegenerateExpansion(_)) => SteadyState::new(CosineSeries::mode(n, ku, amp), bp.c0, bp.params),
        Err(e) => return Err(e),
    };
    newton_correct(&guess, &Constraint::Phase { k: ku, value: amp }, tol, max_iters)
}

/// Outward tangent at a switched state: increasing `|⟨u, cos(k·)⟩|`.
pub fn outward_tangent(s: &SteadyState, k: usize) -> Result<Vec<f64>> {
    let t = phase_tangent(s, k)?;
    let sign = if s.u.coeffs[k] >= 0.0 { 1.0 } else { -1.0 };
    let sign = if t[k] * sign >= 0.0 { 1.0 } else { -1.0 };
    Ok(t.into_iter().map(|v| sign * v).collect())
}
