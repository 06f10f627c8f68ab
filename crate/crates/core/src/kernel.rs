//! The convolution kernel `K_T` of `L_T` on the line, its periodization `K_p`,
//! and finite-difference probes of positivity, complete monotonicity and decay.
//!
//! On the line the oscillatory Fourier integral is avoided altogether. Deforming
//! the contour onto the imaginary axis turns it into a Laplace transform,
//!
//! ```text
//! K_T(x) = (1/π) Σ_I ∫_I sgn(R'(η)) √|R(η)| e^{−|x|η} dη,   R(η) = η cos η / ((1 − Tη²) sin η),
//! ```
//!
//! summed over the intervals `I` where `R < 0`. Every integrand is positive and
//! exponentially damped, so tiny kernel values at large `x` keep full relative
//! accuracy. Interval endpoints carry inverse square-root singularities, removed by
//! the substitution `η = a + (b − a) sin²θ`. For small `|x|` the infinitely many
//! far intervals are summed with the Euler–Maclaurin formula using incomplete
//! gamma functions.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{cos_series_half, unit_rule, upper_gamma_half_down};
use crate::symbol::{l_unscaled, SymbolParams, T_COMPLETE_MONOTONE};

/// Relative accuracy of a single kernel evaluation, used to scale probe tolerances.
pub const KERNEL_QUAD_RTOL: f64 = 1e-13;

/// Default length of the directly summed remainder in [`kernel_periodic`].
pub const DEFAULT_PERIODIC_TERMS: usize = 512;

// number of whole Laplace cells summed exactly before the asymptotic tail
const EXACT_CELLS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    WholeLine,
    Periodic,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::WholeLine => f.write_str("whole-line"),
            KernelKind::Periodic => f.write_str("periodic"),
        }
    }
}

/// Sampled kernel values; the `|x|^{−1/2}` singularity coefficient is kept separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub params: SymbolParams,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub singular_coeff: f64,
    pub kind: KernelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub order: usize,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub t: f64,
    pub order_checked: usize,
    pub violations: Vec<Violation>,
    pub min_value: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Lowest derivative order at which a violation was found.
    pub fn first_violation_order(&self) -> Option<usize> {
        self.violations.iter().map(|v| v.order).min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Fitted exponent `δ̂` of `|K_T(x)| ≈ C e^{−δ̂ x}`.
    pub delta_hat: f64,
    /// Width `δ*` of the strip of analyticity of the symbol.
    pub delta_star: f64,
}

/// `δ* = min{1/√T, π/2}`, except `δ* = π` at `T = 4/π²` where the first pole cancels.
pub fn decay_strip(t: f64) -> f64 {
    if (t - T_COMPLETE_MONOTONE).abs() <= 1e-12 * T_COMPLETE_MONOTONE {
        PI
    } else {
        (1.0 / t.sqrt()).min(0.5 * PI)
    }
}

/// Coefficient `c` of the leading `c |x|^{−1/2}` behaviour at the origin.
pub fn singular_coefficient(p: &SymbolParams, kind: KernelKind) -> f64 {
    match kind {
        KernelKind::WholeLine => 1.0 / (2.0 * PI * p.t).sqrt(),
        KernelKind::Periodic => 1.0 / (2.0 * PI * p.t * p.kappa).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bp {
    /// `nπ/2`
    Half(u64),
    /// `1/√T`
    Pole,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    ka: Bp,
    kb: Bp,
}

// −R(η) for η = a + d = b − e inside a cell; vanishing factors are computed from the
// distance to the endpoint that carries them, so nodes near an endpoint keep full accuracy
fn neg_r(t: f64, sqrt_t: f64, cell: &Cell, d: f64, e: f64) -> f64 {
    let eta = cell.a + d;
    let near = |target: Bp| -> Option<f64> {
        if cell.ka == target {
            Some(d)
        } else if cell.kb == target {
            Some(-e)
        } else {
            None
        }
    };
    let m = (eta / PI).round();
    let sin = match near(Bp::Half(2 * m as u64)) {
        Some(r) => if (m as u64) % 2 == 0 { r.sin() } else { -r.sin() },
        None => eta.sin(),
    };
    let j = ((eta - 0.5 * PI) / PI).round().max(0.0);
    let cos = match near(Bp::Half(2 * j as u64 + 1)) {
        // cos(π/2 + jπ + r) = −(−1)^j sin r
        Some(r) => if (j as u64) % 2 == 0 { -r.sin() } else { r.sin() },
        None => eta.cos(),
    };
    let den = match near(Bp::Pole) {
        // 1 − T(1/√T + r)² = −√T r (2 + √T r)
        Some(r) => -sqrt_t * r * (2.0 + sqrt_t * r),
        None => 1.0 - t * eta * eta,
    };
    -(eta * cos / (den * sin))
}

fn cells_up_to(t: f64, eta_end: f64) -> Result<Vec<Cell>> {
    let pole = 1.0 / t.sqrt();
    let n_max = (eta_end / (0.5 * PI)).ceil() as u64 + 1;
    let mut bps: Vec<(f64, Bp)> = (1..=n_max).map(|n| (0.5 * PI * n as f64, Bp::Half(n))).collect();
    let merge_tol = 1e-12 * (1.0 + pole);
    match bps.iter().find(|(v, _)| (v - pole).abs() <= merge_tol) {
        Some(&(_, Bp::Half(n))) if n % 2 == 0 => {
            return Err(Error::Domain(format!(
                "T = 1/({}π)² puts the pole 1/√T on a zero of sin; Laplace representation degenerates",
                n / 2
            )))
        }
        // coincides with a zero of cos: removable, the breakpoint stays a plain half-multiple
        Some(_) => {}
        None => bps.push((pole, Bp::Pole)),
    }
    bps.sort_by(|x, y| x.0.total_cmp(&y.0));
    let sqrt_t = t.sqrt();
    let mut cells = Vec::new();
    let mut prev = (0.0, Bp::Half(0));
    for &(v, k) in &bps {
        let cell = Cell { a: prev.0, b: v, ka: prev.1, kb: k };
        prev = (v, k);
        if cell.a == 0.0 {
            // R(0) = 1 > 0 and R stays positive up to the first breakpoint
            continue;
        }
        let w = cell.b - cell.a;
        if neg_r(t, sqrt_t, &cell, 0.5 * w, 0.5 * w) > 0.0 {
            cells.push(cell);
        }
    }
    Ok(cells)
}

// ∫_cell sgn(R') √(−R) e^{−xη} dη with the endpoint-regularizing sin² map
fn cell_integral(t: f64, sqrt_t: f64, x: f64, cell: &Cell) -> f64 {
    let w = cell.b - cell.a;
    // R runs from −∞ at its pole end to 0 at its zero end
    let near_a = neg_r(t, sqrt_t, cell, 1e-3 * w, 0.999 * w);
    let near_b = neg_r(t, sqrt_t, cell, 0.999 * w, 1e-3 * w);
    let sign = if near_a > near_b { 1.0 } else { -1.0 };
    let mut sum = 0.0;
    for &(u, wt) in unit_rule(24) {
        let th = 0.5 * PI * u;
        let (s, c) = th.sin_cos();
        let d = w * s * s;
        let e = w * c * c;
        let jac = 2.0 * w * s * c * 0.5 * PI * wt;
        let v = neg_r(t, sqrt_t, cell, d, e).max(0.0);
        sum += v.sqrt() * (-x * (cell.a + d)).exp() * jac;
    }
    sign * sum
}

// F(ν) = ∫_0^{π/2} g(νπ + s) e^{−x(νπ+s)} tan^{−1/2}(s) ds with g(η) = √(η / (Tη² − 1))
fn far_cell(t: f64, x: f64, nu: f64) -> f64 {
    let mut sum = 0.0;
    for &(u, wt) in unit_rule(24) {
        let th = 0.5 * PI * u;
        let (sn, cs) = th.sin_cos();
        let s = 0.5 * PI * sn * sn;
        let jac = 0.5 * PI * 2.0 * sn * cs * 0.5 * PI * wt;
        let eta = nu * PI + s;
        let g = (eta / (t * eta * eta - 1.0)).sqrt();
        sum += g * (-x * eta).exp() * s.tan().powf(-0.5) * jac;
    }
    sum
}

// ∫_a^∞ g(η) e^{−xη} dη from the large-η expansion of g, exact in incomplete gammas
fn far_integral(t: f64, x: f64, a: f64) -> f64 {
    let z = x * a;
    let g = upper_gamma_half_down(4, z);
    let i_half = x.powf(-0.5) * g[0];
    let i_5 = x.powf(1.5) * g[2];
    let i_9 = x.powf(3.5) * g[4];
    (i_half + i_5 / (2.0 * t) + 3.0 * i_9 / (8.0 * t * t)) / t.sqrt()
}

// Σ_{ν ≥ n0} F(ν) by Euler–Maclaurin
fn far_tail(t: f64, x: f64, n0: f64) -> f64 {
    let mut integral = 0.0;
    for &(u, wt) in unit_rule(32) {
        let th = 0.5 * PI * u;
        let (sn, cs) = th.sin_cos();
        let s = 0.5 * PI * sn * sn;
        let jac = 0.5 * PI * 2.0 * sn * cs * 0.5 * PI * wt;
        integral += s.tan().powf(-0.5) * far_integral(t, x, n0 * PI + s) * jac;
    }
    integral /= PI;
    let f = |k: f64| far_cell(t, x, n0 + k);
    let (fm2, fm1, f0, fp1, fp2) = (f(-2.0), f(-1.0), f(0.0), f(1.0), f(2.0));
    let d1 = 0.5 * (fp1 - fm1);
    let d3 = 0.5 * (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2);
    integral + 0.5 * f0 - d1 / 12.0 + d3 / 720.0
}

/// Whole-line kernel `K_T(x)` of the unscaled symbol; `p.kappa` is ignored.
pub fn kernel_whole_line(p: &SymbolParams, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite x = {x}")));
    }
    if x == 0.0 {
        return Err(Error::Singularity(0.0));
    }
    let x = x.abs();
    let t = p.t;
    let sqrt_t = t.sqrt();
    let n0 = EXACT_CELLS.max((4.0 / (PI * sqrt_t)).ceil() as u64 + 2);
    let cells = cells_up_to(t, n0 as f64 * PI)?;
    let mut total = 0.0;
    let mut truncated = false;
    for cell in &cells {
        if cell.b > n0 as f64 * PI + 1e-9 {
            break;
        }
        total += cell_integral(t, sqrt_t, x, cell);
        let rest = (-x * cell.b).exp() / (x * (t * cell.b).sqrt());
        if total != 0.0 && rest < 1e-17 * total.abs() {
            truncated = true;
            break;
        }
    }
    if !truncated && (-x * n0 as f64 * PI).exp() > 1e-18 * total.abs() {
        total += far_tail(t, x, n0 as f64);
    }
    let k = total / PI;
    if !k.is_finite() {
        return Err(Error::Accuracy { achieved: f64::INFINITY, requested: KERNEL_QUAD_RTOL });
    }
    Ok(k)
}

/// Periodic kernel `K_p(x) = (1/2π) Σ_{n∈ℤ} l_T(κn) e^{inx}` of the scaled operator on `[−π, π]`.
///
/// The first three terms of the large-`ξ` expansion of `l_T` are summed in closed
/// form; the absolutely convergent remainder is summed directly over
/// `max(n_terms, 8 n_s)` modes, where `n_s` is where the expansion becomes accurate.
pub fn kernel_periodic(p: &SymbolParams, x: f64, n_terms: usize) -> Result<f64> {
    PeriodicKernel::new(p, n_terms).eval(x)
}

/// [`kernel_periodic`] with the `x`-independent remainder coefficients precomputed,
/// for repeated evaluation at fixed parameters.
#[derive(Debug, Clone)]
pub struct PeriodicKernel {
    c1: f64,
    c5: f64,
    c9: f64,
    remainder: Vec<f64>,
}

impl PeriodicKernel {
    pub fn new(p: &SymbolParams, n_terms: usize) -> Self {
        let (t, kap) = (p.t, p.kappa);
        let n_s = (20.0 / kap).max(3.0 / (kap * t.sqrt())).ceil() as usize;
        let n = n_terms.max(8 * n_s);
        let c1 = (t * kap).powf(-0.5);
        let c5 = -0.5 * t.powf(-1.5) * kap.powf(-2.5);
        let c9 = 0.375 * t.powf(-2.5) * kap.powf(-4.5);
        let remainder = (1..=n)
            .map(|k| {
                let kf = k as f64;
                l_unscaled(t, kap * kf) - (c1 * kf.powf(-0.5) + c5 * kf.powf(-2.5) + c9 * kf.powf(-4.5))
            })
            .collect();
        Self { c1, c5, c9, remainder }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite x = {x}")));
        }
        let mut r = x.abs() % (2.0 * PI);
        if r > PI {
            r = 2.0 * PI - r;
        }
        if r == 0.0 {
            return Err(Error::Singularity(x));
        }
        let mut rem = 0.0;
        for (k, d) in self.remainder.iter().enumerate().rev() {
            rem += d * ((k + 1) as f64 * r).cos();
        }
        let closed =
            self.c1 * cos_series_half(0, r) + self.c5 * cos_series_half(2, r) + self.c9 * cos_series_half(4, r);
        Ok((1.0 + 2.0 * (closed + rem)) / (2.0 * PI))
    }
}

/// Periodic kernel from its definition as a wrapped sum of scaled whole-line kernels,
/// `Σ_{|j| ≤ images} K_T((x + 2jπ)/κ)/κ`.
pub fn kernel_periodic_wrapped(p: &SymbolParams, x: f64, images: usize) -> Result<f64> {
    let r = x.rem_euclid(2.0 * PI);
    let r = if r > PI { r - 2.0 * PI } else { r };
    let mut sum = 0.0;
    for j in -(images as i64)..=(images as i64) {
        sum += kernel_whole_line(p, (r + 2.0 * PI * j as f64) / p.kappa)?;
    }
    Ok(sum / p.kappa)
}

/// Samples the kernel on `grid`, which must be strictly increasing and avoid the origin.
pub fn tabulate(p: &SymbolParams, kind: KernelKind, grid: &[f64]) -> Result<KernelTable> {
    validate_grid(grid)?;
    let values = match kind {
        KernelKind::WholeLine => grid.iter().map(|&x| kernel_whole_line(p, x)).collect::<Result<Vec<_>>>()?,
        KernelKind::Periodic => {
            let k = PeriodicKernel::new(p, DEFAULT_PERIODIC_TERMS);
            grid.iter().map(|&x| k.eval(x)).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(KernelTable { params: *p, grid: grid.to_vec(), values, singular_coeff: singular_coefficient(p, kind), kind })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if grid.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::Domain("grid must be finite and exclude 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    Ok(())
}

impl KernelTable {
    /// CSV with a `# T=… kappa=… kind=… singular_coeff=…` header and `x,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# T={:.16e} kappa={:.16e} kind={} singular_coeff={:.16e}",
            self.params.t, self.params.kappa, self.kind, self.singular_coeff
        )?;
        writeln!(w, "x,value")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Order-0 probe: negative kernel samples.
pub fn probe_positivity(p: &SymbolParams, kind: KernelKind, grid: &[f64]) -> Result<MonotonicityReport> {
    probe_complete_monotonicity(p, kind, grid, 0)
}

/// Checks `(−1)^m Δ^m K / h^m ≥ −tol` for `m = 0..=max_order` on a uniform grid.
///
/// The tolerance is `1e−8 + 1e3 · KERNEL_QUAD_RTOL · |K|_loc · h^{−m}`, the noise
/// floor of a divided difference of order `m`.
pub fn probe_complete_monotonicity(
    p: &SymbolParams,
    kind: KernelKind,
    grid: &[f64],
    max_order: usize,
) -> Result<MonotonicityReport> {
    if max_order > 3 {
        return Err(Error::Domain(format!("probe order {max_order} above 3")));
    }
    let table = tabulate(p, kind, grid)?;
    probe_table(&table, max_order)
}

/// Runs the complete-monotonicity probe on an existing table.
pub fn probe_table(table: &KernelTable, max_order: usize) -> Result<MonotonicityReport> {
    let grid = &table.grid;
    let vals = &table.values;
    if max_order > 0 {
        if grid.len() < 2 * max_order + 2 {
            return Err(Error::Domain("grid too short for the requested order".into()));
        }
        let h = grid[1] - grid[0];
        let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1e-300) * grid.len() as f64);
        if !uniform {
            return Err(Error::Domain("complete-monotonicity probe needs a uniform grid".into()));
        }
    }
    let h = if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 };
    let mut violations = Vec::new();
    let mut diff = vals.clone();
    for m in 0..=max_order {
        if m > 0 {
            diff = diff.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for (i, &dv) in diff.iter().enumerate() {
            let loc = vals[i..=i + m].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let tol = 1e-8 + 1e3 * KERNEL_QUAD_RTOL * loc * h.powi(-(m as i32));
            if sign * dv < -tol {
                violations.push(Violation { order: m, x: grid[i], value: sign * dv });
            }
        }
    }
    let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MonotonicityReport { t: table.params.t, order_checked: max_order, violations, min_value })
}

/// Least-squares slope of `log|K_T|` over 101 uniform points in `x_range ⊂ [2, 12]`.
pub fn estimate_decay(p: &SymbolParams, x_range: (f64, f64)) -> Result<DecayEstimate> {
    let (a, b) = x_range;
    if !(a >= 2.0 && b <= 12.0 && b > a) {
        return Err(Error::Domain(format!("decay fit range must lie in [2, 12], got [{a}, {b}]")));
    }
    let pts: Vec<(f64, f64)> = (0..=100)
        .map(|i| a + (b - a) * i as f64 / 100.0)
        .map(|x| kernel_whole_line(p, x).map(|k| (x, k.abs())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        // underflow trim
        .filter(|&(_, k)| k > 1e-300)
        .map(|(x, k)| (x, k.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Accuracy { achieved: 0.0, requested: 1e-300 });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    Ok(DecayEstimate { delta_hat: -sxy / sxx, delta_star: decay_strip(p.t) })
}

/// Richardson extrapolation of `√x K_T(x)` to `x → 0⁺` from two sample points,
/// eliminating the `O(√x)` correction.
pub fn singular_limit(p: &SymbolParams, x_coarse: f64, x_fine: f64) -> Result<f64> {
    let f1 = x_coarse.sqrt() * kernel_whole_line(p, x_coarse)?;
    let f2 = x_fine.sqrt() * kernel_whole_line(p, x_fine)?;
    let (s1, s2) = (x_coarse.sqrt(), x_fine.sqrt());
    Ok((s1 * f2 - s2 * f1) / (s1 - s2))
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
