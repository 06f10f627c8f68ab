//! Second-order expansion of the branch bifurcating from a simple point `c₀ = 1/l(κk)`:
//!
//! ```text
//! u(t) = t cos(kx) + ½t² v̈(0) + O(t³),   c(t) = c₀ + ½t² c̈(0) + O(t⁴),
//! v̈(0) = 1/(c₀ − 1) + l₂ cos(2kx)/(c₀ l₂ − 1),   c̈(0) = 2/(c₀ − 1) + l₂/(c₀ l₂ − 1),
//! ```
//!
//! with `l₂ = l_T(2κk)`. The first-order speed correction vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{CosineSeries, SteadyState};
use crate::symbol::SymbolParams;

/// Denominators closer than this to zero make the expansion degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalExpansion {
    pub k: u32,
    pub c0: f64,
    pub c2dot: f64,
    pub v2dot_const: f64,
    pub v2dot_cos2k: f64,
    pub params: SymbolParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Supercritical,
    Subcritical,
}

/// Expansion coefficients at the simple point of wavenumber `k ≥ 1`.
pub fn expansion_at(p: &SymbolParams, k: u32) -> Result<LocalExpansion> {
    if k == 0 {
        return Err(Error::Domain("wavenumber must be positive".into()));
    }
    let c0 = 1.0 / p.l_mode(k as usize);
    let l2 = p.l_mode(2 * k as usize);
    let d1 = c0 - 1.0;
    let d2 = c0 * l2 - 1.0;
    if d1.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateExpansion(format!("c0 - 1 = {d1:e} vanishes (transcritical resonance)")));
    }
    if d2.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateExpansion(format!(
            "c0 l(2k) - 1 = {d2:e} vanishes (second harmonic resonance)"
        )));
    }
    let v2dot_const = 1.0 / d1;
    let v2dot_cos2k = l2 / d2;
    Ok(LocalExpansion { k, c0, c2dot: 2.0 * v2dot_const + v2dot_cos2k, v2dot_const, v2dot_cos2k, params: *p })
}

/// Second-order predictor at amplitude `t`, truncated at order `n ≥ 2k`.
pub fn predict_state(exp: &LocalExpansion, t: f64, n: usize) -> SteadyState {
    let k = exp.k as usize;
    let mut u = CosineSeries::zeros(n.max(2 * k));
    u.coeffs[k] = t;
    u.coeffs[0] = 0.5 * t * t * exp.v2dot_const;
    u.coeffs[2 * k] += 0.5 * t * t * exp.v2dot_cos2k;
    SteadyState::new(u, exp.c0 + 0.5 * t * t * exp.c2dot, exp.params)
}

pub fn subcritical_supercritical(exp: &LocalExpansion) -> Result<Criticality> {
    if exp.c2dot == 0.0 {
        return Err(Error::DegenerateExpansion("c2dot = 0 needs fourth-order terms".into()));
    }
    Ok(if exp.c2dot > 0.0 { Criticality::Supercritical } else { Criticality::Subcritical })
}

/// Leading large-wavenumber behaviour `−(√2 − 1)(T ξ)^{−1/2}` of `c̈(0)` at `ξ = κk`.
pub fn large_wavenumber_asymptote(t: f64, xi: f64) -> f64 {
    -(2f64.sqrt() - 1.0) / (t * xi).sqrt()
}

/// Leading small-wavenumber behaviour `10/((3T − 1)ξ²)` of `c̈(0)` at `ξ = κk`.
pub fn small_wavenumber_asymptote(t: f64, xi: f64) -> f64 {
    10.0 / ((3.0 * t - 1.0) * xi * xi)
}

/// First wavenumber `k ≤ k_max` at which `c̈(0)` is negative, if it changes sign
/// exactly once on `1..=k_max`.
pub fn switching_wavenumber(p: &SymbolParams, k_max: u32) -> Result<Option<u32>> {
    let signs: Vec<bool> =
        (1..=k_max).map(|k| expansion_at(p, k).map(|e| e.c2dot > 0.0)).collect::<Result<Vec<_>>>()?;
    let changes: Vec<usize> = signs.windows(2).enumerate().filter(|(_, w)| w[0] != w[1]).map(|(i, _)| i).collect();
    match changes.as_slice() {
        [] => Ok(None),
        [i] => Ok(Some(*i as u32 + 2)),
        _ => Err(Error::NotFound(format!("c2dot changes sign {} times below k = {k_max}", changes.len()))),
    }
}
