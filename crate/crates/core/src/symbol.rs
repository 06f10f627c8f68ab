//! Dispersion symbol `m_T`, its inverse `l_T`, and the algebra of bifurcation points.
//!
//! Every operator in the crate is a Fourier multiplier built from
//! `l_T(ξ) = (ξ / ((1 + Tξ²) tanh ξ))^{1/2}`, evaluated at the scaled
//! wavenumber `κξ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface tension `T` and wavelength scale `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolParams {
    pub t: f64,
    pub kappa: f64,
}

impl SymbolParams {
    pub fn new(t: f64, kappa: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("surface tension must be > 0, got {t}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { t, kappa })
    }

    /// `l_T(κ n)` for integer mode `n`, the diagonal of `L`.
    #[inline]
    pub fn l_mode(&self, n: usize) -> f64 {
        l_unscaled(self.t, self.kappa * n as f64)
    }

    /// `∂/∂κ l_T(κ n) = n l_T'(κ n)`.
    #[inline]
    pub fn dl_dkappa_mode(&self, n: usize) -> f64 {
        let nf = n as f64;
        nf * dl_unscaled(self.t, self.kappa * nf)
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { t: self.t, kappa }
    }
}

/// Weak surface tension threshold: for `T < 1/3` the symbol `l_T` has an interior maximum.
pub const BOND_CRITICAL: f64 = 1.0 / 3.0;

/// Threshold `4/π²` above which the kernel is completely monotone.
pub const T_COMPLETE_MONOTONE: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Relative tolerance on `|c_k − c_k'|` for flagging a double point.
pub const DOUBLE_POINT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BifurcationKind {
    Simple { k: u32 },
    /// Two-dimensional kernel `span{cos(k1 x), cos(k2 x)}`; `k2 = 0` encodes the
    /// transcritical-resonant case at `c0 = 1`.
    Double { k1: u32, k2: u32 },
    Transcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    pub c0: f64,
    /// `T` and the wavelength scale `κ0` at which the kernel is nontrivial.
    pub params: SymbolParams,
}

impl BifurcationPoint {
    pub fn is_resonant(&self) -> bool {
        match self.kind {
            BifurcationKind::Double { k1, k2 } => k1 != 0 && k2 % k1 == 0,
            _ => false,
        }
    }
}

fn check_finite(xi: f64) -> Result<()> {
    if xi.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite wavenumber {xi}")))
    }
}

/// `tanh(ξ)/ξ`, even, with the removable singularity at 0 handled by its Taylor series.
pub(crate) fn tanh_over_x(xi: f64) -> f64 {
    let a = xi.abs();
    if a < 1e-4 {
        let z = a * a;
        1.0 - z / 3.0 + 2.0 * z * z / 15.0 - 17.0 * z * z * z / 315.0
    } else if a > 20.0 {
        // tanh via exp(−2|ξ|); exp underflows gracefully to 0 for huge |ξ|
        let e = (-2.0 * a).exp();
        (1.0 - e) / (1.0 + e) / a
    } else {
        a.tanh() / a
    }
}

/// `l_T(ξ)` without the κ scaling.
#[inline]
pub(crate) fn l_unscaled(t: f64, xi: f64) -> f64 {
    rho_unscaled(t, xi).sqrt()
}

#[inline]
pub(crate) fn rho_unscaled(t: f64, xi: f64) -> f64 {
    1.0 / ((1.0 + t * xi * xi) * tanh_over_x(xi))
}

/// `1/ξ − 2/sinh(2ξ)` for `ξ > 0`, i.e. `1/ξ − sech²ξ/tanh ξ`, cancellation-free near 0.
fn inv_minus_csch2(a: f64) -> f64 {
    if a < 1e-2 {
        let a2 = a * a;
        a * (2.0 / 3.0 - a2 * (14.0 / 45.0 - a2 * 124.0 / 945.0))
    } else if a > 20.0 {
        let e = (-2.0 * a).exp();
        1.0 / a - 4.0 * e / (1.0 - e * e)
    } else {
        1.0 / a - 2.0 / (2.0 * a).sinh()
    }
}

/// `l_T'(ξ)` (derivative of the unscaled symbol); odd, zero at the origin.
pub(crate) fn dl_unscaled(t: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let a = xi.abs();
    let log_deriv = -0.5 * (2.0 * t * a / (1.0 + t * a * a) - inv_minus_csch2(a));
    xi.signum() * l_unscaled(t, a) * log_deriv
}

/// `m_T(κ ξ) = ((1 + T(κξ)²) tanh(κξ)/(κξ))^{1/2}`.
pub fn eval_m(p: &SymbolParams, xi: f64) -> Result<f64> {
    check_finite(xi)?;
    let s = p.kappa * xi;
    Ok(((1.0 + p.t * s * s) * tanh_over_x(s)).sqrt())
}

/// `l_T(κ ξ) = 1 / m_T(κ ξ)`.
pub fn eval_l(p: &SymbolParams, xi: f64) -> Result<f64> {
    check_finite(xi)?;
    Ok(l_unscaled(p.t, p.kappa * xi))
}

/// Derivative of `ξ ↦ l_T(κ ξ)`. Errors at `ξ = 0`; see [`eval_l_prime_or_zero`].
pub fn eval_l_prime(p: &SymbolParams, xi: f64) -> Result<f64> {
    check_finite(xi)?;
    if xi == 0.0 {
        return Err(Error::Domain("l' requested at xi = 0".into()));
    }
    Ok(p.kappa * dl_unscaled(p.t, p.kappa * xi))
}

/// Same as [`eval_l_prime`] but returns the odd-function limit 0 at the origin.
pub fn eval_l_prime_or_zero(p: &SymbolParams, xi: f64) -> Result<f64> {
    check_finite(xi)?;
    Ok(p.kappa * dl_unscaled(p.t, p.kappa * xi))
}

/// `ρ_T(κξ) = κξ / ((1 + T(κξ)²) tanh(κξ)) = l_T(κξ)²`.
pub fn eval_rho(p: &SymbolParams, xi: f64) -> Result<f64> {
    check_finite(xi)?;
    Ok(rho_unscaled(p.t, p.kappa * xi))
}

/// Surface tension at which `l_T(n) = l_T(k)`:
/// `T*(n;k) = (n tanh k − k tanh n) / (kn (n tanh n − k tanh k))`.
///
/// Written as `(tanh(k)/k − tanh(n)/n) / (n tanh n − k tanh k)`, which is the
/// continuous extension to `n = 0` or `k = 0`.
#[allow(non_snake_case)]
pub fn critical_T(n: f64, k: f64) -> Result<f64> {
    if !(n.is_finite() && k.is_finite()) || n < 0.0 || k < 0.0 {
        return Err(Error::Domain(format!("wavenumbers must be finite and >= 0, got ({n}, {k})")));
    }
    if n == k {
        return Err(Error::DegeneratePair(n));
    }
    let num = tanh_over_x(k) - tanh_over_x(n);
    let den = n * n.tanh() - k * k.tanh();
    Ok(num / den)
}

/// Simple bifurcation speeds `c_k = 1/l_T(κk)` for `1 ≤ k ≤ k_max`.
///
/// Entries whose speed coincides with another `k' ≤ k_max` (relative
/// tolerance [`DOUBLE_POINT_RTOL`]) are reported as `Double { k1, k2 }` with
/// `k1 < k2`, once per coinciding pair.
pub fn simple_bifurcation_points(p: &SymbolParams, k_max: u32) -> Vec<BifurcationPoint> {
    let speeds: Vec<f64> = (1..=k_max).map(|k| 1.0 / p.l_mode(k as usize)).collect();
    let mut out = Vec::with_capacity(speeds.len());
    for (i, &c) in speeds.iter().enumerate() {
        let k = i as u32 + 1;
        let partner = speeds
            .iter()
            .enumerate()
            .find(|&(j, &cj)| j != i && (cj - c).abs() < DOUBLE_POINT_RTOL * c)
            .map(|(j, _)| j as u32 + 1);
        let kind = match partner {
            None => BifurcationKind::Simple { k },
            Some(kp) if kp > k => BifurcationKind::Double { k1: k, k2: kp },
            // already emitted from the lower wavenumber
            Some(_) => continue,
        };
        out.push(BifurcationPoint { kind, c0: c, params: *p });
    }
    out
}

/// The transcritical crossing `(u, c) = (0, 1)` of the trivial and constant lines.
pub fn transcritical_point(p: &SymbolParams) -> BifurcationPoint {
    BifurcationPoint { kind: BifurcationKind::Transcritical, c0: 1.0, params: *p }
}

/// Maximizer of `l_T` on `(0, ∞)` for `T < 1/3`, by golden-section search.
pub fn symbol_maximizer(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < BOND_CRITICAL) {
        return Err(Error::Precondition(format!("symbol maximum exists only for 0 < T < 1/3, got {t}")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 4.0 / t.sqrt() + 4.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (l_unscaled(t, x1), l_unscaled(t, x2));
    for _ in 0..200 {
        if b - a < 1e-13 * (1.0 + b) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = l_unscaled(t, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = l_unscaled(t, x1);
        }
    }
    Ok(0.5 * (a + b))
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Locates `κ0` with `l_T(κ0 k1) = l_T(κ0 k2)` and returns the double point.
///
/// `k2 = 0` selects the transcritical-resonant case `l_T(κ0 k1) = 1`, `c0 = 1`.
pub fn find_double_point(t: f64, k1: u32, k2: u32) -> Result<BifurcationPoint> {
    if !(t > 0.0 && t < BOND_CRITICAL) {
        return Err(Error::Precondition(format!(
            "double kernels need weak surface tension 0 < T < 1/3, got T = {t}"
        )));
    }
    if k1 == k2 {
        return Err(Error::DegeneratePair(k1 as f64));
    }
    let (lo_k, hi_k) = if k2 == 0 { (k1, 0) } else { (k1.min(k2), k1.max(k2)) };
    if lo_k == 0 {
        return Err(Error::Precondition("at least one wavenumber must be positive".into()));
    }
    let xi_star = symbol_maximizer(t)?;
    let (kappa0, c0) = if hi_k == 0 {
        let g = |kap: f64| l_unscaled(t, kap * lo_k as f64) - 1.0;
        let lo = xi_star / lo_k as f64;
        let mut hi = 2.0 * lo;
        let mut tries = 0;
        while g(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(Error::NotFound("no kappa with l(kappa k1) = 1".into()));
            }
        }
        (bisect(g, lo, hi), 1.0)
    } else {
        let (a, b) = (lo_k as f64, hi_k as f64);
        let g = |kap: f64| l_unscaled(t, kap * a) - l_unscaled(t, kap * b);
        let (lo, hi) = (xi_star / b, xi_star / a);
        if !(g(lo) < 0.0 && g(hi) > 0.0) {
            return Err(Error::NotFound(format!("no sign change bracketing kappa0 for ({k1}, {k2})")));
        }
        let kap = bisect(g, lo, hi);
        (kap, 1.0 / l_unscaled(t, kap * a))
    };
    let resid = (l_unscaled(t, kappa0 * lo_k as f64) - l_unscaled(t, kappa0 * hi_k as f64)).abs();
    if !(resid < 1e-12) {
        return Err(Error::NotFound(format!("double point residual {resid:e} too large")));
    }
    Ok(BifurcationPoint {
        kind: BifurcationKind::Double { k1, k2 },
        c0,
        params: SymbolParams { t, kappa: kappa0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(t: f64, kappa: f64) -> SymbolParams {
        SymbolParams::new(t, kappa).unwrap()
    }

    #[test]
    fn m_reference_values() {
        assert_eq!(eval_m(&p(0.5, 1.0), 0.0).unwrap(), 1.0);
        // √(2 tanh 1), mpmath
        assert_relative_eq!(eval_m(&p(1.0, 1.0), 1.0).unwrap(), 1.234_175_154_470_195, max_relative = 1e-14);
        assert_eq!(eval_m(&p(1.0, 1.0), -1.0).unwrap(), eval_m(&p(1.0, 1.0), 1.0).unwrap());
        assert!(eval_m(&p(1.0, 1.0), f64::NAN).is_err());
        assert!(eval_l(&p(1.0, 1.0), f64::INFINITY).is_err());
    }

    #[test]
    fn l_reference_values() {
        let q = p(0.5, 1.0);
        assert_eq!(eval_l(&q, 0.0).unwrap(), 1.0);
        assert_relative_eq!(eval_l(&q, 1.0).unwrap(), 0.935_605_075_338_710_5, max_relative = 1e-14);
        assert_relative_eq!(eval_l(&q, 2.0).unwrap(), 0.831_590_732_964_057_7, max_relative = 1e-14);
        assert_relative_eq!(eval_rho(&q, 1.0).unwrap(), 0.875_356_856_999_554_2, max_relative = 1e-14);
        assert_eq!(eval_rho(&q, 0.0).unwrap(), 1.0);
        // κ scaling
        assert_relative_eq!(eval_l(&p(0.5, 2.0), 0.5).unwrap(), eval_l(&q, 1.0).unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn near_zero_is_smooth() {
        let q = p(0.5, 1.0);
        let xi = 0.99e-4f64;
        assert!((tanh_over_x(xi) - xi.tanh() / xi).abs() < 1e-15);
        assert!((eval_l(&q, 1e-8).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let q = p(0.5, 1.0);
        let l = eval_l(&q, 1e6).unwrap();
        assert!(l.is_finite() && l > 0.0);
        assert_relative_eq!(l * (0.5f64 * 1e6).sqrt(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn l_prime_matches_central_difference() {
        let q = p(0.2, 1.0);
        let h = 1e-5;
        let fd = (eval_l(&q, 1.0 + h).unwrap() - eval_l(&q, 1.0 - h).unwrap()) / (2.0 * h);
        let an = eval_l_prime(&q, 1.0).unwrap();
        assert_relative_eq!(an, fd, max_relative = 1e-8);
        // mpmath value of d/dξ l_{0.2}(ξ) at ξ = 1
        assert_relative_eq!(an, 0.060_265_161_002_362_54, max_relative = 1e-12);
    }

    #[test]
    fn l_prime_small_and_at_zero() {
        let q = p(0.5, 1.0);
        let v = eval_l_prime(&q, 1e-3).unwrap();
        assert!(v.abs() < 1e-3 && v < 0.0);
        assert!(eval_l_prime(&q, 0.0).is_err());
        assert_eq!(eval_l_prime_or_zero(&q, 0.0).unwrap(), 0.0);
        assert_eq!(eval_l_prime(&q, -0.7).unwrap(), -eval_l_prime(&q, 0.7).unwrap());
    }

    #[test]
    fn weak_tension_has_single_maximum() {
        let q = p(0.2, 1.0);
        let xs = symbol_maximizer(0.2).unwrap();
        assert!(eval_l_prime(&q, 0.5 * xs).unwrap() > 0.0);
        assert!(eval_l_prime(&q, 1.5 * xs).unwrap() < 0.0);
        let signs: Vec<bool> = (1..4000).map(|i| eval_l_prime(&q, i as f64 * 0.01).unwrap() > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn critical_t_values() {
        // mpmath evaluation of the closed form
        assert_relative_eq!(critical_T(1.0, 2.0).unwrap(), 0.239_682_565_394_110_76, max_relative = 1e-13);
        assert_relative_eq!(critical_T(2.0, 3.0).unwrap(), 0.142_207_528_071_726_84, max_relative = 1e-13);
        assert_eq!(critical_T(2.0, 3.0).unwrap(), critical_T(3.0, 2.0).unwrap());
        let k = 2.0f64;
        let limit = (k - k.tanh()) / (k * k * k.tanh());
        assert_relative_eq!(critical_T(0.0, k).unwrap(), limit, max_relative = 1e-14);
        assert!(matches!(critical_T(2.0, 2.0), Err(Error::DegeneratePair(_))));
        assert!(matches!(critical_T(-1.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn critical_t_is_a_root() {
        let t = critical_T(2.0, 3.0).unwrap();
        let q = p(t, 1.0);
        assert!((eval_l(&q, 2.0).unwrap() - eval_l(&q, 3.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn critical_t_decreasing_in_n() {
        for k in 1..5u32 {
            let vals: Vec<f64> = (0..60u32).filter(|&n| n != k).map(|n| critical_T(n as f64, k as f64).unwrap()).collect();
            // strictly decreasing on each side of the excluded n = k
            let split = k as usize;
            for w in vals[..split].windows(2).chain(vals[split..].windows(2)) {
                assert!(w[1] < w[0]);
            }
            assert!(*vals.last().unwrap() < 0.02);
        }
    }

    #[test]
    fn simple_points() {
        let q = p(0.5, 1.0);
        let pts = simple_bifurcation_points(&q, 6);
        assert_eq!(pts.len(), 6);
        assert_relative_eq!(pts[0].c0, 1.068_827_036_490_772_6, max_relative = 1e-14);
        assert_relative_eq!(pts[0].c0, eval_m(&q, 1.0).unwrap(), max_relative = 1e-15);
        assert!(pts.windows(2).all(|w| w[1].c0 > w[0].c0));

        let t12 = critical_T(1.0, 2.0).unwrap();
        let pts = simple_bifurcation_points(&p(t12, 1.0), 4);
        assert_eq!(pts[0].kind, BifurcationKind::Double { k1: 1, k2: 2 });
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn double_points() {
        for (k1, k2) in [(1u32, 2u32), (2, 3)] {
            let t = critical_T(k1 as f64, k2 as f64).unwrap();
            let bp = find_double_point(t, k1, k2).unwrap();
            assert_relative_eq!(bp.params.kappa, 1.0, max_relative = 1e-10);
            assert_relative_eq!(bp.c0 * bp.params.l_mode(k1 as usize), 1.0, max_relative = 1e-13);
            assert_relative_eq!(bp.c0 * bp.params.l_mode(k2 as usize), 1.0, max_relative = 1e-12);
        }
        assert!(matches!(find_double_point(0.4, 1, 2), Err(Error::Precondition(_))));
        assert!(find_double_point(0.2, 1, 2).unwrap().is_resonant());
        assert!(!find_double_point(0.1, 2, 3).unwrap().is_resonant());
    }

    #[test]
    fn transcritical_double_point() {
        let bp = find_double_point(0.2, 1, 0).unwrap();
        assert_eq!(bp.c0, 1.0);
        assert!((bp.params.l_mode(1) - 1.0).abs() < 1e-12);
        assert!(bp.is_resonant());
    }
}
