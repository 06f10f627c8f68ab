//! Special functions and quadrature rules shared by the kernel and diagnostics code.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    GaussLegendre::new(n).into_node_weight_pairs().to_vec()
}

/// Gauss–Legendre rule mapped to `[0, 1]`, cached for the fixed orders used in hot loops.
pub(crate) fn unit_rule(n: usize) -> &'static [(f64, f64)] {
    static R24: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R32: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let build = |n: usize| {
        gauss_legendre(n).into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect::<Vec<_>>()
    };
    match n {
        24 => R24.get_or_init(|| build(24)),
        32 => R32.get_or_init(|| build(32)),
        _ => panic!("no cached rule of order {n}"),
    }
}

/// Riemann zeta for real `s > 0.25`, `s ≠ 1`, by Euler–Maclaurin summation.
pub(crate) fn zeta_positive(s: f64) -> f64 {
    debug_assert!(s > 0.25 && (s - 1.0).abs() > 1e-12);
    let n = 24usize;
    let nf = n as f64;
    let mut sum = 0.0;
    for k in (1..n).rev() {
        sum += (k as f64).powf(-s);
    }
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Σ B_{2j}/(2j)! · s(s+1)…(s+2j−2) · N^{−s−2j+1}
    let mut rising = s;
    let mut npow = nf.powf(-s - 1.0);
    for (j, &b) in BERNOULLI_EXACT.iter().enumerate() {
        if j > 0 {
            rising *= (s + 2.0 * j as f64 - 1.0) * (s + 2.0 * j as f64);
            npow /= nf * nf;
        }
        sum += b * rising * npow;
    }
    sum
}

// B_{2j}/(2j)! for j = 1..=8, exact rationals
const BERNOULLI_EXACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// `Γ(m + 1/2)` for integer `m` (negative allowed).
pub(crate) fn gamma_half_integer(m: i32) -> f64 {
    let mut g = PI.sqrt();
    if m >= 0 {
        for j in 0..m {
            g *= j as f64 + 0.5;
        }
    } else {
        for j in (m..0).rev() {
            g /= j as f64 + 0.5;
        }
    }
    g
}

/// Riemann zeta at `s = m + 1/2` for any integer `m` (functional equation for `s < 1/2`).
pub(crate) fn zeta_half_integer(m: i32) -> f64 {
    let s = m as f64 + 0.5;
    if m >= 0 {
        return zeta_positive(s);
    }
    // ζ(s) = 2^s π^{s−1} sin(πs/2) Γ(1−s) ζ(1−s), with 1 − s = −m + 1/2
    let one_minus = -m;
    let sin = (0.5 * PI * s).sin();
    let ln_mag = s * 2f64.ln() + (s - 1.0) * PI.ln();
    ln_mag.exp() * sin * gamma_half_integer(one_minus) * zeta_positive(1.0 - s)
}

/// `C_s(x) = Σ_{n≥1} n^{−s} cos(nx)` for `s ∈ {1/2, 5/2, 9/2, …}` and `x ∉ 2πℤ`.
///
/// Uses the expansion of the polylogarithm about `x = 0`,
/// `Re[Γ(1−s)(−ix)^{s−1}] + Σ_j (−1)^j ζ(s−2j) x^{2j}/(2j)!`, valid for `|x| < 2π`,
/// after reducing `x` to `[0, π]`.
pub(crate) fn cos_series_half(m: i32, x: f64) -> f64 {
    let s = m as f64 + 0.5;
    let mut y = x.abs() % (2.0 * PI);
    if y > PI {
        y = 2.0 * PI - y;
    }
    let lead = gamma_half_integer(-m) * y.powf(s - 1.0) * (0.5 * PI * (s - 1.0)).cos();
    let y2 = y * y;
    let mut sum = 0.0;
    let mut pow_over_fact = 1.0;
    for j in 0..80i32 {
        if j > 0 {
            let jj = 2.0 * j as f64;
            pow_over_fact *= -y2 / ((jj - 1.0) * jj);
        }
        let term = zeta_half_integer(m - 2 * j) * pow_over_fact;
        sum += term;
        if j > 4 && term.abs() < 1e-19 * (sum.abs() + lead.abs() + 1e-300) {
            break;
        }
    }
    lead + sum
}

/// Upper incomplete gamma `Γ(1/2 − j, z)` for `j = 0..=jmax`, by downward recurrence from `√π erfc(√z)`.
pub(crate) fn upper_gamma_half_down(jmax: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(jmax + 1);
    let mut g = PI.sqrt() * libm::erfc(z.sqrt());
    let ez = (-z).exp();
    out.push(g);
    let mut a = 0.5;
    for _ in 0..jmax {
        // Γ(a, z) = a Γ(a − 1, z) + z^{a−1} e^{−z}  ⇒  Γ(a − 1, z) = (Γ(a, z) − z^{a−1}e^{−z}) / (a − 1)
        g = (g - z.powf(a - 1.0) * ez) / (a - 1.0);
        a -= 1.0;
        out.push(g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zeta_values() {
        assert_relative_eq!(zeta_positive(2.0), PI * PI / 6.0, max_relative = 1e-15);
        assert_relative_eq!(zeta_positive(0.5), -1.460_354_508_809_586_8, max_relative = 1e-14);
        assert_relative_eq!(zeta_positive(2.5), 1.341_487_257_250_917_2, max_relative = 1e-14);
        // ζ(−3/2) = −0.02548520188983303 (mpmath)
        assert_relative_eq!(zeta_half_integer(-2), -0.025_485_201_889_833_03, max_relative = 1e-13);
        // ζ(−7/2), mpmath
        assert_relative_eq!(zeta_half_integer(-4), 0.004_441_011_335_479_432, max_relative = 1e-12);
    }

    #[test]
    fn gamma_half() {
        assert_relative_eq!(gamma_half_integer(0), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_half_integer(-2), 4.0 * PI.sqrt() / 3.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_half_integer(3), 15.0 * PI.sqrt() / 8.0, max_relative = 1e-15);
    }

    fn brute(s: f64, x: f64, n: usize) -> f64 {
        (1..=n).rev().map(|k| (k as f64).powf(-s) * (k as f64 * x).cos()).sum()
    }

    #[test]
    fn cos_series_against_direct_sums() {
        // n^{-9/2} and n^{-5/2} converge fast enough for brute force
        for &x in &[0.1, 1.0, 2.5, 3.1] {
            assert_relative_eq!(cos_series_half(4, x), brute(4.5, x, 200_000), max_relative = 1e-12, epsilon = 1e-14);
            assert!((cos_series_half(2, x) - brute(2.5, x, 2_000_000)).abs() < 1e-9);
        }
        assert_eq!(cos_series_half(0, 1.0), cos_series_half(0, -1.0));
        assert!((cos_series_half(0, 1.0) - cos_series_half(0, 1.0 + 2.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn cos_series_half_against_polylog() {
        // Re Li_{1/2}(e^{ix}) from mpmath
        for (x, want) in [(0.05, 4.144_668_565_247_275_4), (1.3, -0.339_043_202_571_208_5), (3.0, -0.603_707_346_672_403_4)] {
            assert_relative_eq!(cos_series_half(0, x), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn incomplete_gamma() {
        let g = upper_gamma_half_down(2, 0.7);
        // Γ(1/2, 0.7) = √π erfc(√0.7); Γ(−1/2, 0.7) and Γ(−3/2, 0.7) from mpmath
        assert_relative_eq!(g[0], PI.sqrt() * libm::erfc(0.7f64.sqrt()), max_relative = 1e-15);
        assert_relative_eq!(g[1], 0.347_902_715_378_659_17, max_relative = 1e-12);
        assert_relative_eq!(g[2], 0.333_334_344_096_611_86, max_relative = 1e-11);
    }
}
