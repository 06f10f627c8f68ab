//! Cosine-series discretization of the steady equation `F(u, c) = u − c L u + L(u²)`
//! on even `2π`-periodic functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::symbol::SymbolParams;

/// `u(x) = a₀ + Σ_{n=1}^{N} a_n cos(nx)`.
///
/// With `⟨f, g⟩ = (1/π)∫_{−π}^{π} f g dx` one has `⟨u, cos(k·)⟩ = a_k` and `⟨u, 1⟩ = 2a₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineSeries {
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n + 1] }
    }

    pub fn constant(n: usize, a0: f64) -> Self {
        let mut s = Self::zeros(n);
        s.coeffs[0] = a0;
        s
    }

    /// `amp · cos(kx)` truncated at order `n`.
    pub fn mode(n: usize, k: usize, amp: f64) -> Self {
        let mut s = Self::zeros(n);
        if k <= n {
            s.coeffs[k] = amp;
        }
        s
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(coeffs.len() >= 2, "a cosine series needs N >= 1");
        Self { coeffs }
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Pads with zeros or truncates to order `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(n + 1, 0.0);
        Self { coeffs: c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Clenshaw recurrence for Σ a_n cos(nx)
        let c2 = 2.0 * x.cos();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &a in self.coeffs[1..].iter().rev() {
            let b0 = a + c2 * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + b1 * x.cos() - b2
    }

    /// `u'(x) = −Σ n a_n sin(nx)`.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (n, &a) in self.coeffs.iter().enumerate().skip(1).rev() {
            s -= n as f64 * a * (n as f64 * x).sin();
        }
        s
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    /// `(1/π)∫ u²` expressed through the coefficients: `2a₀² + Σ a_n²`.
    pub fn mean_square(&self) -> f64 {
        2.0 * self.coeffs[0] * self.coeffs[0] + self.coeffs[1..].iter().map(|a| a * a).sum::<f64>()
    }
}

/// A candidate steady wave `(u, c)` at fixed symbol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub u: CosineSeries,
    pub c: f64,
    pub params: SymbolParams,
    /// Max-norm of the residual coefficients.
    pub residual_norm: f64,
}

impl SteadyState {
    /// Builds a state and records its residual.
    pub fn new(u: CosineSeries, c: f64, params: SymbolParams) -> Self {
        let mut s = Self { u, c, params, residual_norm: 0.0 };
        s.residual_norm = max_norm(&residual(&s).coeffs);
        s
    }

    pub fn order(&self) -> usize {
        self.u.order()
    }
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

/// Diagonal of `L` on modes `0..=n`.
pub fn symbol_diagonal(p: &SymbolParams, n: usize) -> Vec<f64> {
    (0..=n).map(|k| p.l_mode(k)).collect()
}

/// `a_n ↦ l_T(κn) a_n`.
pub fn apply_l(u: &CosineSeries, p: &SymbolParams) -> CosineSeries {
    CosineSeries { coeffs: u.coeffs.iter().enumerate().map(|(n, a)| p.l_mode(n) * a).collect() }
}

/// Cosine coefficients of `u v` up to order `n = min(N_u, N_v)` by exact convolution.
pub fn product(u: &CosineSeries, v: &CosineSeries) -> CosineSeries {
    let n = u.order().min(v.order());
    let a = &u.coeffs;
    let b = &v.coeffs;
    let mut out = vec![0.0; n + 1];
    // cos(i) cos(j) = ½ cos(i+j) + ½ cos(|i−j|), with the constant mode counted once
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj == 0.0 {
                continue;
            }
            let w = ai * bj;
            if i == 0 || j == 0 {
                let m = i + j;
                if m <= n {
                    out[m] += w;
                }
                continue;
            }
            let s = i + j;
            if s <= n {
                out[s] += 0.5 * w;
            }
            let d = i.abs_diff(j);
            if d == 0 {
                out[0] += 0.5 * w;
            } else if d <= n {
                out[d] += 0.5 * w;
            }
        }
    }
    CosineSeries { coeffs: out }
}

/// Cosine coefficients of `u²` up to the order of `u`.
pub fn square(u: &CosineSeries) -> CosineSeries {
    product(u, u)
}

/// `F(u, c) = u − c L u + L(u²)` in coefficients.
pub fn residual(s: &SteadyState) -> CosineSeries {
    let p = &s.params;
    let sq = square(&s.u);
    let coeffs = s
        .u
        .coeffs
        .iter()
        .zip(&sq.coeffs)
        .enumerate()
        .map(|(n, (&a, &q))| {
            let l = p.l_mode(n);
            a - s.c * l * a + l * q
        })
        .collect();
    CosineSeries { coeffs }
}

/// Cosine-product matrix `M_u` with `M_u h = coefficients of u·h`.
pub fn multiplication_matrix(u: &CosineSeries) -> DMatrix<f64> {
    let n = u.order();
    let a = &u.coeffs;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        // u · cos(jx)
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            if j == 0 || i == 0 {
                let r = i + j;
                if r <= n {
                    m[(r, j)] += ai;
                }
                continue;
            }
            let s = i + j;
            if s <= n {
                m[(s, j)] += 0.5 * ai;
            }
            let d = i.abs_diff(j);
            if d <= n {
                m[(d, j)] += 0.5 * ai;
            }
        }
    }
    m
}

/// Dense `D_u F = I − cΛ + 2Λ M_u` on coefficient space.
pub fn jacobian(s: &SteadyState) -> DMatrix<f64> {
    let n = s.order();
    let lam = symbol_diagonal(&s.params, n);
    let mut j = multiplication_matrix(&s.u);
    for r in 0..=n {
        for col in 0..=n {
            j[(r, col)] *= 2.0 * lam[r];
        }
        j[(r, r)] += 1.0 - s.c * lam[r];
    }
    j
}

/// `∂F/∂c = −L u`.
pub fn d_residual_dc(s: &SteadyState) -> DVector<f64> {
    let lu = apply_l(&s.u, &s.params);
    DVector::from_iterator(lu.coeffs.len(), lu.coeffs.iter().map(|v| -v))
}

/// `∂F/∂κ = diag(n l_T'(κn)) (u² − c u)`.
pub fn d_residual_dkappa(s: &SteadyState) -> DVector<f64> {
    let sq = square(&s.u);
    DVector::from_iterator(
        s.u.coeffs.len(),
        s.u.coeffs.iter().zip(&sq.coeffs).enumerate().map(|(n, (&a, &q))| s.params.dl_dkappa_mode(n) * (q - s.c * a)),
    )
}

/// Whether the series is resolved: every coefficient
/// `a_n` with `n > 3N/4` stays below `rtol · max |a_n|`.
pub fn is_resolved(u: &CosineSeries, rtol: f64) -> bool {
    let n = u.order();
    let max = u.max_abs_coeff();
    if max == 0.0 {
        return true;
    }
    let start = (3 * n) / 4;
    u.coeffs[start.max(1)..].iter().all(|a| a.abs() <= rtol * max)
}
