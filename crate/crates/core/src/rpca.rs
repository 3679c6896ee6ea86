//! Principal component pursuit by the inexact augmented Lagrangian method.
//!
//! Solves `min ||L||_* + λ ||S||_1  s.t.  L + S = M` with the iteration
//!
//! ```text
//! Y  = M / max(||M||_2, ||M||_∞ / λ),   μ = 1.25 / ||M||_2
//! S ← shrink(M - L + Y/μ, λ/μ)
//! L ← svt(M - S + Y/μ, 1/μ)
//! Y ← Y + μ (M - L - S),   μ ← min(ρ μ, 1e7 μ₀)
//! ```
//!
//! stopping when `||M - L - S||_F / ||M||_F <= tol`.
//!
//! Singular value thresholding works on the Gram matrix of the short side:
//! for `X` with `m <= n` rows, `svt(X, τ) = P X` where
//! `P = Σ_{σ_i > τ} (1 - τ/σ_i) v_i v_iᵀ` and `(σ_i², v_i)` are the
//! eigenpairs of `X Xᵀ`. This costs `O(m² n)` per iteration, which is what
//! keeps the solver cheap on `K x N` stacks with `K << N`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `multiplier / sqrt(n)`; the reference choice is a multiplier of 3.
pub fn lambda_for(n: usize, multiplier: f64) -> f64 {
    multiplier / (n.max(1) as f64).sqrt()
}

/// `3 / sqrt(n)` where `n` is the per-map pixel count (the stack's larger dimension).
pub fn default_lambda(n_cols: usize) -> f64 {
    lambda_for(n_cols, 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Penalty growth factor.
    pub rho: f64,
    /// Initial penalty as a multiple of `1 / ||M||_2`.
    pub mu_scale: f64,
}

impl Default for PcpOptions {
    fn default() -> Self {
        PcpOptions {
            tol: 1e-7,
            max_iter: 200,
            rho: 1.5,
            mu_scale: 1.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaDecomposition {
    /// NLoS estimate.
    pub low_rank: Array2<f64>,
    /// LoS estimate.
    pub sparse: Array2<f64>,
    pub iterations: usize,
    /// Final `||M - L - S||_F / ||M||_F`.
    pub residual: f64,
    /// Relative residual after the first iteration.
    pub first_residual: f64,
    pub lambda: f64,
    pub converged: bool,
    /// Number of singular values kept by the last thresholding step.
    pub rank: usize,
}

impl RpcaDecomposition {
    /// Fraction of `S` entries that are nonzero.
    pub fn sparsity(&self) -> f64 {
        let nz = self.sparse.iter().filter(|v| **v != 0.0).count();
        nz as f64 / self.sparse.len().max(1) as f64
    }

    /// `||S||_F² / (||L||_F² + ||S||_F²)`.
    pub fn sparse_energy_fraction(&self) -> f64 {
        let s: f64 = self.sparse.iter().map(|v| v * v).sum();
        let l: f64 = self.low_rank.iter().map(|v| v * v).sum();
        if s + l > 0.0 {
            s / (s + l)
        } else {
            0.0
        }
    }
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric eigen-decomposition of the Gram matrix of the short side of `x`.
/// Returns (eigenvalues, eigenvectors as columns, short side is rows).
fn gram_eigen(x: ArrayView2<f64>, rows_short: bool) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let g = if rows_short {
        x.dot(&x.t())
    } else {
        x.t().dot(&x)
    };
    let m = g.nrows();
    let dm = DMatrix::from_fn(m, m, |r, c| 0.5 * (g[[r, c]] + g[[c, r]]));
    SymmetricEigen::new(dm)
}

/// Largest singular value.
pub fn spectral_norm(x: ArrayView2<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let eig = gram_eigen(x, x.nrows() <= x.ncols());
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// Singular value soft-thresholding. Returns the thresholded matrix and its rank.
pub fn svt(x: ArrayView2<f64>, tau: f64) -> (Array2<f64>, usize) {
    let rows_short = x.nrows() <= x.ncols();
    let eig = gram_eigen(x, rows_short);
    let m = eig.eigenvalues.len();
    let mut p = Array2::<f64>::zeros((m, m));
    let mut rank = 0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let sigma = ev.max(0.0).sqrt();
        if sigma <= tau {
            continue;
        }
        rank += 1;
        let w = 1.0 - tau / sigma;
        let v = eig.eigenvectors.column(i);
        for r in 0..m {
            for c in 0..m {
                p[[r, c]] += w * v[r] * v[c];
            }
        }
    }
    let out = if rows_short { p.dot(&x) } else { x.dot(&p) };
    (out, rank)
}

fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Decomposes `m` into low-rank plus sparse parts.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn pcp_solve(m: ArrayView2<f64>, lambda: f64, opts: &PcpOptions) -> Result<RpcaDecomposition> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    if !(opts.rho > 1.0) {
        return Err(Error::invalid("rho", "must be > 1"));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rpca input"));
    }
    let m = m.to_owned();
    let m_norm = frobenius(&m);
    if m_norm == 0.0 {
        return Ok(RpcaDecomposition {
            low_rank: Array2::zeros(m.dim()),
            sparse: Array2::zeros(m.dim()),
            iterations: 1,
            residual: 0.0,
            first_residual: 0.0,
            lambda,
            converged: true,
            rank: 0,
        });
    }

    let norm2 = spectral_norm(m.view());
    let norm_inf = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut y = &m / norm2.max(norm_inf / lambda);
    let mut mu = opts.mu_scale / norm2;
    let mu_max = mu * 1e7;

    let mut l = Array2::<f64>::zeros(m.dim());
    let mut s = Array2::<f64>::zeros(m.dim());
    let mut residual = f64::INFINITY;
    let mut first_residual = f64::INFINITY;
    let mut rank = 0;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let inv_mu = 1.0 / mu;
        let thr = lambda * inv_mu;
        ndarray::Zip::from(&mut s)
            .and(&m)
            .and(&l)
            .and(&y)
            .for_each(|s, &m, &l, &y| *s = shrink(m - l + y * inv_mu, thr));

        let mut target = &m - &s;
        target.scaled_add(inv_mu, &y);
        let (new_l, r) = svt(target.view(), inv_mu);
        l = new_l;
        rank = r;

        let z = &m - &l - &s;
        residual = frobenius(&z) / m_norm;
        if iter == 1 {
            first_residual = residual;
        }
        y.scaled_add(mu, &z);
        mu = (mu * opts.rho).min(mu_max);
        if residual <= opts.tol {
            break;
        }
    }

    let converged = residual <= opts.tol;
    if !converged {
        log::warn!("pcp_solve stopped after {iterations} iterations at residual {residual:.3e}");
    }
    Ok(RpcaDecomposition {
        low_rank: l,
        sparse: s,
        iterations,
        residual,
        first_residual,
        lambda,
        converged,
        rank,
    })
}

/// Row-summed NLoS estimate on the LIS grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NlosMap {
    /// `n_y x n_x`.
    pub values: Array2<f64>,
}

fn reduce_rows(x: &Array2<f64>, n_x: usize, n_y: usize) -> Result<Array2<f64>> {
    if x.ncols() != n_x * n_y {
        return Err(Error::mismatch(
            format!("{} columns ({n_x} x {n_y})", n_x * n_y),
            format!("{} columns", x.ncols()),
        ));
    }
    let sum = x.sum_axis(Axis(0));
    Ok(Array2::from_shape_fn((n_y, n_x), |(j, i)| {
        sum[j * n_x + i].max(0.0)
    }))
}

/// Sums the low-rank rows into one map and clamps negative pixels to zero.
pub fn reduce_nlos(decomp: &RpcaDecomposition, n_x: usize, n_y: usize) -> Result<NlosMap> {
    Ok(NlosMap {
        values: reduce_rows(&decomp.low_rank, n_x, n_y)?,
    })
}

/// Same reduction for the sparse (LoS) part.
pub fn reduce_los(decomp: &RpcaDecomposition, n_x: usize, n_y: usize) -> Result<Array2<f64>> {
    reduce_rows(&decomp.sparse, n_x, n_y)
}
