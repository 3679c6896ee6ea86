//! Uplink channel synthesis under the spherical-wavefront Saleh-Valenzuela model
//! and the noisy received snapshot `Y = p H + W`.
//!
//! Every LIS element `n` sees, from user `k`, a LoS ray plus one single-bounce
//! ray per passive element:
//!
//! ```text
//! h[k,n] = b0 * exp(-j 2π d0/λ) + Σ_r b_r * exp(-j 2π d_ref/λ)
//! b0     = λ / (4π d0)
//! b_r    = λ/(4π) * sqrt(σ_r) * exp(-j Δφ) / (d_k^r + d_r,n)
//! Δφ     = 2π (d_k^r + d_r,n - d0) / λ
//! ```
//!
//! `d_ref` depends on [`NlosPhase`]: with [`NlosPhase::PathDelay`] the outer
//! propagation phase is referenced to the LoS distance `d0`, so each NLoS ray
//! carries the phase of its true path length `d_k^r + d_r,n`. With
//! [`NlosPhase::Literal`] it is the PE-to-element distance `d_r,n`, which adds
//! the element-dependent delay twice.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::Scenario;

/// How the outer propagation phase of an NLoS ray is referenced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlosPhase {
    /// Net phase `-2π (d_k^r + d_r,n) / λ`: the physical single-bounce delay.
    #[default]
    PathDelay,
    /// Net phase `-2π (d_r,n + d_k^r + d_r,n - d0) / λ`.
    Literal,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Free-space LoS amplitude `λ / (4π d)`.
pub fn los_gain(wavelength: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Singular(format!("LoS distance {d} must be > 0")));
    }
    Ok(wavelength / (4.0 * PI * d))
}

/// Complex gain of a single-bounce ray, including the excess-path phase `e^{-jΔφ}`.
pub fn nlos_gain(
    wavelength: f64,
    sigma_r: f64,
    d_k_r: f64,
    d_rn: f64,
    d0_kn: f64,
) -> Result<Complex64> {
    let path = d_k_r + d_rn;
    if !(path > 0.0) {
        return Err(Error::Singular(format!(
            "reflected path length {path} must be > 0"
        )));
    }
    if !(sigma_r > 0.0 && sigma_r <= 1.0) {
        return Err(Error::invalid(
            "sigma_r",
            format!("{sigma_r} not in (0, 1]"),
        ));
    }
    let dphi = 2.0 * PI * (path - d0_kn) / wavelength;
    let mag = wavelength / (4.0 * PI) * sigma_r.sqrt() / path;
    Ok(Complex64::from_polar(mag, -dphi))
}

/// Channel model configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelModel {
    #[serde(default)]
    pub nlos_phase: NlosPhase,
}

impl ChannelModel {
    pub fn entry(&self, scenario: &Scenario, k: usize, n: usize) -> Result<Complex64> {
        let au = scenario.aus.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: scenario.aus.len(),
        })?;
        let elem = scenario.lis.element_position(n)?;
        self.entry_at(scenario, au.position, elem)
    }

    fn entry_at(&self, scenario: &Scenario, au: [f64; 3], elem: [f64; 3]) -> Result<Complex64> {
        let lambda = scenario.wavelength;
        let wavenumber = 2.0 * PI / lambda;
        let d0 = dist(au, elem);
        let mut h = Complex64::from_polar(los_gain(lambda, d0)?, -wavenumber * d0);
        for pe in &scenario.pes {
            let d_kr = dist(au, pe.position);
            let d_rn = dist(pe.position, elem);
            let beta = nlos_gain(lambda, pe.reflection_loss, d_kr, d_rn, d0)?;
            let outer = match self.nlos_phase {
                NlosPhase::PathDelay => d0,
                NlosPhase::Literal => d_rn,
            };
            h += beta * Complex64::from_polar(1.0, -wavenumber * outer);
        }
        Ok(h)
    }

    /// Full `N x K` channel matrix; column `k` is user `k`, row `n` is element `n`.
    pub fn channel_matrix(&self, scenario: &Scenario) -> Result<Array2<Complex64>> {
        let n_el = scenario.n_elements();
        let k_aus = scenario.k();
        let mut h = Array2::zeros((n_el, k_aus));
        for n in 0..n_el {
            let elem = scenario.lis.element_position(n)?;
            for (k, au) in scenario.aus.iter().enumerate() {
                h[[n, k]] = self.entry_at(scenario, au.position, elem)?;
            }
        }
        Ok(h)
    }

    /// Noisy received snapshot. Noise is drawn column by column (user-major)
    /// from a `ChaCha8` stream seeded with `noise_seed`.
    pub fn observe(&self, scenario: &Scenario, noise_seed: u64) -> Result<ChannelObservation> {
        let h = self.channel_matrix(scenario)?;
        let mut y = h.clone();
        let sigma = (scenario.noise_power_mw / 2.0).sqrt();
        let mut rng = rng::rng_from_seed(noise_seed);
        for (k, au) in scenario.aus.iter().enumerate() {
            let p = au.tx_power_mw;
            for n in 0..y.nrows() {
                let mut v = h[[n, k]] * p;
                if sigma > 0.0 {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    v += Complex64::new(re * sigma, im * sigma);
                }
                y[[n, k]] = v;
            }
        }
        Ok(ChannelObservation {
            h: Some(h),
            y,
            n_x: scenario.lis.n_x,
            n_y: scenario.lis.n_y,
            scenario_seed: Some(scenario.rng_seed),
            noise_seed: Some(noise_seed),
        })
    }
}

/// `h_{k,n}` under the default model.
pub fn channel_entry(scenario: &Scenario, k: usize, n: usize) -> Result<Complex64> {
    ChannelModel::default().entry(scenario, k, n)
}

/// Received snapshot under the default model.
pub fn observe(scenario: &Scenario, noise_seed: u64) -> Result<ChannelObservation> {
    ChannelModel::default().observe(scenario, noise_seed)
}

/// Received snapshot `Y` (N x K) and, when synthesized here, the channel `H`.
///
/// Observations loaded from external tensors carry no `H` and no seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelObservation {
    pub h: Option<Array2<Complex64>>,
    pub y: Array2<Complex64>,
    pub n_x: usize,
    pub n_y: usize,
    pub scenario_seed: Option<u64>,
    pub noise_seed: Option<u64>,
}

impl ChannelObservation {
    /// Wraps an externally produced `N x K` snapshot.
    pub fn from_received(y: Array2<Complex64>, n_x: usize, n_y: usize) -> Result<Self> {
        if y.nrows() != n_x * n_y {
            return Err(Error::mismatch(
                format!("{} rows ({n_x} x {n_y} grid)", n_x * n_y),
                format!("{} rows", y.nrows()),
            ));
        }
        Ok(ChannelObservation {
            h: None,
            y,
            n_x,
            n_y,
            scenario_seed: None,
            noise_seed: None,
        })
    }

    pub fn k(&self) -> usize {
        self.y.ncols()
    }

    /// Snapshot of user `k` reshaped to the LIS grid (`n_y` rows, `n_x` columns).
    pub fn snapshot(&self, k: usize) -> Array2<Complex64> {
        let col = self.y.column(k);
        Array2::from_shape_fn((self.n_y, self.n_x), |(j, i)| col[j * self.n_x + i])
    }

    /// Sum of all users' snapshots on the LIS grid.
    pub fn summed_snapshot(&self) -> Array2<Complex64> {
        let mut acc = Array2::zeros((self.n_y, self.n_x));
        for k in 0..self.k() {
            acc += &self.snapshot(k);
        }
        acc
    }
}
