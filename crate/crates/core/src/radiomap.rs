//! Spatial matched filtering of LIS snapshots into radio maps.
//!
//! The filter taps phase-match a spherical wave emitted at `focal_height` below
//! the filter center, weighted by a separable 2D Taylor taper:
//!
//! ```text
//! tap[v,u] = t[v,u] * exp(-j 2π d[v,u] / λ)
//! d[v,u]   = sqrt(dx² + dy² + focal_height²),  dx = (u - cx) * spacing
//! ```
//!
//! A map is the 2D cross-correlation of a snapshot with the conjugated taps,
//! same size as the grid, zero outside it:
//!
//! ```text
//! out[y,x] = Σ_{v,u} conj(tap[v,u]) * Y[y + v - cy, x + u - cx]
//! ```
//!
//! with `(cx, cy) = (n_fx / 2, n_fy / 2)`. It is evaluated with zero-padded FFTs.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::ChannelObservation;
use crate::error::{Error, Result};
use crate::scenario::LisArray;

/// Tap weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weighting {
    /// Separable Taylor taper, normalized to peak 1. `sidelobe_db` is negative.
    Taylor { nbar: usize, sidelobe_db: f64 },
    /// `t = 1/d`, the unweighted spherical filter.
    InverseDistance,
}

impl Default for Weighting {
    fn default() -> Self {
        Weighting::Taylor {
            nbar: 4,
            sidelobe_db: -30.0,
        }
    }
}

/// Taylor window of length `len`, scaled so its largest sample is 1.
pub fn taylor_window(len: usize, nbar: usize, sidelobe_db: f64) -> Result<Vec<f64>> {
    if !(sidelobe_db < 0.0) {
        return Err(Error::invalid(
            "sidelobe_db",
            format!("must be negative, got {sidelobe_db}"),
        ));
    }
    if nbar == 0 {
        return Err(Error::invalid("nbar", "must be >= 1"));
    }
    if len == 0 {
        return Ok(Vec::new());
    }
    let b = 10f64.powf(-sidelobe_db / 20.0);
    let a = b.acosh() / PI;
    let a2 = a * a;
    let nb = nbar as f64;
    let s2 = nb * nb / (a2 + (nb - 0.5).powi(2));
    let ms: Vec<f64> = (1..nbar).map(|m| m as f64).collect();

    let coeffs: Vec<f64> = ms
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let m2 = m * m;
            let sign = if mi % 2 == 0 { 1.0 } else { -1.0 };
            let numer: f64 = ms
                .iter()
                .map(|&l| 1.0 - m2 / s2 / (a2 + (l - 0.5).powi(2)))
                .product();
            let denom: f64 = ms
                .iter()
                .filter(|&&l| l != m)
                .map(|&l| 1.0 - m2 / (l * l))
                .product();
            sign * numer / (2.0 * denom)
        })
        .collect();

    let n = len as f64;
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let x = i as f64 - n / 2.0 + 0.5;
            1.0 + 2.0
                * coeffs
                    .iter()
                    .zip(&ms)
                    .map(|(f, m)| f * (2.0 * PI * m * x / n).cos())
                    .sum::<f64>()
        })
        .collect();
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    Ok(w.into_iter().map(|v| v / peak).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct FilterParams {
    /// Distance from the LIS plane to the focal plane. `None` focuses at the
    /// users' height.
    pub focal_height: Option<f64>,
    pub weighting: Weighting,
    /// Tap grid `[n_fx, n_fy]`. `None` uses the full LIS grid.
    pub taps: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFilter {
    /// `n_fy x n_fx` taps.
    pub taps: Array2<Complex64>,
    pub focal_height: f64,
    pub weighting: Weighting,
}

impl MatchedFilter {
    /// A single unit tap with zero phase.
    pub fn delta() -> Self {
        MatchedFilter {
            taps: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
            focal_height: 0.0,
            weighting: Weighting::InverseDistance,
        }
    }

    /// `(cx, cy)` in tap coordinates.
    pub fn center(&self) -> (usize, usize) {
        (self.taps.ncols() / 2, self.taps.nrows() / 2)
    }
}

/// Builds matched-filter taps for `lis`.
///
/// `room_height` bounds the focal height; `taps` is `[n_fx, n_fy]`.
pub fn build_filter(
    lis: &LisArray,
    wavelength: f64,
    room_height: f64,
    focal_height: f64,
    weighting: Weighting,
    taps: [usize; 2],
) -> Result<MatchedFilter> {
    let [n_fx, n_fy] = taps;
    if n_fx == 0 || n_fy == 0 || n_fx > lis.n_x || n_fy > lis.n_y {
        return Err(Error::invalid(
            "taps",
            format!(
                "{n_fx} x {n_fy} must be within the {} x {} grid",
                lis.n_x, lis.n_y
            ),
        ));
    }
    if !(focal_height > 0.0 && focal_height <= room_height) {
        return Err(Error::invalid(
            "focal_height",
            format!("{focal_height} not in (0, {room_height}]"),
        ));
    }
    let (wx, wy) = match weighting {
        Weighting::Taylor { nbar, sidelobe_db } => (
            Some(taylor_window(n_fx, nbar, sidelobe_db)?),
            Some(taylor_window(n_fy, nbar, sidelobe_db)?),
        ),
        Weighting::InverseDistance => (None, None),
    };
    let (cx, cy) = (n_fx / 2, n_fy / 2);
    let wavenumber = 2.0 * PI / wavelength;
    let taps = Array2::from_shape_fn((n_fy, n_fx), |(v, u)| {
        let dx = (u as f64 - cx as f64) * lis.spacing;
        let dy = (v as f64 - cy as f64) * lis.spacing;
        let d = (dx * dx + dy * dy + focal_height * focal_height).sqrt();
        let t = match (&wx, &wy) {
            (Some(wx), Some(wy)) => wx[u] * wy[v],
            _ => 1.0 / d,
        };
        Complex64::from_polar(t, -wavenumber * d)
    });
    Ok(MatchedFilter {
        taps,
        focal_height,
        weighting,
    })
}

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Fft2 {
    rows: usize,
    cols: usize,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(planner: &mut FftPlanner<f64>, rows: usize, cols: usize, inverse: bool) -> Self {
        let (row_fft, col_fft) = if inverse {
            (
                planner.plan_fft_inverse(cols),
                planner.plan_fft_inverse(rows),
            )
        } else {
            (
                planner.plan_fft_forward(cols),
                planner.plan_fft_forward(rows),
            )
        };
        Fft2 {
            rows,
            cols,
            row_fft,
            col_fft,
        }
    }

    /// In-place 2D transform of a row-major buffer.
    fn process(&self, buf: &mut [Complex64]) {
        for row in buf.chunks_exact_mut(self.cols) {
            self.row_fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                col[r] = buf[r * self.cols + c];
            }
            self.col_fft.process(&mut col);
            for r in 0..self.rows {
                buf[r * self.cols + c] = col[r];
            }
        }
    }
}

/// Precomputed FFT correlator for one filter and one grid size.
pub struct Correlator {
    n_y: usize,
    n_x: usize,
    cy: usize,
    cx: usize,
    py: usize,
    px: usize,
    conj_spectrum: Vec<Complex64>,
    forward: Fft2,
    inverse: Fft2,
}

impl Correlator {
    pub fn new(filter: &MatchedFilter, n_y: usize, n_x: usize) -> Result<Self> {
        let (n_fy, n_fx) = filter.taps.dim();
        if n_fy > n_y || n_fx > n_x {
            return Err(Error::mismatch(
                format!("filter no larger than {n_y} x {n_x}"),
                format!("{n_fy} x {n_fx}"),
            ));
        }
        let py = fast_len(n_y + n_fy - 1);
        let px = fast_len(n_x + n_fx - 1);
        let mut planner = FftPlanner::new();
        let forward = Fft2::new(&mut planner, py, px, false);
        let inverse = Fft2::new(&mut planner, py, px, true);
        let mut padded = vec![Complex64::new(0.0, 0.0); py * px];
        for ((v, u), t) in filter.taps.indexed_iter() {
            padded[v * px + u] = *t;
        }
        forward.process(&mut padded);
        let scale = 1.0 / (py * px) as f64;
        let conj_spectrum = padded.into_iter().map(|c| c.conj() * scale).collect();
        let (cx, cy) = filter.center();
        Ok(Correlator {
            n_y,
            n_x,
            cy,
            cx,
            py,
            px,
            conj_spectrum,
            forward,
            inverse,
        })
    }

    pub fn apply(&self, input: ArrayView2<Complex64>) -> Result<Array2<Complex64>> {
        if input.dim() != (self.n_y, self.n_x) {
            return Err(Error::mismatch(
                format!("{} x {}", self.n_y, self.n_x),
                format!("{} x {}", input.nrows(), input.ncols()),
            ));
        }
        let (py, px) = (self.py, self.px);
        let mut buf = vec![Complex64::new(0.0, 0.0); py * px];
        for ((r, c), v) in input.indexed_iter() {
            buf[r * px + c] = *v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.conj_spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        Ok(Array2::from_shape_fn((self.n_y, self.n_x), |(y, x)| {
            let sy = (y + py - self.cy) % py;
            let sx = (x + px - self.cx) % px;
            buf[sy * px + sx]
        }))
    }
}

/// Radio map of one snapshot (`n_y x n_x`).
pub fn filter_map(filter: &MatchedFilter, y_k: ArrayView2<Complex64>) -> Result<Array2<Complex64>> {
    Correlator::new(filter, y_k.nrows(), y_k.ncols())?.apply(y_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    PerRowMax,
    None,
}

/// Per-user magnitude maps, one row per user, each row a row-major `n_y x n_x` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMapStack {
    pub maps: Array2<f64>,
    pub n_x: usize,
    pub n_y: usize,
    pub normalization: Normalization,
}

impl RadioMapStack {
    pub fn k(&self) -> usize {
        self.maps.nrows()
    }

    /// Row `k` reshaped to the grid.
    pub fn map(&self, k: usize) -> Array2<f64> {
        let row = self.maps.row(k);
        Array2::from_shape_fn((self.n_y, self.n_x), |(j, i)| row[j * self.n_x + i])
    }

    /// Grid cell `(x, y)` of the maximum of row `k`.
    pub fn argmax(&self, k: usize) -> (usize, usize) {
        let (n, _) = self
            .maps
            .row(k)
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (n, &v)| if v > acc.1 { (n, v) } else { acc },
            );
        (n % self.n_x, n / self.n_x)
    }
}

/// Filters every user's snapshot and stacks the max-normalized magnitudes.
/// All-zero rows stay zero.
pub fn build_stack(filter: &MatchedFilter, obs: &ChannelObservation) -> Result<RadioMapStack> {
    let corr = Correlator::new(filter, obs.n_y, obs.n_x)?;
    let n = obs.n_x * obs.n_y;
    let mut maps = Array2::zeros((obs.k(), n));
    for k in 0..obs.k() {
        let out = corr.apply(obs.snapshot(k).view())?;
        let mut row = maps.row_mut(k);
        for (dst, v) in row.iter_mut().zip(out.iter()) {
            *dst = v.norm();
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            row.mapv_inplace(|v| v / peak);
        }
    }
    Ok(RadioMapStack {
        maps,
        n_x: obs.n_x,
        n_y: obs.n_y,
        normalization: Normalization::PerRowMax,
    })
}

/// Magnitude map of the filtered superposition of all users' snapshots (not normalized).
pub fn summed_map(filter: &MatchedFilter, obs: &ChannelObservation) -> Result<Array2<f64>> {
    let out = filter_map(filter, obs.summed_snapshot().view())?;
    Ok(out.mapv(|v| v.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from an independent Taylor synthesis (scipy.signal.windows.taylor),
    // rescaled to unit peak.
    const TAYLOR_8: [f64; 8] = [
        0.2863296749844853,
        0.5278333751765554,
        0.8172332604907576,
        1.0,
        1.0,
        0.8172332604907576,
        0.5278333751765554,
        0.2863296749844853,
    ];
    const TAYLOR_7: [f64; 7] = [
        0.29009531272714734,
        0.5782126011092212,
        0.8780082248652833,
        1.0,
        0.8780082248652833,
        0.5782126011092212,
        0.2900953127271472,
    ];

    #[test]
    fn taylor_matches_reference() {
        let w = taylor_window(8, 4, -30.0).unwrap();
        for (a, b) in w.iter().zip(TAYLOR_8) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        let w = taylor_window(7, 4, -30.0).unwrap();
        for (a, b) in w.iter().zip(TAYLOR_7) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn taylor_rejects_nonnegative_sll() {
        assert!(taylor_window(8, 4, 0.0).is_err());
        assert!(taylor_window(8, 4, 10.0).is_err());
        assert!(taylor_window(8, 0, -30.0).is_err());
    }

    #[test]
    fn taylor_is_symmetric_and_positive() {
        for len in [1, 2, 5, 16, 63, 64, 259] {
            let w = taylor_window(len, 4, -30.0).unwrap();
            let mut r = w.clone();
            r.reverse();
            for (a, b) in w.iter().zip(&r) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
            assert!(w.iter().all(|&v| v > 0.0));
            assert_relative_eq!(w.iter().cloned().fold(0.0, f64::max), 1.0);
        }
    }

    fn toy_lis(n: usize) -> LisArray {
        LisArray {
            n_x: n,
            n_y: n,
            spacing: 0.04,
            height_z: 8.0,
            origin: [0.02, 0.02],
        }
    }

    #[test]
    fn single_tap_filter() {
        let f = build_filter(&toy_lis(8), 0.08, 8.0, 6.2, Weighting::default(), [1, 1]).unwrap();
        assert_eq!(f.taps.dim(), (1, 1));
        let t = f.taps[[0, 0]];
        assert_relative_eq!(t.norm(), 1.0, epsilon = 1e-12);
        let expected = Complex64::from_polar(1.0, -2.0 * PI * 6.2 / 0.08);
        assert_relative_eq!((t - expected).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn inverse_distance_taps() {
        let f = build_filter(
            &toy_lis(8),
            0.08,
            8.0,
            3.0,
            Weighting::InverseDistance,
            [8, 8],
        )
        .unwrap();
        let d = ((3.0f64 * 0.04).powi(2) + (4.0f64 * 0.04).powi(2) + 9.0).sqrt();
        // tap (v=0, u=1) is 3 cells left and 4 cells up from the center (4, 4)
        let t = f.taps[[0, 1]];
        assert_relative_eq!(t.norm(), 1.0 / d, max_relative = 1e-12);
    }

    #[test]
    fn filter_rejects_bad_params() {
        let lis = toy_lis(8);
        assert!(build_filter(&lis, 0.08, 8.0, 0.0, Weighting::default(), [8, 8]).is_err());
        assert!(build_filter(&lis, 0.08, 8.0, 9.0, Weighting::default(), [8, 8]).is_err());
        assert!(build_filter(&lis, 0.08, 8.0, 6.0, Weighting::default(), [9, 8]).is_err());
        let bad = Weighting::Taylor {
            nbar: 4,
            sidelobe_db: 3.0,
        };
        assert!(build_filter(&lis, 0.08, 8.0, 6.0, bad, [8, 8]).is_err());
    }

    #[test]
    fn delta_filter_is_identity() {
        let input =
            Array2::from_shape_fn((5, 7), |(r, c)| Complex64::new(r as f64, c as f64 - 2.0));
        let out = filter_map(&MatchedFilter::delta(), input.view()).unwrap();
        for (a, b) in out.iter().zip(input.iter()) {
            assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = build_filter(&toy_lis(8), 0.08, 8.0, 6.0, Weighting::default(), [8, 8]).unwrap();
        let small = Array2::<Complex64>::zeros((4, 4));
        assert!(matches!(
            filter_map(&f, small.view()),
            Err(Error::DimensionMismatch { .. })
        ));
        let corr = Correlator::new(&f, 8, 8).unwrap();
        assert!(corr.apply(Array2::zeros((8, 9)).view()).is_err());
    }

    #[test]
    fn fast_len_factors() {
        assert_eq!(fast_len(127), 128);
        assert_eq!(fast_len(517), 525);
        assert_eq!(fast_len(11), 12);
        assert_eq!(fast_len(1), 1);
    }
}
