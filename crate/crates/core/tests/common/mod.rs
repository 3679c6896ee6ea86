//! Independent reference implementations shared by the integration tests and
//! the acceptance gate.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use lisrmap_core::rng::rng_from_seed;
use lisrmap_core::rpca::NlosMap;
use lisrmap_core::segmentation::{BinaryMask, Pixel};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Direct same-size cross-correlation with conjugated taps, zero outside the grid.
pub fn direct(taps: &Array2<Complex64>, y: &Array2<Complex64>) -> Array2<Complex64> {
    let (fy, fx) = taps.dim();
    let (ny, nx) = y.dim();
    let (cy, cx) = (fy / 2, fx / 2);
    Array2::from_shape_fn((ny, nx), |(r, c)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in 0..fy {
            for u in 0..fx {
                let (yy, xx) = (
                    r as isize + v as isize - cy as isize,
                    c as isize + u as isize - cx as isize,
                );
                if yy >= 0 && xx >= 0 && (yy as usize) < ny && (xx as usize) < nx {
                    acc += taps[[v, u]].conj() * y[[yy as usize, xx as usize]];
                }
            }
        }
        acc
    })
}

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.mapv(|v| v * v).sum().sqrt()
}

/// Rank-2 `L0` (20 x 200) plus 2% spikes with magnitude up to `max |L0|`.
pub fn planted(seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = rng_from_seed(seed);
    let u = Array2::from_shape_fn((20, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let v = Array2::from_shape_fn((2, 200), |_| rng.sample::<f64, _>(StandardNormal));
    let l0 = u.dot(&v);
    let peak = l0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut s0 = Array2::zeros((20, 200));
    for x in s0.iter_mut() {
        if rng.random::<f64>() < 0.02 {
            *x = rng.random_range(-peak..peak);
        }
    }
    (l0, s0)
}

/// Union-find over 8-connected foreground pixels; returns sorted pixel sets.
pub fn union_find_components(mask: &Array2<u8>) -> BTreeSet<Vec<Pixel>> {
    let (ny, nx) = mask.dim();
    let mut parent: Vec<usize> = (0..nx * ny).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..ny {
        for x in 0..nx {
            if mask[[y, x]] == 0 {
                continue;
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                let (xx, yy) = (x as isize + dx, y as isize + dy);
                if xx >= 0
                    && yy >= 0
                    && (xx as usize) < nx
                    && (yy as usize) < ny
                    && mask[[yy as usize, xx as usize]] == 1
                {
                    let a = find(&mut parent, y * nx + x);
                    let b = find(&mut parent, yy as usize * nx + xx as usize);
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<Pixel>> = HashMap::new();
    for y in 0..ny {
        for x in 0..nx {
            if mask[[y, x]] == 1 {
                let r = find(&mut parent, y * nx + x);
                groups.entry(r).or_default().push((x, y));
            }
        }
    }
    groups
        .into_values()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect()
}

pub fn random_mask(rng: &mut impl Rng, n: usize, density: f64) -> (BinaryMask, NlosMap) {
    let classes = Array2::from_shape_fn((n, n), |_| u8::from(rng.random::<f64>() < density));
    let values = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..3.0));
    (
        BinaryMask {
            classes,
            centroid_bg: 0.0,
            centroid_fg: 1.0,
            degenerate: false,
            iterations: 0,
        },
        NlosMap { values },
    )
}

/// Textbook DBSCAN with O(n²) neighbor lists and BFS expansion.
pub fn reference_dbscan(pts: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = pts.len();
    let nb: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
                        <= eps
                })
                .collect()
        })
        .collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut c = 0;
    for i in 0..n {
        if !core[i] || label[i].is_some() {
            continue;
        }
        label[i] = Some(c);
        let mut q = VecDeque::from([i]);
        while let Some(p) = q.pop_front() {
            if !core[p] {
                continue;
            }
            for &j in &nb[p] {
                if label[j].is_none() {
                    label[j] = Some(c);
                    q.push_back(j);
                }
            }
        }
        c += 1;
    }
    label
}

/// Partition with labels erased: the set of member lists plus the noise indices.
pub fn partition(labels: &[Option<usize>]) -> (BTreeSet<Vec<usize>>, Vec<usize>) {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    let mut noise = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => groups[*c].push(i),
            None => noise.push(i),
        }
    }
    (groups.into_iter().collect(), noise)
}

/// Random integer grid coordinates, as boundary pixels are.
pub fn random_points(rng: &mut impl Rng, n: usize, side: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(0..side) as f64,
                rng.random_range(0..side) as f64,
            ]
        })
        .collect()
}
