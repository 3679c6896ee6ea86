//! Foreground/background split of the NLoS map and shape extraction.
//!
//! Coordinates are `(x, y) = (column, row)` throughout.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::rpca::NlosMap;

pub type Pixel = (usize, usize);

/// Binary k-means labels: 1 is the higher-power (foreground) cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    /// `n_y x n_x`, values in {0, 1}.
    pub classes: Array2<u8>,
    pub centroid_bg: f64,
    pub centroid_fg: f64,
    /// Input had fewer than two distinct values; everything is background.
    pub degenerate: bool,
    pub iterations: usize,
}

impl BinaryMask {
    pub fn foreground_count(&self) -> usize {
        self.classes.iter().filter(|c| **c == 1).count()
    }
}

const KMEANS_MAX_ITER: usize = 1000;

/// 1D k-means with k = 2, initialized at the extreme values.
pub fn kmeans2(values: ArrayView2<f64>) -> BinaryMask {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() || !(hi > lo) {
        return BinaryMask {
            classes: Array2::zeros(values.dim()),
            centroid_bg: if values.is_empty() { 0.0 } else { lo },
            centroid_fg: if values.is_empty() { 0.0 } else { lo },
            degenerate: true,
            iterations: 0,
        };
    }

    let (mut c0, mut c1) = (lo, hi);
    let mut iterations = 0;
    for it in 1..=KMEANS_MAX_ITER {
        iterations = it;
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &v in values.iter() {
            if (v - c1).abs() < (v - c0).abs() {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        // min stays in cluster 0 and max in cluster 1, so neither is empty
        let (n0c, n1c) = (s0 / n0 as f64, s1 / n1 as f64);
        let moved = (n0c - c0).abs().max((n1c - c1).abs());
        c0 = n0c;
        c1 = n1c;
        if moved < 1e-12 {
            break;
        }
    }
    let classes = values.mapv(|v| u8::from((v - c1).abs() < (v - c0).abs()));
    BinaryMask {
        classes,
        centroid_bg: c0,
        centroid_fg: c1,
        degenerate: false,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    /// Outer contour in tracing order, each pixel listed once.
    pub boundary: Vec<Pixel>,
    /// All pixels, raster order.
    pub area: Vec<Pixel>,
    /// Sum of squared NLoS values over the area.
    pub energy: f64,
}

impl Shape {
    /// `(x_min, y_min, x_max, y_max)`.
    pub fn bounding_box(&self) -> (usize, usize, usize, usize) {
        self.area.iter().fold(
            (usize::MAX, usize::MAX, 0, 0),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSet {
    pub shapes: Vec<Shape>,
    pub n_x: usize,
    pub n_y: usize,
}

impl ShapeSet {
    pub fn energies(&self) -> Vec<f64> {
        self.shapes.iter().map(|s| s.energy).collect()
    }

    /// Every boundary pixel tagged with its shape index.
    pub fn boundary_points(&self) -> Vec<(Pixel, usize)> {
        self.shapes
            .iter()
            .enumerate()
            .flat_map(|(s, shape)| shape.boundary.iter().map(move |&p| (p, s)))
            .collect()
    }

    /// Per-pixel shape label (`0` background, `s + 1` for shape `s`).
    pub fn label_image(&self) -> Array2<u32> {
        let mut img = Array2::zeros((self.n_y, self.n_x));
        for (s, shape) in self.shapes.iter().enumerate() {
            for &(x, y) in &shape.area {
                img[[y, x]] = s as u32 + 1;
            }
        }
        img
    }
}

/// Clockwise Moore neighborhood with y pointing down, starting west.
const MOORE: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn moore_dir(dx: isize, dy: isize) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a Moore neighbor")
}

/// Labels 8-connected foreground components in raster order of their first pixel.
fn label_components(classes: &Array2<u8>) -> (Array2<u32>, Vec<Vec<Pixel>>) {
    let (n_y, n_x) = classes.dim();
    let mut labels = Array2::<u32>::zeros((n_y, n_x));
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..n_y {
        for x in 0..n_x {
            if classes[[y, x]] != 1 || labels[[y, x]] != 0 {
                continue;
            }
            let id = comps.len() as u32 + 1;
            let mut area = Vec::new();
            labels[[y, x]] = id;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                area.push((cx, cy));
                for (dx, dy) in MOORE {
                    let nx = cx as isize + dx;
                    let ny = cy as isize + dy;
                    if nx < 0 || ny < 0 || nx >= n_x as isize || ny >= n_y as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if classes[[ny, nx]] == 1 && labels[[ny, nx]] == 0 {
                        labels[[ny, nx]] = id;
                        queue.push_back((nx, ny));
                    }
                }
            }
            area.sort_by_key(|&(x, y)| (y, x));
            comps.push(area);
        }
    }
    (labels, comps)
}

/// Moore-neighbor tracing of the outer contour of component `id`, starting at
/// its first raster pixel `start` (whose west neighbor is never in the component).
///
/// Tracing stops once the walk leaves `start` with the same move it made the
/// first time, which is Jacob's criterion expressed on the outgoing step and
/// also terminates correctly on one-pixel-wide shapes.
fn moore_trace(labels: &Array2<u32>, id: u32, start: Pixel, area_len: usize) -> Vec<Pixel> {
    let (n_y, n_x) = labels.dim();
    let inside = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < n_x
            && (y as usize) < n_y
            && labels[[y as usize, x as usize]] == id
    };
    let mut contour = vec![start];
    let mut p = (start.0 as isize, start.1 as isize);
    let s = p;
    let mut back_dir = 0usize;
    let mut first_step: Option<(isize, isize)> = None;
    let max_steps = 8 * area_len + 16;

    for _ in 0..max_steps {
        let Some(d) = (1..=8)
            .map(|i| (back_dir + i) % 8)
            .find(|&d| inside(p.0 + MOORE[d].0, p.1 + MOORE[d].1))
        else {
            break;
        };
        let c = (p.0 + MOORE[d].0, p.1 + MOORE[d].1);
        if p == s {
            match first_step {
                Some(f) if f == c => break,
                None => first_step = Some(c),
                _ => {}
            }
        }
        let prev = (p.0 + MOORE[(d + 7) % 8].0, p.1 + MOORE[(d + 7) % 8].1);
        back_dir = moore_dir(prev.0 - c.0, prev.1 - c.1);
        p = c;
        contour.push((p.0 as usize, p.1 as usize));
    }

    let mut seen = std::collections::HashSet::with_capacity(contour.len());
    contour.retain(|px| seen.insert(*px));
    contour
}

/// Extracts 8-connected foreground shapes, their outer boundaries and energies.
pub fn trace_shapes(mask: &BinaryMask, nlos: &NlosMap) -> Result<ShapeSet> {
    if mask.classes.dim() != nlos.values.dim() {
        return Err(Error::mismatch(
            format!("{:?}", nlos.values.dim()),
            format!("{:?}", mask.classes.dim()),
        ));
    }
    let (n_y, n_x) = mask.classes.dim();
    let (labels, comps) = label_components(&mask.classes);
    let shapes = comps
        .into_iter()
        .enumerate()
        .map(|(s, area)| {
            let boundary = moore_trace(&labels, s as u32 + 1, area[0], area.len());
            let energy = area
                .iter()
                .map(|&(x, y)| {
                    let v = nlos.values[[y, x]];
                    v * v
                })
                .sum();
            Shape {
                boundary,
                area,
                energy,
            }
        })
        .collect();
    Ok(ShapeSet { shapes, n_x, n_y })
}
