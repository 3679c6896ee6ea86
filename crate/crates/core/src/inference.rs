//! Density clustering of shape boundaries, power-threshold classification and
//! localization metrics.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::LisArray;
use crate::segmentation::{Pixel, ShapeSet};

/// DBSCAN labels: `Some(cluster)` or `None` for noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

struct GridIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    fn new(points: &[[f64; 2]], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        GridIndex { cell, buckets }
    }

    fn key(p: &[f64; 2], cell: f64) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    /// Indices within `eps` of `points[i]`, including `i`, ascending.
    fn neighbors(&self, points: &[[f64; 2]], i: usize, eps: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = points[i];
        let (kx, ky) = Self::key(&p, self.cell);
        let eps2 = eps * eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &j in b {
                        let q = points[j];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// DBSCAN with Euclidean distance. A point is core when at least `min_pts`
/// points (itself included) lie within `eps`. Clusters are discovered in input
/// order and each is expanded completely before the next starts, so a border
/// point belongs to the first cluster that reaches it.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Result<Clustering> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::invalid("min_pts", "must be >= 1"));
    }
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        In(usize),
    }
    let index = GridIndex::new(points, eps);
    let mut state = vec![State::Unvisited; points.len()];
    let mut n_clusters = 0;
    let mut nb = Vec::new();
    let mut queue = VecDeque::new();

    for i in 0..points.len() {
        if state[i] != State::Unvisited {
            continue;
        }
        index.neighbors(points, i, eps, &mut nb);
        if nb.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        state[i] = State::In(c);
        queue.extend(nb.iter().copied().filter(|&j| j != i));
        while let Some(j) = queue.pop_front() {
            match state[j] {
                State::Noise => {
                    state[j] = State::In(c);
                    continue;
                }
                State::In(_) => continue,
                State::Unvisited => {}
            }
            state[j] = State::In(c);
            index.neighbors(points, j, eps, &mut nb);
            if nb.len() >= min_pts {
                queue.extend(
                    nb.iter()
                        .copied()
                        .filter(|&q| state[q] == State::Unvisited || state[q] == State::Noise),
                );
            }
        }
    }

    Ok(Clustering {
        labels: state
            .into_iter()
            .map(|s| match s {
                State::In(c) => Some(c),
                _ => None,
            })
            .collect(),
        n_clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<Pixel>,
    /// Shapes with at least one boundary pixel in the cluster, ascending.
    pub shape_ids: Vec<usize>,
    /// Sum of the member shapes' energies.
    pub total_energy: f64,
    /// Mean member position in grid coordinates `(x, y)`.
    pub centroid: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub noise_points: Vec<Pixel>,
}

/// Clusters all shape boundary pixels and attaches shape energies.
pub fn cluster_boundaries(shapes: &ShapeSet, eps: f64, min_pts: usize) -> Result<ClusterSet> {
    let tagged = shapes.boundary_points();
    let pts: Vec<[f64; 2]> = tagged
        .iter()
        .map(|&((x, y), _)| [x as f64, y as f64])
        .collect();
    let clustering = dbscan(&pts, eps, min_pts)?;
    let mut members: Vec<Vec<Pixel>> = vec![Vec::new(); clustering.n_clusters];
    let mut ids: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); clustering.n_clusters];
    let mut noise_points = Vec::new();
    for (&(px, shape), label) in tagged.iter().zip(&clustering.labels) {
        match label {
            Some(c) => {
                members[*c].push(px);
                ids[*c].insert(shape);
            }
            None => noise_points.push(px),
        }
    }
    let clusters = members
        .into_iter()
        .zip(ids)
        .map(|(members, ids)| {
            let n = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
                (sx + x as f64, sy + y as f64)
            });
            Cluster {
                total_energy: ids.iter().map(|&s| shapes.shapes[s].energy).sum(),
                shape_ids: ids.into_iter().collect(),
                centroid: [sx / n, sy / n],
                members,
            }
        })
        .collect();
    Ok(ClusterSet {
        clusters,
        noise_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Human,
    MetalObject,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub th_min: f64,
    pub th_max: f64,
}

impl Thresholds {
    pub fn new(th_min: f64, th_max: f64) -> Result<Self> {
        if !(th_min >= 0.0 && th_max >= 0.0 && th_min < th_max) {
            return Err(Error::invalid(
                "thresholds",
                format!("need 0 <= th_min < th_max, got ({th_min}, {th_max})"),
            ));
        }
        Ok(Thresholds { th_min, th_max })
    }

    /// Human iff `th_min < power <= th_max`; above is a metal object; the rest is noise.
    pub fn classify(&self, power: f64) -> Class {
        if power > self.th_max {
            Class::MetalObject
        } else if power > self.th_min {
            Class::Human
        } else {
            Class::Noise
        }
    }
}

/// `(c_min * mean(E), c_max * max(E))`.
pub fn thresholds_from(energies: &[f64], c_min: f64, c_max: f64) -> Result<(f64, f64)> {
    if energies.is_empty() {
        return Err(Error::Empty("shape energies"));
    }
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let max = energies.iter().cloned().fold(f64::MIN, f64::max);
    Ok((c_min * mean, c_max * max))
}

/// `th_min = 0.03 * mean(E)`, `th_max = 0.8 * max(E)`.
pub fn default_thresholds(energies: &[f64]) -> Result<(f64, f64)> {
    thresholds_from(energies, 0.03, 0.8)
}

pub fn classify(clusters: &ClusterSet, thresholds: &Thresholds) -> Vec<Class> {
    clusters
        .clusters
        .iter()
        .map(|c| thresholds.classify(c.total_energy))
        .collect()
}

/// Per ground-truth accuracy: distance to the nearest detection when it is
/// below `d_th`, otherwise 0 (a miss). Detections may be shared between
/// ground-truth entries.
pub fn accuracy_vector(
    detected: &[[f64; 2]],
    ground_truth: &[[f64; 2]],
    d_th: f64,
) -> Result<Vec<f64>> {
    if !(d_th > 0.0) {
        return Err(Error::invalid("d_th", format!("must be > 0, got {d_th}")));
    }
    Ok(ground_truth
        .iter()
        .map(|g| match nearest(detected, *g) {
            Some((_, d)) if d < d_th => d,
            _ => 0.0,
        })
        .collect())
}

fn nearest(points: &[[f64; 2]], q: [f64; 2]) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(j, p)| (j, (p[0] - q[0]).hypot(p[1] - q[1])))
        .fold(None, |best, cur| match best {
            Some((_, bd)) if bd <= cur.1 => best,
            _ => Some(cur),
        })
}

/// `(LA, DR)`: mean accuracy (misses count as 0) and fraction of nonzero entries.
pub fn metrics(a: &[f64], r_hum: usize) -> Result<(f64, f64)> {
    if r_hum == 0 {
        return Err(Error::invalid("r_hum", "must be >= 1"));
    }
    if a.len() != r_hum {
        return Err(Error::mismatch(r_hum, a.len()));
    }
    let n = r_hum as f64;
    let la = a.iter().sum::<f64>() / n;
    let dr = a.iter().filter(|v| **v > 0.0).count() as f64 / n;
    Ok((la, dr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    pub eps: f64,
    pub min_pts: usize,
    pub th_min_coeff: f64,
    pub th_max_coeff: f64,
    /// Detection distance threshold, meters.
    pub d_th: f64,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            eps: 2.0,
            min_pts: 2,
            th_min_coeff: 0.03,
            th_max_coeff: 0.8,
            d_th: 1.0,
        }
    }
}

/// One ground-truth entry of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub ground_truth: [f64; 2],
    /// Nearest detection within `d_th`, if any.
    pub detection: Option<[f64; 2]>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Detected human positions, meters.
    pub humans: Vec<[f64; 2]>,
    pub objects: Vec<[f64; 2]>,
    pub human_matches: Vec<Match>,
    pub object_matches: Vec<Match>,
    /// Localization accuracy per ground-truth human, meters (0 = miss).
    pub accuracy: Vec<f64>,
    pub la: f64,
    /// `None` when the scenario has no humans.
    pub dr: Option<f64>,
    pub thresholds_used: Option<Thresholds>,
    pub n_clusters: usize,
    pub n_human_clusters: usize,
    pub n_object_clusters: usize,
    pub n_noise_clusters: usize,
    /// Distinct detections that are the nearest match of some detected human.
    pub matched_detections: usize,
}

impl DetectionReport {
    /// Number of ground-truth humans with a detection inside `d_th`.
    pub fn correct_humans(&self) -> usize {
        self.accuracy.iter().filter(|a| **a > 0.0).count()
    }
}

fn matches(
    detected: &[[f64; 2]],
    gt: &[[f64; 2]],
    d_th: f64,
) -> Result<(Vec<Match>, Vec<f64>, usize)> {
    let acc = accuracy_vector(detected, gt, d_th)?;
    let mut used = BTreeSet::new();
    let ms = gt
        .iter()
        .zip(&acc)
        .map(|(g, &a)| {
            let detection = if a > 0.0 {
                nearest(detected, *g).map(|(j, _)| {
                    used.insert(j);
                    detected[j]
                })
            } else {
                None
            };
            Match {
                ground_truth: *g,
                detection,
                accuracy: a,
            }
        })
        .collect();
    Ok((ms, acc, used.len()))
}

/// Classifies clusters and scores the detections against ground truth.
pub fn infer(
    shapes: &ShapeSet,
    lis: &LisArray,
    human_gt: &[[f64; 2]],
    object_gt: &[[f64; 2]],
    params: &InferenceParams,
) -> Result<(ClusterSet, Vec<Class>, DetectionReport)> {
    let clusters = cluster_boundaries(shapes, params.eps, params.min_pts)?;
    let energies = shapes.energies();
    let (labels, thresholds) = if energies.is_empty() {
        (Vec::new(), None)
    } else {
        let (lo, hi) = thresholds_from(&energies, params.th_min_coeff, params.th_max_coeff)?;
        if hi > 0.0 {
            let th = Thresholds::new(lo, hi)?;
            (classify(&clusters, &th), Some(th))
        } else {
            // all shapes carry zero energy
            (vec![Class::Noise; clusters.clusters.len()], None)
        }
    };

    let to_world = |c: &[f64; 2]| lis.grid_to_world(c[0], c[1]);
    let mut humans = Vec::new();
    let mut objects = Vec::new();
    for (c, label) in clusters.clusters.iter().zip(&labels) {
        match label {
            Class::Human => humans.push(to_world(&c.centroid)),
            Class::MetalObject => objects.push(to_world(&c.centroid)),
            Class::Noise => {}
        }
    }

    let (human_matches, accuracy, matched_detections) = matches(&humans, human_gt, params.d_th)?;
    let (object_matches, _, _) = matches(&objects, object_gt, params.d_th)?;
    let (la, dr) = if human_gt.is_empty() {
        (0.0, None)
    } else {
        let (la, dr) = metrics(&accuracy, human_gt.len())?;
        (la, Some(dr))
    };
    let count = |k: Class| labels.iter().filter(|l| **l == k).count();
    let report = DetectionReport {
        n_clusters: clusters.clusters.len(),
        n_human_clusters: count(Class::Human),
        n_object_clusters: count(Class::MetalObject),
        n_noise_clusters: count(Class::Noise),
        humans,
        objects,
        human_matches,
        object_matches,
        accuracy,
        la,
        dr,
        thresholds_used: thresholds,
        matched_detections,
    };
    Ok((clusters, labels, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dbscan_small_example() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [10.0, 10.0]];
        let c = dbscan(&pts, 2.0, 2).unwrap();
        assert_eq!(c.n_clusters, 1);
        assert_eq!(c.labels, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn dbscan_empty_and_bad_params() {
        let c = dbscan(&[], 2.0, 2).unwrap();
        assert_eq!(c.n_clusters, 0);
        assert!(c.labels.is_empty());
        assert!(dbscan(&[[0.0, 0.0]], 0.0, 2).is_err());
        assert!(dbscan(&[[0.0, 0.0]], 1.0, 0).is_err());
    }

    #[test]
    fn dbscan_border_point() {
        // (3,0) has a single neighbor so it is a border point of the left cluster
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.5, 0.0]];
        let c = dbscan(&pts, 1.5, 3).unwrap();
        assert_eq!(c.labels, vec![Some(0), Some(0), Some(0), Some(0)]);
        let c = dbscan(&pts, 1.0, 3).unwrap();
        assert_eq!(c.labels, vec![Some(0), Some(0), Some(0), None]);
    }

    #[test]
    fn threshold_rule() {
        let th = Thresholds::new(1.0, 10.0).unwrap();
        assert_eq!(th.classify(5.0), Class::Human);
        assert_eq!(th.classify(0.5), Class::Noise);
        assert_eq!(th.classify(20.0), Class::MetalObject);
        assert_eq!(th.classify(10.0), Class::Human);
        assert_eq!(th.classify(1.0), Class::Noise);
        assert!(Thresholds::new(2.0, 1.0).is_err());
        assert!(Thresholds::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn default_threshold_values() {
        let (lo, hi) = default_thresholds(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(lo, 0.06, epsilon = 1e-15);
        assert_relative_eq!(hi, 2.4, epsilon = 1e-15);
        let (lo, hi) = default_thresholds(&[5.0]).unwrap();
        assert_relative_eq!(lo, 0.15, epsilon = 1e-15);
        assert_relative_eq!(hi, 4.0, epsilon = 1e-15);
        let (lo, hi) = default_thresholds(&[7.0; 4]).unwrap();
        assert_relative_eq!(lo, 0.03 * 7.0, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.8 * 7.0, epsilon = 1e-15);
        assert!(matches!(default_thresholds(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(
            accuracy_vector(&[[1.0, 1.0]], &[[1.0, 1.5]], 1.0).unwrap(),
            vec![0.5]
        );
        assert_eq!(
            accuracy_vector(&[[4.0, 0.0]], &[[1.0, 0.0]], 1.0).unwrap(),
            vec![0.0]
        );
        let a = accuracy_vector(&[[0.0, 0.0], [0.0, 0.4]], &[[0.0, 0.1]], 1.0).unwrap();
        assert_relative_eq!(a[0], 0.1, epsilon = 1e-15);
        assert_eq!(
            accuracy_vector(&[], &[[0.0, 0.0], [1.0, 1.0]], 1.0).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(accuracy_vector(&[], &[], 0.0).is_err());
    }

    #[test]
    fn metric_examples() {
        let (la, dr) = metrics(&[0.5, 0.0, 0.3], 3).unwrap();
        assert_relative_eq!(la, 0.8 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(dr, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(metrics(&[0.0; 4], 4).unwrap(), (0.0, 0.0));
        assert!(metrics(&[], 0).is_err());
        assert!(metrics(&[0.1], 2).is_err());
    }
}
