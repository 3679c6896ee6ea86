use lisrmap_core::inference::{
    accuracy_vector, classify, cluster_boundaries, dbscan, default_thresholds, infer, metrics,
    Class, Clustering, InferenceParams, Thresholds,
};
use lisrmap_core::rng::rng_from_seed;
use lisrmap_core::rpca::NlosMap;
use lisrmap_core::scenario::scaled_scenario;
use lisrmap_core::segmentation::{trace_shapes, BinaryMask};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

mod common;
use common::{partition, random_points, reference_dbscan};

#[test]
fn dbscan_matches_brute_force() {
    let mut rng = rng_from_seed(77);
    for trial in 0..50 {
        let side = [20, 30, 45, 64][trial % 4];
        let pts = random_points(&mut rng, 200, side);
        let Clustering { labels, n_clusters } = dbscan(&pts, 2.0, 2).unwrap();
        let want = reference_dbscan(&pts, 2.0, 2);
        assert_eq!(partition(&labels), partition(&want), "trial {trial}");
        assert_eq!(n_clusters, partition(&want).0.len());
    }
}

#[test]
fn dbscan_matches_brute_force_with_borders() {
    // min_pts = 4 creates border points; both implementations assign a border
    // point to the first cluster (in discovery order) that reaches it
    let mut rng = rng_from_seed(78);
    for _ in 0..50 {
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [rng.random_range(0.0..40.0), rng.random_range(0.0..40.0)])
            .collect();
        let got = dbscan(&pts, 2.5, 4).unwrap().labels;
        assert_eq!(partition(&got), partition(&reference_dbscan(&pts, 2.5, 4)));
    }
}

#[test]
fn dbscan_small_examples() {
    let c = dbscan(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0]], 2.0, 2).unwrap();
    assert_eq!(c.labels, vec![Some(0), Some(0), None]);
    assert_eq!(dbscan(&[], 2.0, 2).unwrap().n_clusters, 0);
}

#[test]
fn threshold_boundaries() {
    let th = Thresholds::new(2.0, 8.0).unwrap();
    assert_eq!(th.classify(8.0), Class::Human);
    assert_eq!(th.classify(2.0), Class::Noise);
    assert_eq!(th.classify(8.0 + 1e-12), Class::MetalObject);
    assert_eq!(th.classify(2.0 + 1e-12), Class::Human);
    let (lo, hi) = default_thresholds(&[1.0, 2.0, 3.0]).unwrap();
    assert!((lo - 0.06).abs() < 1e-15 && (hi - 2.4).abs() < 1e-15);
}

#[test]
fn metric_examples() {
    assert_eq!(
        accuracy_vector(&[[1.0, 1.0]], &[[1.0, 1.5]], 1.0).unwrap(),
        vec![0.5]
    );
    assert_eq!(
        accuracy_vector(&[[3.0, 0.0]], &[[0.0, 0.0]], 1.0).unwrap(),
        vec![0.0]
    );
    let (la, dr) = metrics(&[0.5, 0.0, 0.3], 3).unwrap();
    assert!((la - 0.8 / 3.0).abs() < 1e-15);
    assert!((dr - 2.0 / 3.0).abs() < 1e-15);
    let a = [0.1, 0.62, 0.15, 0.18, 0.2, 0.22, 0.19, 0.24, 0.16, 0.14];
    let (la, dr) = metrics(&a, 10).unwrap();
    assert!((la - 0.22).abs() <= 1e-12);
    assert_eq!(dr, 1.0);
}

fn toy_shapes(seed: u64) -> lisrmap_core::segmentation::ShapeSet {
    let mut rng = rng_from_seed(seed);
    let classes = Array2::from_shape_fn((24, 24), |_| u8::from(rng.random::<f64>() < 0.3));
    let values = Array2::from_shape_fn((24, 24), |_| rng.random_range(0.0..2.0));
    let mask = BinaryMask {
        classes,
        centroid_bg: 0.0,
        centroid_fg: 1.0,
        degenerate: false,
        iterations: 0,
    };
    trace_shapes(&mask, &NlosMap { values }).unwrap()
}

#[test]
fn cluster_set_invariants() {
    for seed in 0..20 {
        let shapes = toy_shapes(seed);
        let cs = cluster_boundaries(&shapes, 2.0, 2).unwrap();
        let n_points = shapes.boundary_points().len();
        let members: usize = cs.clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(members + cs.noise_points.len(), n_points);
        for c in &cs.clusters {
            assert!(c.members.len() >= 2);
            let e: f64 = c.shape_ids.iter().map(|&s| shapes.shapes[s].energy).sum();
            assert_eq!(e, c.total_energy);
        }
        // a shape's boundary is 8-connected, so it never splits across clusters
        let mut owner = vec![None; shapes.shapes.len()];
        for (ci, c) in cs.clusters.iter().enumerate() {
            for &s in &c.shape_ids {
                assert!(owner[s].is_none() || owner[s] == Some(ci));
                owner[s] = Some(ci);
            }
        }
        let (lo, hi) = default_thresholds(&shapes.energies()).unwrap();
        let labels = classify(&cs, &Thresholds::new(lo, hi).unwrap());
        assert_eq!(labels.len(), cs.clusters.len());
    }
}

#[test]
fn report_without_humans() {
    let s = scaled_scenario(1, 32, 2, 1, 0).unwrap();
    let shapes = toy_shapes(3);
    let (_, _, r) = infer(
        &shapes,
        &s.lis,
        &[],
        &s.object_positions(),
        &InferenceParams::default(),
    )
    .unwrap();
    assert_eq!(r.dr, None);
    assert_eq!(r.la, 0.0);
    assert!(r.accuracy.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbscan_permutation_invariant(seed in 0u64..100_000) {
        let mut rng = rng_from_seed(seed);
        let pts = random_points(&mut rng, 80, 25);
        let mut order: Vec<usize> = (0..pts.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<[f64; 2]> = order.iter().map(|&i| pts[i]).collect();
        let a = dbscan(&pts, 2.0, 2).unwrap().labels;
        let b = dbscan(&shuffled, 2.0, 2).unwrap().labels;
        let mut back = vec![None; pts.len()];
        for (pos, &i) in order.iter().enumerate() {
            back[i] = b[pos];
        }
        // with min_pts = 2 every clustered point is a core point, so the partition is unique
        prop_assert_eq!(partition(&a).0, partition(&back).0);
    }

    #[test]
    fn classification_trichotomy(p in 0.0f64..100.0, lo in 0.0f64..50.0, gap in 1e-6f64..50.0) {
        let th = Thresholds::new(lo, lo + gap).unwrap();
        let c = th.classify(p);
        let human = lo < p && p <= lo + gap;
        let object = p > lo + gap;
        prop_assert_eq!(c == Class::Human, human);
        prop_assert_eq!(c == Class::MetalObject, object);
        prop_assert_eq!(c == Class::Noise, !human && !object);
    }

    #[test]
    fn metric_bounds(a in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..0.99], 1..20)) {
        let (la, dr) = metrics(&a, a.len()).unwrap();
        prop_assert!((0.0..=1.0).contains(&dr));
        prop_assert!(la >= 0.0);
        if dr > 0.0 {
            prop_assert!(la < 1.0);
        }
    }

    /// An extra detection can shorten a positive accuracy but never turns a
    /// detected human into a miss, and never lowers DR.
    #[test]
    fn extra_detection_monotone(
        det in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 0..6),
        gt in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..6),
        extra in (0.0f64..5.0, 0.0f64..5.0),
    ) {
        let det: Vec<[f64; 2]> = det.into_iter().map(|(x, y)| [x, y]).collect();
        let gt: Vec<[f64; 2]> = gt.into_iter().map(|(x, y)| [x, y]).collect();
        let mut more = det.clone();
        more.push([extra.0, extra.1]);
        let a = accuracy_vector(&det, &gt, 1.0).unwrap();
        let b = accuracy_vector(&more, &gt, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            if *x > 0.0 {
                prop_assert!(*y > 0.0 && *y <= *x);
            }
        }
        prop_assert!(metrics(&b, gt.len()).unwrap().1 >= metrics(&a, gt.len()).unwrap().1);
    }
}
