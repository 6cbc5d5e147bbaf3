mod common;

use common::*;
use proptest::prelude::*;
use secluster_core::graph::build_graph;
use secluster_core::objective::partition_objective;
use secluster_core::oracle::brute_force_min_2d;
use secluster_core::{minimize_2d, Hyperparams, Kernel, RelationGraph, WeightedGraph};

fn two_triangles() -> WeightedGraph {
    WeightedGraph::from_edges(
        6,
        [
            (0, 1, 1.0),
            (1, 2, 1.0),
            (0, 2, 1.0),
            (3, 4, 1.0),
            (4, 5, 1.0),
            (3, 5, 1.0),
            (2, 3, 0.1),
        ],
    )
    .unwrap()
}

#[test]
fn bridged_triangles_split_in_two() {
    let g = two_triangles();
    let rel = RelationGraph::empty(6);
    let r = minimize_2d(&g, &rel, &Hyperparams::default()).unwrap();
    assert_eq!(r.partition.modules(), &[vec![0, 1, 2], vec![3, 4, 5]]);
    let (_, best) = brute_force_min_2d(&g, &rel, 2.0).unwrap();
    assert!((r.objective - best).abs() < 1e-12);
}

#[test]
fn must_links_pull_across_the_bridge() {
    let g = two_triangles();
    let rel = RelationGraph::from_edges(6, [(0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0)]).unwrap();
    let r = minimize_2d(&g, &rel, &Hyperparams::default()).unwrap();
    let a = r.partition.assignment();
    assert!([(0, 3), (1, 4), (2, 5)].iter().all(|&(i, j)| a[i] == a[j]));
    let (_, best) = brute_force_min_2d(&g, &rel, 2.0).unwrap();
    assert!((r.objective - best).abs() < 1e-12);
}

#[test]
fn runs_are_deterministic() {
    let (data, labels) = blobs(4, 120, 3, 10.0, 5.0);
    let (sim, g) = build_graph(&data, Kernel::default(), 4).unwrap();
    let rel = pairwise_relation(&sim, &labels, 0.2, 9);
    let a = minimize_2d(&g, &rel, &Hyperparams::default()).unwrap();
    let b = minimize_2d(&g, &rel, &Hyperparams::default()).unwrap();
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn sweep_limit_reports_non_convergence() {
    let (data, _) = blobs(5, 80, 2, 10.0, 6.0);
    let (_, g) = build_graph(&data, Kernel::default(), 6).unwrap();
    let rel = RelationGraph::empty(80);
    let hp = Hyperparams {
        t_max: 0,
        ..Hyperparams::default()
    };
    let r = minimize_2d(&g, &rel, &hp).unwrap();
    assert_eq!(r.sweeps, 0);
    assert!(!r.converged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_monotone_and_bounded(seed in 0u64..10_000, n in 2usize..40) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = random_relation(&mut rng, n, 0.1);
        let hp = Hyperparams::default();
        let r = minimize_2d(&g, &rel, &hp).unwrap();
        prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(r.merges < n);
        prop_assert!(r.sweeps <= hp.t_max);
        prop_assert!((r.objective - partition_objective(&g, &rel, &r.partition, hp.phi)).abs() < 1e-12);
        prop_assert!((r.trace.last().unwrap() - r.objective).abs() < 1e-9);
        r.partition.validate(&g, &rel).unwrap();
        r.tree.validate(&g, &rel).unwrap();
        prop_assert!(r.tree.height() <= 2);
    }

    #[test]
    fn never_below_brute_force(seed in 0u64..10_000, n in 1usize..=8) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.5);
        let rel = random_relation(&mut rng, n, 0.3);
        let r = minimize_2d(&g, &rel, &Hyperparams::default()).unwrap();
        let (_, best) = brute_force_min_2d(&g, &rel, 2.0).unwrap();
        prop_assert!(r.objective >= best - 1e-9);
    }

    #[test]
    fn empty_relation_graph_ignores_phi(seed in 0u64..10_000, n in 2usize..40, phi in 0.0f64..10.0) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = RelationGraph::empty(n);
        let a = minimize_2d(&g, &rel, &Hyperparams { phi, ..Hyperparams::default() }).unwrap();
        let b = minimize_2d(&g, &rel, &Hyperparams { phi: 0.0, ..Hyperparams::default() }).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.partition, b.partition);
    }
}
