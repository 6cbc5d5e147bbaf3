mod common;

use common::*;
use proptest::prelude::*;
use secluster_core::hier::{compress_to_height, extract_partition, Stretcher};
use secluster_core::objective::tree_objective;
use secluster_core::oracle::recompute_check_tree;
use secluster_core::{minimize_highd, Hyperparams, RelationGraph, WeightedGraph};

#[test]
fn path_splits_into_halves() {
    let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
    let rel = RelationGraph::empty(4);
    let hp = Hyperparams {
        height: 2,
        ..Hyperparams::default()
    };
    let r = minimize_highd(&g, &rel, &hp).unwrap();
    let mut sets = r.tree.top_level_sets();
    sets.sort();
    assert_eq!(sets, vec![vec![0, 1], vec![2, 3]]);
}

#[test]
fn target_at_binary_height_changes_nothing() {
    let (data, _) = blobs(2, 60, 3, 10.0, 4.0);
    let (_, g) = secluster_core::graph::build_graph(&data, Default::default(), 5).unwrap();
    let rel = RelationGraph::empty(60);
    let first = minimize_highd(&g, &rel, &Hyperparams::default()).unwrap();
    let hp = Hyperparams {
        height: first.binary_height,
        ..Hyperparams::default()
    };
    let r = minimize_highd(&g, &rel, &hp).unwrap();
    assert_eq!(r.tree.to_nested(), r.binary.to_nested());
    assert_eq!(r.compress_trace.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stretching_builds_a_binary_root(seed in 0u64..10_000, n in 2usize..30) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = random_relation(&mut rng, n, 0.1);
        let hp = Hyperparams::default();
        let mut s = Stretcher::new(&g, &rel, &hp).unwrap();
        let mut steps = 0;
        let mut before = s.tree().clone();
        while let Some(step) = s.step() {
            steps += 1;
            prop_assert!(recompute_check_tree(&g, &rel, hp.phi, &before, s.tree(), step.delta) < 1e-9);
            before = s.tree().clone();
        }
        prop_assert_eq!(steps, n.saturating_sub(2));
        let t = s.tree();
        prop_assert!(t.children(t.root()).len() <= 2);
        t.validate(&g, &rel).unwrap();
    }

    #[test]
    fn compression_respects_height(seed in 0u64..10_000, n in 2usize..30, k in 2usize..6) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = random_relation(&mut rng, n, 0.1);
        let hp = Hyperparams { height: k, ..Hyperparams::default() };
        let r = minimize_highd(&g, &rel, &hp).unwrap();
        prop_assert!(r.tree.height() <= k);
        r.tree.validate(&g, &rel).unwrap();
        prop_assert!((r.compress_trace.last().unwrap() - r.objective).abs() < 1e-9);
        prop_assert!((r.stretch_trace.last().unwrap() - r.binary_objective).abs() < 1e-9);
        let (again, _) = compress_to_height(r.binary.clone(), k, hp.phi);
        prop_assert_eq!(again.to_nested(), r.tree.to_nested());
        prop_assert!((tree_objective(&g, &rel, &r.tree, hp.phi) - r.objective).abs() < 1e-12);
    }

    #[test]
    fn extracted_partition_covers_everything(seed in 0u64..10_000, n in 2usize..30) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = random_relation(&mut rng, n, 0.1);
        let r = minimize_highd(&g, &rel, &Hyperparams::default()).unwrap();
        let p = extract_partition(&g, &rel, &r.binary, 2.0).unwrap();
        p.validate(&g, &rel).unwrap();
        prop_assert_eq!(p.vertex_count(), n);
    }
}
