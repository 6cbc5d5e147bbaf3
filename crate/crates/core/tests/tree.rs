mod common;

use common::*;
use proptest::prelude::*;
use secluster_core::{minimize_highd, EncodingTree, Hyperparams, NestedTree};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialized_forms_round_trip(seed in 0u64..10_000, n in 2usize..30, k in 2usize..5) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let rel = random_relation(&mut rng, n, 0.1);
        let hp = Hyperparams { height: k, ..Hyperparams::default() };
        let t = minimize_highd(&g, &rel, &hp).unwrap().tree;

        let newick = t.to_newick();
        let back = EncodingTree::from_newick(&newick).unwrap();
        prop_assert_eq!(back.to_newick(), newick);

        let json = serde_json::to_string(&t.to_nested()).unwrap();
        let nested: NestedTree = serde_json::from_str(&json).unwrap();
        let back = EncodingTree::from_nested(&nested).unwrap();
        prop_assert_eq!(back.to_nested(), t.to_nested());
        prop_assert_eq!(back.height(), t.height());
    }
}

#[test]
fn newick_ignores_lengths_and_labels() {
    let t = EncodingTree::from_newick("((0:1.5,1:0.2)inner:3,2)root;").unwrap();
    assert_eq!(t.to_newick(), "((0,1),2);");
    assert_eq!(t.height(), 2);
}

#[test]
fn malformed_trees_are_rejected() {
    for bad in ["((0,1),1);", "((0,1),3);", "((0,1),2", "(0,,1);", "(a,b);"] {
        assert!(EncodingTree::from_newick(bad).is_err(), "{bad}");
    }
}
