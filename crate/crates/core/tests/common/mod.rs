//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use secluster_core::constraints::{generate_constraints, relation_graph_for, Label};
use secluster_core::graph::{build_graph, default_p};
use secluster_core::io::{read_csv, Dataset};
use secluster_core::{
    ConstraintKind, DataMatrix, Kernel, RelationGraph, SimilarityMatrix, WeightedGraph,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with edge probability `density` and weights in (0, 1].
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(0.05..=1.0)));
            }
        }
    }
    WeightedGraph::from_edges(n, edges).unwrap()
}

/// Random signed relation graph.
pub fn random_relation(rng: &mut ChaCha8Rng, n: usize, density: f64) -> RelationGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(-1.0..=1.0)));
            }
        }
    }
    RelationGraph::from_edges(n, edges).unwrap()
}

/// Random labeling of `n` vertices into at most `k` groups.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Isotropic Gaussian blobs with centers on a circle of radius `radius`.
pub fn blobs(seed: u64, n: usize, k: usize, radius: f64, std: f64) -> (DataMatrix, Vec<Label>) {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, std).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
        rows.push(vec![
            radius * angle.cos() + noise.sample(&mut rng),
            radius * angle.sin() + noise.sample(&mut rng),
        ]);
        labels.push(c as Label);
    }
    (DataMatrix::from_rows(&rows).unwrap(), labels)
}

pub fn class_count(labels: &[Label]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

/// Gaussian-kernel graph with the default neighbor count.
pub fn default_graph(data: &DataMatrix, k: usize) -> (SimilarityMatrix, WeightedGraph) {
    let p = default_p(k, data.rows()).min(data.rows() - 1);
    build_graph(data, Kernel::default(), p).unwrap()
}

/// Pairwise constraints of `amount * n` per polarity, turned into G'.
pub fn pairwise_relation(
    sim: &SimilarityMatrix,
    labels: &[Label],
    amount: f64,
    seed: u64,
) -> RelationGraph {
    let cons = generate_constraints(labels, ConstraintKind::Pairwise, amount, seed).unwrap();
    relation_graph_for(&cons, sim).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

pub fn fixture(name: &str) -> Dataset {
    read_csv(&fixture_path(name), true).unwrap()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
