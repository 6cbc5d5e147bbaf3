//! Structural entropy and constraint penalty evaluators.
//!
//! Everything here recomputes volumes and cuts from the graphs and ignores
//! the caches held by [`Partition`] and [`EncodingTree`], so these functions
//! can check the incremental deltas used by the optimizers.

use serde::{Deserialize, Serialize};

use crate::constraints::RelationGraph;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::partition::{module_stats, Partition};
use crate::tree::{EncodingTree, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight of the constraint penalty.
    pub phi: f64,
    /// Target height of the hierarchy.
    pub height: usize,
    /// Maximum number of moving sweeps.
    pub t_max: usize,
    /// A step is taken only when its gain exceeds this.
    pub tol: f64,
    pub seed: u64,
    /// Stop merging after this many merges.
    pub max_merges: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            phi: 2.0,
            height: 3,
            t_max: 100,
            tol: 1e-12,
            seed: 0,
            max_merges: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi.is_finite() && self.phi >= 0.0) {
            return Err(Error::input(format!(
                "phi must be finite and >= 0, got {}",
                self.phi
            )));
        }
        if self.height < 2 {
            return Err(Error::input(format!(
                "height must be at least 2, got {}",
                self.height
            )));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::input(format!(
                "tol must be finite and >= 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// `-(cut / total) * log2(volume / parent)`, zero when the volume is zero.
pub(crate) fn term(cut: f64, volume: f64, parent: f64, total: f64) -> f64 {
    if volume <= 0.0 || cut == 0.0 {
        return 0.0;
    }
    -(cut / total) * (volume / parent).log2()
}

/// Entropy assigned to a single non-root node.
pub fn node_entropy(g: &WeightedGraph, t: &EncodingTree, alpha: NodeId) -> f64 {
    let parent = t.parent(alpha).expect("node entropy of the root");
    let stats = t.scratch_stats(g, None);
    term(
        stats[alpha].cut,
        stats[alpha].volume,
        stats[parent].volume,
        g.total_volume(),
    )
}

pub fn tree_entropy(g: &WeightedGraph, t: &EncodingTree) -> f64 {
    let stats = t.scratch_stats(g, None);
    t.node_ids()
        .filter(|&id| id != t.root())
        .map(|id| {
            let parent = t.parent(id).unwrap();
            term(
                stats[id].cut,
                stats[id].volume,
                stats[parent].volume,
                g.total_volume(),
            )
        })
        .sum()
}

/// Penalty over nodes holding more than one but fewer than all vertices.
pub fn tree_penalty(g: &WeightedGraph, rel: &RelationGraph, t: &EncodingTree) -> f64 {
    let n = g.n();
    let stats = t.scratch_stats(g, Some(rel));
    t.node_ids()
        .filter(|&id| id != t.root() && stats[id].size > 1 && stats[id].size < n)
        .map(|id| {
            let parent = t.parent(id).unwrap();
            term(
                stats[id].rel_cut,
                stats[id].volume,
                stats[parent].volume,
                g.total_volume(),
            )
        })
        .sum()
}

pub fn tree_objective(g: &WeightedGraph, rel: &RelationGraph, t: &EncodingTree, phi: f64) -> f64 {
    tree_entropy(g, t) + phi * tree_penalty(g, rel, t)
}

pub fn partition_entropy(g: &WeightedGraph, p: &Partition) -> f64 {
    let total = g.total_volume();
    let rel = RelationGraph::empty(g.n());
    let (volume, cut, _) = module_stats(g, &rel, p.assignment(), p.len());
    let vertex_terms: f64 = (0..g.n())
        .map(|v| {
            let d = g.degree(v);
            term(d, d, volume[p.assignment()[v]], total)
        })
        .sum();
    let module_terms: f64 = (0..p.len())
        .map(|m| term(cut[m], volume[m], total, total))
        .sum();
    vertex_terms + module_terms
}

pub fn partition_penalty(g: &WeightedGraph, rel: &RelationGraph, p: &Partition) -> f64 {
    let total = g.total_volume();
    let (volume, _, rel_cut) = module_stats(g, rel, p.assignment(), p.len());
    (0..p.len())
        .map(|m| term(rel_cut[m], volume[m], total, total))
        .sum()
}

pub fn partition_objective(g: &WeightedGraph, rel: &RelationGraph, p: &Partition, phi: f64) -> f64 {
    partition_entropy(g, p) + phi * partition_penalty(g, rel, p)
}
