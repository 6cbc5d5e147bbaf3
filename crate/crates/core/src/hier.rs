//! Greedy hierarchy construction: stretch the flat tree into a binary tree,
//! then compress it down to a target height.
//!
//! Write `c(a) = g_a + phi * g'_a` for nodes holding more than one but fewer
//! than all vertices and `c(a) = g_a` otherwise (zero when `V_a = 0`). A node
//! contributes `-(c(a) / V_G) * log2(V_a / V_parent)` to the tree objective.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::constraints::RelationGraph;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::objective::{tree_objective, Hyperparams};
use crate::partition::Partition;
use crate::tree::{EncodingTree, NodeId};

fn cost(size: usize, n: usize, volume: f64, cut: f64, rel_cut: f64, phi: f64) -> f64 {
    if volume <= 0.0 {
        0.0
    } else if size > 1 && size < n {
        cut + phi * rel_cut
    } else {
        cut
    }
}

fn node_cost(t: &EncodingTree, id: NodeId, phi: f64) -> f64 {
    let node = t.node(id);
    cost(
        node.size(),
        t.vertex_count(),
        node.volume(),
        node.cut(),
        node.rel_cut(),
        phi,
    )
}

/// Decrease of the tree objective when sisters `a` and `b` get a new common
/// parent. `link` and `rel_link` join their vertex sets in G and G'.
pub fn delta_stretch(
    t: &EncodingTree,
    a: NodeId,
    b: NodeId,
    link: f64,
    rel_link: f64,
    phi: f64,
) -> f64 {
    let (na, nb) = (t.node(a), t.node(b));
    let parent = t.parent(a).expect("stretch below the root");
    let volume = na.volume() + nb.volume();
    if volume <= 0.0 {
        return 0.0;
    }
    let merged = cost(
        na.size() + nb.size(),
        t.vertex_count(),
        volume,
        na.cut() + nb.cut() - 2.0 * link,
        na.rel_cut() + nb.rel_cut() - 2.0 * rel_link,
        phi,
    );
    let total = t.node(t.root()).volume();
    (node_cost(t, a, phi) + node_cost(t, b, phi) - merged)
        * (t.node(parent).volume() / volume).log2()
        / total
}

/// Decrease of the tree objective when internal node `a` is removed and its
/// children are handed to its parent.
pub fn delta_compress(t: &EncodingTree, a: NodeId, phi: f64) -> f64 {
    let node = t.node(a);
    let parent = node.parent().expect("compress the root");
    if node.volume() <= 0.0 {
        return 0.0;
    }
    let children: f64 = node.children().iter().map(|&c| node_cost(t, c, phi)).sum();
    let total = t.node(t.root()).volume();
    (children - node_cost(t, a, phi)) * (node.volume() / t.node(parent).volume()).log2() / total
}

#[derive(Clone, Copy, Debug)]
struct Scored {
    delta: f64,
    a: usize,
    b: usize,
    stamp: u64,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    // max-heap: larger delta first, then smaller ids
    fn cmp(&self, other: &Self) -> Ordering {
        self.delta
            .total_cmp(&other.delta)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StretchStep {
    pub a: NodeId,
    pub b: NodeId,
    pub parent: NodeId,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressStep {
    pub node: NodeId,
    pub delta: f64,
}

/// Stretching stage state. Only children of the root are paired, preferring
/// pairs linked in G or G'; once no linked pair is left, all pairs compete.
pub struct Stretcher {
    phi: f64,
    tree: EncodingTree,
    links: Vec<HashMap<NodeId, (f64, f64)>>,
    at_root: Vec<bool>,
    heap: BinaryHeap<Scored>,
    all_pairs: bool,
    objective: f64,
}

impl Stretcher {
    pub fn new(g: &WeightedGraph, rel: &RelationGraph, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let n = g.n();
        if rel.n() != n {
            return Err(Error::input(format!(
                "data graph has {n} vertices but relation graph has {}",
                rel.n()
            )));
        }
        let tree = EncodingTree::flat(g, rel);
        let mut links: Vec<HashMap<NodeId, (f64, f64)>> = vec![HashMap::new(); n + 1];
        for (u, v, w) in g.edges() {
            links[u].entry(v).or_default().0 += w;
            links[v].entry(u).or_default().0 += w;
        }
        for (u, v, w) in rel.edges() {
            links[u].entry(v).or_default().1 += w;
            links[v].entry(u).or_default().1 += w;
        }
        let mut at_root = vec![true; n + 1];
        at_root[n] = false;
        let objective = tree_objective(g, rel, &tree, hp.phi);
        let mut s = Self {
            phi: hp.phi,
            tree,
            links,
            at_root,
            heap: BinaryHeap::new(),
            all_pairs: false,
            objective,
        };
        for a in 0..n {
            let mut pairs: Vec<(usize, (f64, f64))> = s.links[a]
                .iter()
                .filter(|(&b, _)| b > a)
                .map(|(&b, &w)| (b, w))
                .collect();
            pairs.sort_unstable_by_key(|&(b, _)| b);
            for (b, (w, wr)) in pairs {
                s.push(a, b, w, wr);
            }
        }
        Ok(s)
    }

    fn push(&mut self, a: NodeId, b: NodeId, link: f64, rel_link: f64) {
        let (a, b) = (a.min(b), a.max(b));
        let delta = delta_stretch(&self.tree, a, b, link, rel_link, self.phi);
        self.heap.push(Scored {
            delta,
            a,
            b,
            stamp: 0,
        });
    }

    fn link(&self, a: NodeId, b: NodeId) -> (f64, f64) {
        self.links[a].get(&b).copied().unwrap_or_default()
    }

    fn push_all_pairs(&mut self) {
        let kids = self.tree.children(self.tree.root()).to_vec();
        for (i, &a) in kids.iter().enumerate() {
            for &b in &kids[i + 1..] {
                let (w, wr) = self.link(a, b);
                self.push(a, b, w, wr);
            }
        }
    }

    pub fn tree(&self) -> &EncodingTree {
        &self.tree
    }

    pub fn into_tree(self) -> EncodingTree {
        self.tree
    }

    /// Objective maintained from the applied gains.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn is_done(&self) -> bool {
        self.tree.children(self.tree.root()).len() <= 2
    }

    /// Applies the best stretch among the root's children, whatever its
    /// sign. Returns `None` once the root is binary.
    pub fn step(&mut self) -> Option<StretchStep> {
        if self.is_done() {
            return None;
        }
        let best = loop {
            match self.heap.pop() {
                Some(c) if self.at_root[c.a] && self.at_root[c.b] => break c,
                Some(_) => {}
                None => {
                    assert!(!self.all_pairs, "stretch candidates exhausted");
                    self.all_pairs = true;
                    self.push_all_pairs();
                }
            }
        };
        let (a, b) = (best.a, best.b);
        let (w, wr) = self.link(a, b);
        let d = self.tree.stretch_with_link(a, b, w, wr);
        self.at_root[a] = false;
        self.at_root[b] = false;
        self.at_root.push(true);

        let mut small = std::mem::take(&mut self.links[a]);
        let mut large = std::mem::take(&mut self.links[b]);
        if small.len() > large.len() {
            std::mem::swap(&mut small, &mut large);
        }
        for (z, (x, xr)) in small {
            let e = large.entry(z).or_default();
            e.0 += x;
            e.1 += xr;
        }
        large.remove(&a);
        large.remove(&b);
        for (&z, &lw) in &large {
            let zl = &mut self.links[z];
            zl.remove(&a);
            zl.remove(&b);
            zl.insert(d, lw);
        }
        self.links.push(large);
        if self.all_pairs {
            let kids = self.tree.children(self.tree.root()).to_vec();
            for z in kids {
                if z != d {
                    let (x, xr) = self.link(d, z);
                    self.push(d, z, x, xr);
                }
            }
        } else {
            let mut neighbors: Vec<(NodeId, (f64, f64))> =
                self.links[d].iter().map(|(&z, &l)| (z, l)).collect();
            neighbors.sort_unstable_by_key(|&(z, _)| z);
            for (z, (x, xr)) in neighbors {
                self.push(d, z, x, xr);
            }
        }
        self.objective -= best.delta;
        Some(StretchStep {
            a,
            b,
            parent: d,
            delta: best.delta,
        })
    }
}

/// Compressing stage state. Every non-root internal node is a candidate and
/// the best one is removed even when its gain is negative.
pub struct Compressor {
    phi: f64,
    tree: EncodingTree,
    stamp: Vec<u64>,
    heap: BinaryHeap<Scored>,
}

impl Compressor {
    pub fn new(tree: EncodingTree, phi: f64) -> Self {
        let mut c = Self {
            phi,
            stamp: vec![0; tree.id_bound()],
            tree,
            heap: BinaryHeap::new(),
        };
        for id in c.tree.internal_nodes().collect::<Vec<_>>() {
            c.push(id);
        }
        c
    }

    fn push(&mut self, id: NodeId) {
        let delta = delta_compress(&self.tree, id, self.phi);
        self.heap.push(Scored {
            delta,
            a: id,
            b: 0,
            stamp: self.stamp[id],
        });
    }

    pub fn tree(&self) -> &EncodingTree {
        &self.tree
    }

    pub fn into_tree(self) -> EncodingTree {
        self.tree
    }

    /// Removes the best internal node. Returns `None` when only the root and
    /// leaves remain.
    pub fn step(&mut self) -> Option<CompressStep> {
        let best = loop {
            let c = self.heap.pop()?;
            if self.tree.contains(c.a) && c.stamp == self.stamp[c.a] {
                break c;
            }
        };
        let id = best.a;
        let parent = self.tree.parent(id).unwrap();
        let children = self.tree.children(id).to_vec();
        self.tree.compress(id);
        self.stamp[id] += 1;
        let root = self.tree.root();
        for x in children
            .into_iter()
            .chain((parent != root).then_some(parent))
        {
            if !self.tree.node(x).is_leaf() {
                self.stamp[x] += 1;
                self.push(x);
            }
        }
        Some(CompressStep {
            node: id,
            delta: best.delta,
        })
    }
}

/// Compresses until the height is at most `k`; returns the tree and the
/// applied gains in order.
pub fn compress_to_height(tree: EncodingTree, k: usize, phi: f64) -> (EncodingTree, Vec<f64>) {
    let mut c = Compressor::new(tree, phi);
    let mut deltas = Vec::new();
    while c.tree().height() > k {
        match c.step() {
            Some(step) => deltas.push(step.delta),
            None => break,
        }
    }
    (c.into_tree(), deltas)
}

/// Flat clustering read off a tree: compress to height two and take the
/// root's children.
pub fn extract_partition(
    g: &WeightedGraph,
    rel: &RelationGraph,
    t: &EncodingTree,
    phi: f64,
) -> Result<Partition> {
    let (flat, _) = compress_to_height(t.clone(), 2, phi);
    Partition::from_modules(g, rel, &flat.top_level_sets())
}

#[derive(Clone, Debug)]
pub struct HierResult {
    /// Tree after stretching, with a binary root.
    pub binary: EncodingTree,
    /// Tree after compressing to the target height.
    pub tree: EncodingTree,
    /// Objective of the flat start and after each stretch.
    pub stretch_trace: Vec<f64>,
    /// Objective of the binary tree and after each compression.
    pub compress_trace: Vec<f64>,
    pub binary_height: usize,
    pub binary_objective: f64,
    pub objective: f64,
}

pub fn minimize_highd(
    g: &WeightedGraph,
    rel: &RelationGraph,
    hp: &Hyperparams,
) -> Result<HierResult> {
    let mut s = Stretcher::new(g, rel, hp)?;
    let mut stretch_trace = vec![s.objective()];
    while s.step().is_some() {
        stretch_trace.push(s.objective());
    }
    let binary = s.into_tree();
    let binary_height = binary.height();
    let binary_objective = tree_objective(g, rel, &binary, hp.phi);
    let (tree, deltas) = compress_to_height(binary.clone(), hp.height, hp.phi);
    let mut compress_trace = vec![binary_objective];
    for d in deltas {
        compress_trace.push(compress_trace.last().unwrap() - d);
    }
    let objective = tree_objective(g, rel, &tree, hp.phi);
    log::info!(
        "hierarchy: binary height {binary_height}, objective {binary_objective} -> {objective} at height {}",
        tree.height()
    );
    Ok(HierResult {
        binary,
        tree,
        stretch_trace,
        compress_trace,
        binary_height,
        binary_objective,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn triangle_stretch_and_compress_deltas() {
        let g = triangle();
        let rel = RelationGraph::empty(3);
        let mut t = EncodingTree::flat(&g, &rel);
        let gain = (2.0 / 6.0) * (6.0f64 / 4.0).log2();
        assert_abs_diff_eq!(
            delta_stretch(&t, 0, 1, 1.0, 0.0, 2.0),
            gain,
            epsilon = 1e-12
        );
        let d = t.stretch(&g, &rel, 0, 1);
        assert_abs_diff_eq!(delta_compress(&t, d, 2.0), -gain, epsilon = 1e-12);
    }

    #[test]
    fn unlinked_pair_stretch_is_zero() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 0.5)]).unwrap();
        let rel = RelationGraph::empty(4);
        let t = EncodingTree::flat(&g, &rel);
        assert_eq!(delta_stretch(&t, 1, 3, 0.0, 0.0, 2.0), 0.0);
        // leaves carry no penalty, so the new parent's relation cut counts
        let rel = RelationGraph::from_edges(4, [(0, 3, -1.0)]).unwrap();
        let t = EncodingTree::flat(&g, &rel);
        let expected = 2.0 * (5.0f64 / 2.5).log2() / 5.0;
        assert_abs_diff_eq!(
            delta_stretch(&t, 1, 3, 0.0, 0.0, 2.0),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn triangle_hierarchy() {
        let g = triangle();
        let rel = RelationGraph::empty(3);
        let hp = Hyperparams {
            height: 2,
            ..Hyperparams::default()
        };
        let r = minimize_highd(&g, &rel, &hp).unwrap();
        assert_eq!(r.binary.to_newick(), "((0,1),2);");
        assert_eq!(r.binary_height, 2);
        assert_eq!(r.tree, r.binary);
        assert_abs_diff_eq!(r.binary_objective, 1.38997, epsilon = 1e-5);
        let p = extract_partition(&g, &rel, &r.binary, 2.0).unwrap();
        assert_eq!(p.modules(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn disconnected_vertices_still_reach_binary_root() {
        let g = WeightedGraph::from_edges(5, [(0, 1, 1.0)]).unwrap();
        let rel = RelationGraph::empty(5);
        let r = minimize_highd(&g, &rel, &Hyperparams::default()).unwrap();
        assert_eq!(r.binary.children(r.binary.root()).len(), 2);
        assert_eq!(r.stretch_trace.len(), 4);
        r.binary.validate(&g, &rel).unwrap();
        assert!(r.tree.height() <= 3);
    }

    #[test]
    fn compress_to_one_leaves_flat_tree() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let rel = RelationGraph::empty(4);
        let r = minimize_highd(&g, &rel, &Hyperparams::default()).unwrap();
        let (flat, deltas) = compress_to_height(r.binary.clone(), 1, 0.0);
        assert_eq!(flat.height(), 1);
        assert_eq!(deltas.len(), r.binary.internal_nodes().count());
        flat.validate(&g, &rel).unwrap();
    }
}
