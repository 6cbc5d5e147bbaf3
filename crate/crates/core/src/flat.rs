//! Greedy flat clustering: agglomerative merging followed by single-vertex
//! moves.
//!
//! The partition objective splits as a vertex-only constant plus one term per
//! module,
//!
//! ```text
//! T(S) = ((V_S - g_S - phi * g'_S) / V_G) * log2(V_S / V_G)
//! ```
//!
//! so every operator's gain is a difference of a few `T` values.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::constraints::RelationGraph;
use crate::error::{Error, Result};
use crate::graph::{EdgeWeights, WeightedGraph};
use crate::objective::{partition_objective, Hyperparams};
use crate::partition::Partition;
use crate::tree::EncodingTree;

/// Volume in G and cuts in G and G' of a vertex set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModuleStats {
    pub volume: f64,
    pub cut: f64,
    pub rel_cut: f64,
}

impl ModuleStats {
    /// Stats of a single vertex.
    pub fn vertex(g: &WeightedGraph, rel: &RelationGraph, v: usize) -> Self {
        Self {
            volume: g.degree(v),
            cut: g.degree(v),
            rel_cut: rel.signed_degree(v),
        }
    }

    /// Union of two disjoint sets joined by `link` in G and `rel_link` in G'.
    pub fn join(self, other: Self, link: f64, rel_link: f64) -> Self {
        Self {
            volume: self.volume + other.volume,
            cut: self.cut + other.cut - 2.0 * link,
            rel_cut: self.rel_cut + other.rel_cut - 2.0 * rel_link,
        }
    }

    /// `self` minus a member with stats `part`, where `link` and `rel_link`
    /// join `part` to the remainder.
    pub fn without(self, part: Self, link: f64, rel_link: f64) -> Self {
        Self {
            volume: self.volume - part.volume,
            cut: self.cut - part.cut + 2.0 * link,
            rel_cut: self.rel_cut - part.rel_cut + 2.0 * rel_link,
        }
    }
}

/// Per-module share of the objective; zero for a set of zero volume.
pub fn module_term(s: ModuleStats, phi: f64, total: f64) -> f64 {
    if s.volume <= 0.0 {
        return 0.0;
    }
    ((s.volume - s.cut - phi * s.rel_cut) / total) * (s.volume / total).log2()
}

/// Decrease of the objective when modules `x` and `y` are merged.
pub fn delta_merge(
    x: ModuleStats,
    y: ModuleStats,
    link: f64,
    rel_link: f64,
    phi: f64,
    total: f64,
) -> f64 {
    module_term(x, phi, total) + module_term(y, phi, total)
        - module_term(x.join(y, link, rel_link), phi, total)
}

/// Change of `x`'s term when vertex `v` (stats `vs`) leaves it. `link` and
/// `rel_link` connect `v` to the rest of `x`.
pub fn delta_remove(
    x: ModuleStats,
    vs: ModuleStats,
    link: f64,
    rel_link: f64,
    phi: f64,
    total: f64,
) -> f64 {
    let rest = x.without(vs, link, rel_link);
    let rest_term = if rest.volume <= 0.0 {
        0.0
    } else {
        module_term(rest, phi, total)
    };
    module_term(x, phi, total) - rest_term
}

/// Change of `y`'s term when vertex `v` (stats `vs`) joins it. `link` and
/// `rel_link` connect `v` to `y`.
pub fn delta_insert(
    y: ModuleStats,
    vs: ModuleStats,
    link: f64,
    rel_link: f64,
    phi: f64,
    total: f64,
) -> f64 {
    module_term(y.join(vs, link, rel_link), phi, total) - module_term(y, phi, total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeStep {
    /// Surviving module id (the smaller of the two).
    pub into: usize,
    pub from: usize,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveStep {
    pub vertex: usize,
    pub from: usize,
    pub to: usize,
    pub gain: f64,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    delta: f64,
    a: usize,
    b: usize,
    stamp_a: u64,
    stamp_b: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // max-heap: larger delta first, then the smaller id pair
    fn cmp(&self, other: &Self) -> Ordering {
        self.delta
            .total_cmp(&other.delta)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

/// Incremental optimizer state. Module ids start as vertex ids; a merge keeps
/// the smaller id.
pub struct FlatOptimizer<'a> {
    g: &'a WeightedGraph,
    rel: &'a RelationGraph,
    phi: f64,
    tol: f64,
    total: f64,
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    position: Vec<usize>,
    stats: Vec<ModuleStats>,
    links: Vec<HashMap<usize, (f64, f64)>>,
    stamp: Vec<u64>,
    heap: BinaryHeap<Candidate>,
    objective: f64,
    merging_open: bool,
    // scratch for per-vertex link accumulation
    acc: Vec<(f64, f64)>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl<'a> FlatOptimizer<'a> {
    /// Singleton start.
    pub fn new(g: &'a WeightedGraph, rel: &'a RelationGraph, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let n = g.n();
        if rel.n() != n {
            return Err(Error::input(format!(
                "data graph has {n} vertices but relation graph has {}",
                rel.n()
            )));
        }
        let stats: Vec<ModuleStats> = (0..n).map(|v| ModuleStats::vertex(g, rel, v)).collect();
        let mut links: Vec<HashMap<usize, (f64, f64)>> = vec![HashMap::new(); n];
        for (u, v, w) in g.edges() {
            links[u].entry(v).or_default().0 += w;
            links[v].entry(u).or_default().0 += w;
        }
        for (u, v, w) in rel.edges() {
            links[u].entry(v).or_default().1 += w;
            links[v].entry(u).or_default().1 += w;
        }
        let singletons = Partition::singletons(g, rel)?;
        let mut opt = Self {
            g,
            rel,
            phi: hp.phi,
            tol: hp.tol,
            total: g.total_volume(),
            assignment: (0..n).collect(),
            members: (0..n).map(|v| vec![v]).collect(),
            position: vec![0; n],
            stats,
            links,
            stamp: vec![0; n],
            heap: BinaryHeap::new(),
            objective: partition_objective(g, rel, &singletons, hp.phi),
            merging_open: true,
            acc: vec![(0.0, 0.0); n],
            seen: vec![false; n],
            touched: Vec::new(),
        };
        for a in 0..n {
            let mut pairs: Vec<(usize, (f64, f64))> = opt.links[a]
                .iter()
                .filter(|(&b, _)| b > a)
                .map(|(&b, &w)| (b, w))
                .collect();
            pairs.sort_unstable_by_key(|&(b, _)| b);
            for (b, (w, wr)) in pairs {
                opt.push_candidate(a, b, w, wr);
            }
        }
        Ok(opt)
    }

    fn push_candidate(&mut self, a: usize, b: usize, link: f64, rel_link: f64) {
        let (a, b) = (a.min(b), a.max(b));
        let delta = delta_merge(
            self.stats[a],
            self.stats[b],
            link,
            rel_link,
            self.phi,
            self.total,
        );
        self.heap.push(Candidate {
            delta,
            a,
            b,
            stamp_a: self.stamp[a],
            stamp_b: self.stamp[b],
        });
    }

    fn is_live(&self, c: &Candidate) -> bool {
        c.stamp_a == self.stamp[c.a]
            && c.stamp_b == self.stamp[c.b]
            && !self.members[c.a].is_empty()
            && !self.members[c.b].is_empty()
    }

    /// Current objective, maintained incrementally.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn module_count(&self) -> usize {
        self.members.iter().filter(|m| !m.is_empty()).count()
    }

    /// Best merge gain available, without applying it.
    pub fn peek_merge(&mut self) -> Option<MergeStep> {
        while let Some(top) = self.heap.peek() {
            if self.is_live(top) {
                return Some(MergeStep {
                    into: top.a,
                    from: top.b,
                    delta: top.delta,
                });
            }
            self.heap.pop();
        }
        None
    }

    /// Applies the best merge if its gain exceeds the tolerance. Merging is
    /// closed once any vertex has been moved.
    pub fn merge_step(&mut self) -> Option<MergeStep> {
        if !self.merging_open {
            return None;
        }
        let step = self.peek_merge()?;
        if step.delta <= self.tol {
            return None;
        }
        self.heap.pop();
        self.apply_merge(step.into, step.from);
        self.objective -= step.delta;
        Some(step)
    }

    fn apply_merge(&mut self, keep: usize, gone: usize) {
        let (link, rel_link) = self.links[keep].get(&gone).copied().unwrap_or_default();
        self.stats[keep] = self.stats[keep].join(self.stats[gone], link, rel_link);
        self.stats[gone] = ModuleStats::default();
        self.stamp[keep] += 1;
        self.stamp[gone] += 1;

        let moved = std::mem::take(&mut self.members[gone]);
        for &v in &moved {
            self.assignment[v] = keep;
            self.position[v] = self.members[keep].len();
            self.members[keep].push(v);
        }

        // fold the smaller link map into the larger one
        let mut small = std::mem::take(&mut self.links[gone]);
        let mut large = std::mem::take(&mut self.links[keep]);
        if small.len() > large.len() {
            std::mem::swap(&mut small, &mut large);
        }
        for (z, (w, wr)) in small {
            if z == keep || z == gone {
                continue;
            }
            let e = large.entry(z).or_default();
            e.0 += w;
            e.1 += wr;
        }
        large.remove(&keep);
        large.remove(&gone);
        for (&z, &w) in &large {
            let zl = &mut self.links[z];
            zl.remove(&gone);
            zl.insert(keep, w);
        }
        let mut neighbors: Vec<(usize, (f64, f64))> = large.iter().map(|(&z, &w)| (z, w)).collect();
        self.links[keep] = large;
        neighbors.sort_unstable_by_key(|&(z, _)| z);
        for (z, (w, wr)) in neighbors {
            self.push_candidate(keep, z, w, wr);
        }
    }

    fn accumulate_links(&mut self, v: usize) {
        for &m in &self.touched {
            self.acc[m] = (0.0, 0.0);
            self.seen[m] = false;
        }
        self.touched.clear();
        let (g, rel) = (self.g, self.rel);
        let edges = g.neighbors(v).iter().map(|&(u, w)| (u, w, false));
        let rel_edges = rel.neighbors(v).iter().map(|&(u, w)| (u, w, true));
        for (u, w, relation) in edges.chain(rel_edges) {
            let m = self.assignment[u];
            if !std::mem::replace(&mut self.seen[m], true) {
                self.touched.push(m);
            }
            if relation {
                self.acc[m].1 += w;
            } else {
                self.acc[m].0 += w;
            }
        }
    }

    /// Moves `v` to the neighboring module with the best gain if it exceeds
    /// the tolerance.
    pub fn move_vertex(&mut self, v: usize) -> Option<MoveStep> {
        self.accumulate_links(v);
        let from = self.assignment[v];
        let vs = ModuleStats::vertex(self.g, self.rel, v);
        let (own, own_rel) = self.acc[from];
        let removal = delta_remove(self.stats[from], vs, own, own_rel, self.phi, self.total);
        let mut targets = self.touched.clone();
        targets.sort_unstable();
        let mut best: Option<(f64, usize)> = None;
        for y in targets {
            if y == from {
                continue;
            }
            let (w, wr) = self.acc[y];
            let gain = removal - delta_insert(self.stats[y], vs, w, wr, self.phi, self.total);
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, y));
            }
        }
        let (gain, to) = best?;
        if gain <= self.tol {
            return None;
        }
        self.merging_open = false;
        let (w_to, wr_to) = self.acc[to];
        self.stats[from] = self.stats[from].without(vs, own, own_rel);
        self.stats[to] = self.stats[to].join(vs, w_to, wr_to);
        let pos = self.position[v];
        self.members[from].swap_remove(pos);
        if let Some(&u) = self.members[from].get(pos) {
            self.position[u] = pos;
        }
        if self.members[from].is_empty() {
            self.stats[from] = ModuleStats::default();
        }
        self.position[v] = self.members[to].len();
        self.members[to].push(v);
        self.assignment[v] = to;
        self.objective -= gain;
        Some(MoveStep {
            vertex: v,
            from,
            to,
            gain,
        })
    }

    /// One pass over all vertices in ascending order; returns the number of
    /// moves made.
    pub fn sweep(&mut self) -> usize {
        (0..self.g.n())
            .filter(|&v| self.move_vertex(v).is_some())
            .count()
    }

    /// Snapshot with the incrementally maintained caches. Modules are listed
    /// by ascending internal id, members sorted.
    pub fn partition(&self) -> Partition {
        let live: Vec<usize> = (0..self.members.len())
            .filter(|&m| !self.members[m].is_empty())
            .collect();
        let mut index = vec![usize::MAX; self.members.len()];
        for (i, &m) in live.iter().enumerate() {
            index[m] = i;
        }
        let modules = live
            .iter()
            .map(|&m| {
                let mut ms = self.members[m].clone();
                ms.sort_unstable();
                ms
            })
            .collect();
        let assignment = self.assignment.iter().map(|&m| index[m]).collect();
        Partition::from_parts(
            assignment,
            modules,
            live.iter().map(|&m| self.stats[m].volume).collect(),
            live.iter().map(|&m| self.stats[m].cut).collect(),
            live.iter().map(|&m| self.stats[m].rel_cut).collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct FlatResult {
    pub partition: Partition,
    pub tree: EncodingTree,
    /// Objective at the start, after each merge and after each sweep.
    pub trace: Vec<f64>,
    pub merges: usize,
    pub sweeps: usize,
    pub moves: usize,
    /// False when the sweep limit was hit while vertices were still moving.
    pub converged: bool,
    pub objective: f64,
}

/// Merges while some merge lowers the objective, then sweeps single-vertex
/// moves until a sweep moves nothing or `hp.t_max` sweeps have run.
pub fn minimize_2d(g: &WeightedGraph, rel: &RelationGraph, hp: &Hyperparams) -> Result<FlatResult> {
    let mut opt = FlatOptimizer::new(g, rel, hp)?;
    let mut trace = vec![opt.objective()];
    let mut merges = 0;
    while hp.max_merges.is_none_or(|cap| merges < cap) {
        if opt.merge_step().is_none() {
            break;
        }
        merges += 1;
        trace.push(opt.objective());
    }
    let mut sweeps = 0;
    let mut moves = 0;
    let mut converged = false;
    while sweeps < hp.t_max {
        let moved = opt.sweep();
        sweeps += 1;
        moves += moved;
        trace.push(opt.objective());
        if moved == 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("moving stage stopped after {sweeps} sweeps without converging");
    }
    let partition = opt.partition();
    let tree = EncodingTree::from_partition(g, rel, &partition);
    let objective = partition_objective(g, rel, &partition, hp.phi);
    log::info!(
        "flat optimizer: {merges} merges, {sweeps} sweeps, {moves} moves, {} modules, objective {objective}",
        partition.len()
    );
    Ok(FlatResult {
        partition,
        tree,
        trace,
        merges,
        sweeps,
        moves,
        converged,
        objective,
    })
}
