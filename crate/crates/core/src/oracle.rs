//! Slow reference implementations for tests: exhaustive partition search,
//! delta residuals and an independent constraint closure.

use std::collections::{BTreeSet, VecDeque};

use crate::constraints::{Pair, RelationGraph};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::objective::{partition_objective, tree_objective};
use crate::partition::Partition;
use crate::tree::EncodingTree;

pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Visits every set partition of `0..n` as a restricted growth string, in
/// lexicographic order.
pub fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut a = vec![0usize; n];
    // prefix maxima: m[i] = max(a[0..i])
    let mut m = vec![0usize; n];
    loop {
        visit(&a);
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if a[i] <= m[i] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        for j in i + 1..n {
            a[j] = 0;
            m[j] = m[j - 1].max(a[j - 1]);
        }
    }
}

/// Minimum of the partition objective over all set partitions. Ties keep the
/// lexicographically first labeling.
pub fn brute_force_min_2d(
    g: &WeightedGraph,
    rel: &RelationGraph,
    phi: f64,
) -> Result<(Partition, f64)> {
    let n = g.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut failure = None;
    for_each_set_partition(n, |labels| {
        if failure.is_some() {
            return;
        }
        match Partition::from_assignment(g, rel, labels) {
            Ok(p) => {
                let value = partition_objective(g, rel, &p, phi);
                if best.as_ref().is_none_or(|(_, b)| value < b - 1e-12) {
                    best = Some((labels.to_vec(), value));
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (labels, value) = best.expect("at least one partition");
    Ok((Partition::from_assignment(g, rel, &labels)?, value))
}

/// `|(L(before) - L(after)) - reported|` for flat partitions.
pub fn recompute_check(
    g: &WeightedGraph,
    rel: &RelationGraph,
    phi: f64,
    before: &Partition,
    after: &Partition,
    reported: f64,
) -> f64 {
    let actual = partition_objective(g, rel, before, phi) - partition_objective(g, rel, after, phi);
    (actual - reported).abs()
}

/// `|(L(before) - L(after)) - reported|` for encoding trees.
pub fn recompute_check_tree(
    g: &WeightedGraph,
    rel: &RelationGraph,
    phi: f64,
    before: &EncodingTree,
    after: &EncodingTree,
    reported: f64,
) -> f64 {
    let actual = tree_objective(g, rel, before, phi) - tree_objective(g, rel, after, phi);
    (actual - reported).abs()
}

/// Must-link components by breadth-first search, then every cannot-link
/// expanded to the product of its endpoints' components.
pub fn transitive_closure_reference(
    n: usize,
    must: &BTreeSet<Pair>,
    cannot: &BTreeSet<Pair>,
) -> Result<(BTreeSet<Pair>, BTreeSet<Pair>)> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in must {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut group = vec![s];
        comp[s] = id;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    group.push(v);
                    queue.push_back(v);
                }
            }
        }
        groups.push(group);
    }
    let mut must_star = BTreeSet::new();
    for group in &groups {
        for &u in group {
            for &v in group {
                if u < v {
                    must_star.insert((u, v));
                }
            }
        }
    }
    let mut cannot_star = BTreeSet::new();
    for &(b, c) in cannot {
        for &u in &groups[comp[b]] {
            for &v in &groups[comp[c]] {
                if u != v {
                    cannot_star.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    if let Some(&(i, j)) = must_star.intersection(&cannot_star).next() {
        return Err(Error::ConstraintConflict(i, j));
    }
    Ok((must_star, cannot_star))
}
