//! Prior knowledge: must-link / cannot-link pairs and positive / negative
//! label constraints, their conversion to a single pairwise form, closure
//! under transitivity and entailment, and the signed relation graph built
//! from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeWeights, SimilarityMatrix, SparseSymmetric, WeightedGraph};

/// Class label attached to a data point.
pub type Label = i64;

/// Unordered vertex pair stored as `(min, max)`.
pub type Pair = (usize, usize);

fn pair(i: usize, j: usize) -> Result<Pair> {
    if i == j {
        return Err(Error::input(format!(
            "pairwise constraint needs distinct vertices, got ({i}, {i})"
        )));
    }
    Ok((i.min(j), i.max(j)))
}

/// Raw constraint sets as supplied by the user or sampled from labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub must_link: BTreeSet<Pair>,
    pub cannot_link: BTreeSet<Pair>,
    /// `(v, y)`: vertex `v` belongs to class `y`.
    pub positive_labels: BTreeSet<(usize, Label)>,
    /// `(v, y)`: vertex `v` does not belong to class `y`.
    pub negative_labels: BTreeSet<(usize, Label)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty()
            && self.cannot_link.is_empty()
            && self.positive_labels.is_empty()
            && self.negative_labels.is_empty()
    }

    pub fn add_must_link(&mut self, i: usize, j: usize) -> Result<()> {
        self.must_link.insert(pair(i, j)?);
        Ok(())
    }

    pub fn add_cannot_link(&mut self, i: usize, j: usize) -> Result<()> {
        self.cannot_link.insert(pair(i, j)?);
        Ok(())
    }

    pub fn add_positive(&mut self, v: usize, label: Label) {
        self.positive_labels.insert((v, label));
    }

    pub fn add_negative(&mut self, v: usize, label: Label) {
        self.negative_labels.insert((v, label));
    }

    /// Checks vertex ranges and that no constraint is stated both ways.
    pub fn validate(&self, n: usize) -> Result<()> {
        let max_vertex = self
            .must_link
            .iter()
            .chain(&self.cannot_link)
            .map(|&(_, j)| j)
            .chain(self.positive_labels.iter().map(|&(v, _)| v))
            .chain(self.negative_labels.iter().map(|&(v, _)| v))
            .max();
        if let Some(v) = max_vertex.filter(|&v| v >= n) {
            return Err(Error::input(format!(
                "constraint references vertex {v} but there are only {n} vertices"
            )));
        }
        if let Some(&(i, j)) = self.must_link.intersection(&self.cannot_link).next() {
            return Err(Error::ConstraintConflict(i, j));
        }
        if let Some(&(v, y)) = self
            .positive_labels
            .intersection(&self.negative_labels)
            .next()
        {
            return Err(Error::input(format!(
                "vertex {v} is stated both in and not in class {y}"
            )));
        }
        Ok(())
    }

    /// Parses the line format `ML i j`, `CL i j`, `PL i label`, `NL i label`.
    /// Text after `#` is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad =
                |why: &str| Error::input(format!("constraint line {}: {why}: {raw:?}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad("expected 3 fields"));
            }
            let v: usize = fields[1].parse().map_err(|_| bad("bad vertex index"))?;
            match fields[0] {
                "ML" | "CL" => {
                    let u: usize = fields[2].parse().map_err(|_| bad("bad vertex index"))?;
                    let p = pair(v, u).map_err(|_| bad("identical endpoints"))?;
                    if fields[0] == "ML" {
                        set.must_link.insert(p);
                    } else {
                        set.cannot_link.insert(p);
                    }
                }
                "PL" | "NL" => {
                    let y: Label = fields[2].parse().map_err(|_| bad("bad label"))?;
                    if fields[0] == "PL" {
                        set.add_positive(v, y);
                    } else {
                        set.add_negative(v, y);
                    }
                }
                _ => return Err(bad("unknown constraint kind")),
            }
        }
        Ok(set)
    }

    /// Renders in the format accepted by [`ConstraintSet::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(i, j) in &self.must_link {
            let _ = writeln!(out, "ML {i} {j}");
        }
        for &(i, j) in &self.cannot_link {
            let _ = writeln!(out, "CL {i} {j}");
        }
        for &(v, y) in &self.positive_labels {
            let _ = writeln!(out, "PL {v} {y}");
        }
        for &(v, y) in &self.negative_labels {
            let _ = writeln!(out, "NL {v} {y}");
        }
        out
    }
}

/// Converts label constraints into pairwise ones:
/// two positives with the same label give a must-link, two positives with
/// different labels give a cannot-link, and a positive and a negative with
/// the same label give a cannot-link. Two negatives give nothing.
pub fn labels_to_pairwise(
    positive: &BTreeSet<(usize, Label)>,
    negative: &BTreeSet<(usize, Label)>,
) -> (BTreeSet<Pair>, BTreeSet<Pair>) {
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for &(v, y) in positive {
        by_label.entry(y).or_default().push(v);
    }
    let mut must = BTreeSet::new();
    let mut cannot = BTreeSet::new();

    let groups: Vec<(&Label, &Vec<usize>)> = by_label.iter().collect();
    for (gi, (_, members)) in groups.iter().enumerate() {
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                if u != v {
                    must.insert((u.min(v), u.max(v)));
                }
            }
        }
        for (_, others) in &groups[gi + 1..] {
            for &u in members.iter() {
                for &v in others.iter() {
                    if u != v {
                        cannot.insert((u.min(v), u.max(v)));
                    }
                }
            }
        }
    }
    for &(u, y) in negative {
        if let Some(members) = by_label.get(&y) {
            for &v in members {
                if u != v {
                    cannot.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    (must, cannot)
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[v] != root {
            let next = self.parent[v];
            self.parent[v] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Must-link and cannot-link sets closed under transitivity and entailment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosedConstraints {
    pub must_link: BTreeSet<Pair>,
    pub cannot_link: BTreeSet<Pair>,
}

impl ClosedConstraints {
    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty() && self.cannot_link.is_empty()
    }
}

fn close_once(
    n: usize,
    must: &BTreeSet<Pair>,
    cannot: &BTreeSet<Pair>,
) -> Result<ClosedConstraints> {
    let mut dsu = DisjointSet::new(n);
    for &(i, j) in must {
        dsu.union(i, j);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let root = dsu.find(v);
        members.entry(root).or_default().push(v);
    }

    let mut closed = ClosedConstraints::default();
    for group in members.values().filter(|g| g.len() > 1) {
        for (a, &u) in group.iter().enumerate() {
            for &v in &group[a + 1..] {
                closed.must_link.insert((u, v));
            }
        }
    }
    for &(b, c) in cannot {
        let (rb, rc) = (dsu.find(b), dsu.find(c));
        if rb == rc {
            return Err(Error::ConstraintConflict(b, c));
        }
        for &u in &members[&rb] {
            for &v in &members[&rc] {
                closed.cannot_link.insert((u.min(v), u.max(v)));
            }
        }
    }
    Ok(closed)
}

/// Transitive closure of the must-links followed by entailment of the
/// cannot-links across must-link components. A pair that lands on both
/// sides is reported as a conflict.
pub fn closure(
    n: usize,
    must: &BTreeSet<Pair>,
    cannot: &BTreeSet<Pair>,
) -> Result<ClosedConstraints> {
    if let Some(&(_, j)) = must.iter().chain(cannot).max_by_key(|p| p.1) {
        if j >= n {
            return Err(Error::input(format!(
                "constraint references vertex {j} but there are only {n} vertices"
            )));
        }
    }
    let closed = close_once(n, must, cannot)?;
    let again = close_once(n, &closed.must_link, &closed.cannot_link)?;
    if again != closed {
        return Err(Error::input("constraint closure is not idempotent"));
    }
    Ok(closed)
}

/// Pairwise similarity lookups used to weight constraint edges.
pub trait SimilaritySource {
    fn vertex_count(&self) -> usize;
    fn similarity(&self, i: usize, j: usize) -> f64;
    /// Minimum and maximum similarity over all distinct pairs.
    fn similarity_extrema(&self) -> (f64, f64);
}

impl SimilaritySource for SimilarityMatrix {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn similarity(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    fn similarity_extrema(&self) -> (f64, f64) {
        self.extrema()
    }
}

/// Absent edges count as similarity zero.
impl SimilaritySource for WeightedGraph {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn similarity(&self, i: usize, j: usize) -> f64 {
        self.weight(i, j)
    }

    fn similarity_extrema(&self) -> (f64, f64) {
        let n = self.n();
        let complete = self.edge_count() == n * n.saturating_sub(1) / 2;
        let (lo, hi) = self
            .edges()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, _, w)| {
                (lo.min(w), hi.max(w))
            });
        (if complete { lo } else { 0.0 }, hi)
    }
}

/// How constraint pairs are turned into signed weights:
/// `gamma_M = max(W) - W_ij` for must-links and
/// `gamma_C = rho * (min(W) - W_ij)` for cannot-links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightPolicy {
    pub max_similarity: f64,
    pub min_similarity: f64,
    pub rho: f64,
}

impl WeightPolicy {
    /// `rho` is the must-link to cannot-link count ratio, or 1 when either
    /// side is empty.
    pub fn new(sim: &impl SimilaritySource, must_count: usize, cannot_count: usize) -> Self {
        let (min_similarity, max_similarity) = sim.similarity_extrema();
        let rho = if must_count == 0 || cannot_count == 0 {
            1.0
        } else {
            must_count as f64 / cannot_count as f64
        };
        Self {
            max_similarity,
            min_similarity,
            rho,
        }
    }

    pub fn must_link_weight(&self, similarity: f64) -> f64 {
        self.max_similarity - similarity
    }

    pub fn cannot_link_weight(&self, similarity: f64) -> f64 {
        self.rho * (self.min_similarity - similarity)
    }
}

/// Signed constraint graph sharing the data graph's vertex set. Positive
/// weights encode must-link strength, negative weights cannot-link strength.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    adj: SparseSymmetric,
    signed_degree: Vec<f64>,
}

impl RelationGraph {
    /// Repeated edges accumulate; zero-weight edges are kept.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let adj = SparseSymmetric::from_edges(n, edges, true, true)?;
        let signed_degree = (0..n)
            .map(|v| adj.row(v).iter().map(|&(_, w)| w).sum())
            .collect();
        Ok(Self { adj, signed_degree })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adj: SparseSymmetric::empty(n),
            signed_degree: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.adj.vertex_count()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.edge_count() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.adj.edge_count()
    }

    /// Sum of signed weights incident to `v`.
    pub fn signed_degree(&self, v: usize) -> f64 {
        self.signed_degree[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.edges()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj.weight(i, j)
    }
}

impl EdgeWeights for RelationGraph {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        self.adj.row(v)
    }
}

/// Weights closed constraints into a relation graph. `rho` is counted on
/// the closed sets before any cannot-link weight is assigned.
pub fn build_relation_graph(
    closed: &ClosedConstraints,
    sim: &impl SimilaritySource,
) -> Result<RelationGraph> {
    let policy = WeightPolicy::new(sim, closed.must_link.len(), closed.cannot_link.len());
    let must = closed
        .must_link
        .iter()
        .map(|&(i, j)| (i, j, policy.must_link_weight(sim.similarity(i, j))));
    let cannot = closed
        .cannot_link
        .iter()
        .map(|&(i, j)| (i, j, policy.cannot_link_weight(sim.similarity(i, j))));
    RelationGraph::from_edges(sim.vertex_count(), must.chain(cannot))
}

/// Full path from raw constraints to the relation graph: label conversion,
/// union with the explicit pairs, closure, weighting.
pub fn relation_graph_for(
    constraints: &ConstraintSet,
    sim: &impl SimilaritySource,
) -> Result<RelationGraph> {
    let n = sim.vertex_count();
    constraints.validate(n)?;
    let (mut must, mut cannot) =
        labels_to_pairwise(&constraints.positive_labels, &constraints.negative_labels);
    must.extend(constraints.must_link.iter().copied());
    cannot.extend(constraints.cannot_link.iter().copied());
    let closed = closure(n, &must, &cannot)?;
    build_relation_graph(&closed, sim)
}

/// Which kind of constraint to sample from ground-truth labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Pairwise,
    Label,
}

impl FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Self::Pairwise),
            "label" => Ok(Self::Label),
            other => Err(Error::input(format!(
                "unknown constraint kind {other:?} (expected pairwise or label)"
            ))),
        }
    }
}

fn choose2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Samples `ceil(amount * n)` constraints of each polarity from labels.
///
/// Pairwise: that many must-links drawn uniformly from same-label pairs and
/// that many cannot-links from different-label pairs. Label: that many
/// positive constraints on distinct vertices with their true label, and
/// that many negative constraints on distinct vertices with a uniformly
/// chosen wrong label. Requests beyond what is available are capped with a
/// warning.
pub fn generate_constraints(
    labels: &[Label],
    kind: ConstraintKind,
    amount: f64,
    seed: u64,
) -> Result<ConstraintSet> {
    if !(amount.is_finite() && (0.0..=1.0).contains(&amount)) {
        return Err(Error::input(format!(
            "constraint amount must be in [0, 1], got {amount}"
        )));
    }
    let n = labels.len();
    let count = (amount * n as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ConstraintSet::new();
    if count == 0 {
        return Ok(set);
    }

    // vertices grouped by label, in label order
    let mut classes: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (v, &y) in labels.iter().enumerate() {
        classes.entry(y).or_default().push(v);
    }

    match kind {
        ConstraintKind::Pairwise => {
            let same_pairs: usize = classes.values().map(|c| choose2(c.len())).sum();
            let cross_pairs = choose2(n) - same_pairs;
            set.must_link = sample_pairs(labels, &classes, count, same_pairs, true, &mut rng);
            set.cannot_link = sample_pairs(labels, &classes, count, cross_pairs, false, &mut rng);
        }
        ConstraintKind::Label => {
            let take = if count > n {
                warn!("requested {count} label constraints but only {n} points; capping");
                n
            } else {
                count
            };
            for v in index::sample(&mut rng, n, take).into_iter() {
                set.add_positive(v, labels[v]);
            }
            if classes.len() < 2 {
                warn!("only one class present; no negative-label constraint is possible");
            } else {
                let names: Vec<Label> = classes.keys().copied().collect();
                for v in index::sample(&mut rng, n, take).into_iter() {
                    let own = names.binary_search(&labels[v]).expect("label is present");
                    let mut pick = rng.random_range(0..names.len() - 1);
                    if pick >= own {
                        pick += 1;
                    }
                    set.add_negative(v, names[pick]);
                }
            }
        }
    }
    Ok(set)
}

fn sample_pairs(
    labels: &[Label],
    classes: &BTreeMap<Label, Vec<usize>>,
    count: usize,
    available: usize,
    same: bool,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<Pair> {
    let what = if same { "must-link" } else { "cannot-link" };
    let admissible = |i: usize, j: usize| (labels[i] == labels[j]) == same;
    let n = labels.len();

    if count >= available || 2 * count >= available {
        if count > available {
            warn!("requested {count} {what} constraints but only {available} pairs exist; capping");
        }
        let all: Vec<Pair> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| admissible(i, j))
            .collect();
        let take = count.min(all.len());
        return index::sample(rng, all.len(), take)
            .into_iter()
            .map(|k| all[k])
            .collect();
    }

    // Vertices laid out class by class so "any vertex outside class c" is a
    // contiguous index range with a hole.
    let order: Vec<usize> = classes.values().flatten().copied().collect();
    let mut start = BTreeMap::new();
    let mut offset = 0;
    for (&y, members) in classes {
        start.insert(y, offset);
        offset += members.len();
    }
    let mut rank_in_class = vec![0; n];
    for members in classes.values() {
        for (r, &v) in members.iter().enumerate() {
            rank_in_class[v] = r;
        }
    }
    let class_size = |v: usize| classes[&labels[v]].len();
    let partners = |v: usize| {
        if same {
            class_size(v) - 1
        } else {
            n - class_size(v)
        }
    };
    // Drawing the first endpoint proportionally to its partner count and the
    // second uniformly among partners gives each admissible pair equal mass.
    let first = WeightedIndex::new((0..n).map(partners)).expect("some pair is admissible");

    let mut out = BTreeSet::new();
    while out.len() < count {
        let i = first.sample(rng);
        let size = class_size(i);
        let base = start[&labels[i]];
        let j = if same {
            let mut r = rng.random_range(0..size - 1);
            if r >= rank_in_class[i] {
                r += 1;
            }
            order[base + r]
        } else {
            let r = rng.random_range(0..n - size);
            if r < base {
                order[r]
            } else {
                order[r + size]
            }
        };
        debug_assert!(i != j && admissible(i, j));
        out.insert((i.min(j), i.max(j)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_of(pairs: &[Pair]) -> BTreeSet<Pair> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn label_rules() {
        let p: BTreeSet<_> = [(1, 0), (2, 0)].into_iter().collect();
        let (m, c) = labels_to_pairwise(&p, &BTreeSet::new());
        assert_eq!(m, set_of(&[(1, 2)]));
        assert!(c.is_empty());

        let p: BTreeSet<_> = [(1, 0), (2, 1)].into_iter().collect();
        let (m, c) = labels_to_pairwise(&p, &BTreeSet::new());
        assert!(m.is_empty());
        assert_eq!(c, set_of(&[(1, 2)]));

        let p: BTreeSet<_> = [(1, 0)].into_iter().collect();
        let neg: BTreeSet<_> = [(2, 0)].into_iter().collect();
        let (m, c) = labels_to_pairwise(&p, &neg);
        assert!(m.is_empty());
        assert_eq!(c, set_of(&[(1, 2)]));
    }

    #[test]
    fn two_negatives_give_nothing() {
        let neg: BTreeSet<_> = [(1, 0), (2, 0)].into_iter().collect();
        let (m, c) = labels_to_pairwise(&BTreeSet::new(), &neg);
        assert!(m.is_empty() && c.is_empty());
        // negative with a different label than the positive: nothing either
        let p: BTreeSet<_> = [(1, 0)].into_iter().collect();
        let neg: BTreeSet<_> = [(2, 1)].into_iter().collect();
        let (m, c) = labels_to_pairwise(&p, &neg);
        assert!(m.is_empty() && c.is_empty());
    }

    #[test]
    fn closure_transitivity_and_entailment() {
        let closed = closure(4, &set_of(&[(1, 2), (2, 3)]), &BTreeSet::new()).unwrap();
        assert!(closed.must_link.contains(&(1, 3)));
        assert_eq!(closed.must_link.len(), 3);

        let closed = closure(4, &set_of(&[(1, 2)]), &set_of(&[(2, 3)])).unwrap();
        assert_eq!(closed.cannot_link, set_of(&[(1, 3), (2, 3)]));
    }

    #[test]
    fn closure_conflicts() {
        let err = closure(3, &set_of(&[(1, 2)]), &set_of(&[(1, 2)])).unwrap_err();
        assert!(matches!(err, Error::ConstraintConflict(1, 2)));
        let err = closure(4, &set_of(&[(0, 1), (1, 2)]), &set_of(&[(0, 2)])).unwrap_err();
        assert!(matches!(err, Error::ConstraintConflict(0, 2)));
    }

    #[test]
    fn relation_weights() {
        let sim = SimilarityMatrix::from_dense(&[
            vec![0.0, 0.9, 0.1],
            vec![0.9, 0.0, 0.5],
            vec![0.1, 0.5, 0.0],
        ])
        .unwrap();
        // ML at the max similarity contributes zero, CL at the min contributes zero
        let closed = ClosedConstraints {
            must_link: set_of(&[(0, 1)]),
            cannot_link: set_of(&[(0, 2)]),
        };
        let rel = build_relation_graph(&closed, &sim).unwrap();
        assert_eq!(rel.weight(0, 1), 0.0);
        assert_eq!(rel.weight(0, 2), 0.0);
        assert_eq!(rel.edge_count(), 2);

        let closed = ClosedConstraints {
            must_link: set_of(&[(0, 2)]),
            cannot_link: set_of(&[(0, 1), (1, 2)]),
        };
        let rel = build_relation_graph(&closed, &sim).unwrap();
        assert!((rel.weight(0, 2) - 0.8).abs() < 1e-15);
        // rho = 1 / 2
        assert!((rel.weight(0, 1) - 0.5 * (0.1 - 0.9)).abs() < 1e-15);
        assert!((rel.weight(1, 2) - 0.5 * (0.1 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rho_counts() {
        let sim = SimilarityMatrix::from_dense(&vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(WeightPolicy::new(&sim, 10, 20).rho, 0.5);
        assert_eq!(WeightPolicy::new(&sim, 0, 20).rho, 1.0);
        assert_eq!(WeightPolicy::new(&sim, 3, 0).rho, 1.0);
    }

    #[test]
    fn empty_constraints_give_empty_relation_graph() {
        let sim = SimilarityMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let rel = relation_graph_for(&ConstraintSet::new(), &sim).unwrap();
        assert!(rel.is_empty());
        assert_eq!(rel.n(), 2);
    }

    #[test]
    fn generated_pairs_come_from_admissible_sets() {
        let labels = [0, 0, 1, 1];
        for seed in 0..20 {
            let set = generate_constraints(&labels, ConstraintKind::Pairwise, 0.25, seed).unwrap();
            assert_eq!(set.must_link.len(), 1);
            assert_eq!(set.cannot_link.len(), 1);
            let ml = *set.must_link.iter().next().unwrap();
            assert!(ml == (0, 1) || ml == (2, 3));
            let (i, j) = *set.cannot_link.iter().next().unwrap();
            assert_ne!(labels[i], labels[j]);
        }
    }

    #[test]
    fn generation_edge_cases() {
        let set = generate_constraints(&[0, 1, 0], ConstraintKind::Pairwise, 0.0, 1).unwrap();
        assert!(set.is_empty());
        let set = generate_constraints(&[3, 3, 3, 3], ConstraintKind::Pairwise, 0.5, 1).unwrap();
        assert!(set.cannot_link.is_empty());
        assert_eq!(set.must_link.len(), 2);
        let set = generate_constraints(&[3, 3, 3, 3], ConstraintKind::Label, 0.5, 1).unwrap();
        assert!(set.negative_labels.is_empty());
        assert_eq!(set.positive_labels.len(), 2);
        assert!(generate_constraints(&[0, 1], ConstraintKind::Label, 1.5, 1).is_err());
    }

    #[test]
    fn generated_label_constraints_are_truthful() {
        let labels: Vec<Label> = (0..50).map(|i| (i % 4) as Label).collect();
        let set = generate_constraints(&labels, ConstraintKind::Label, 0.1, 9).unwrap();
        assert_eq!(set.positive_labels.len(), 5);
        assert_eq!(set.negative_labels.len(), 5);
        for &(v, y) in &set.positive_labels {
            assert_eq!(labels[v], y);
        }
        for &(v, y) in &set.negative_labels {
            assert_ne!(labels[v], y);
        }
        set.validate(50).unwrap();
    }

    #[test]
    fn sparse_sampling_is_uniform_enough() {
        // 3 classes of 20: 570 same-label pairs, 1200 cross pairs.
        let labels: Vec<Label> = (0..60).map(|i| (i / 20) as Label).collect();
        let mut hits = BTreeMap::new();
        for seed in 0..400 {
            let set = generate_constraints(&labels, ConstraintKind::Pairwise, 0.1, seed).unwrap();
            assert_eq!(set.must_link.len(), 6);
            assert_eq!(set.cannot_link.len(), 6);
            for &(i, j) in &set.must_link {
                assert_eq!(labels[i], labels[j]);
                *hits.entry(labels[i]).or_insert(0usize) += 1;
            }
            for &(i, j) in &set.cannot_link {
                assert_ne!(labels[i], labels[j]);
            }
        }
        // each class holds a third of the same-label pairs
        for &count in hits.values() {
            assert!((600..=1000).contains(&count), "{hits:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let labels: Vec<Label> = (0..30).map(|i| (i % 3) as Label).collect();
        for kind in [ConstraintKind::Pairwise, ConstraintKind::Label] {
            let a = generate_constraints(&labels, kind, 0.2, 42).unwrap();
            let b = generate_constraints(&labels, kind, 0.2, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut set = ConstraintSet::new();
        set.add_must_link(3, 1).unwrap();
        set.add_cannot_link(0, 2).unwrap();
        set.add_positive(4, 7);
        set.add_negative(5, -1);
        let text = set.to_text();
        assert_eq!(text, "ML 1 3\nCL 0 2\nPL 4 7\nNL 5 -1\n");
        assert_eq!(ConstraintSet::parse(&text).unwrap(), set);
        let parsed = ConstraintSet::parse("# header\n\nML 0 1  # trailing\n").unwrap();
        assert_eq!(parsed.must_link, set_of(&[(0, 1)]));
        assert!(ConstraintSet::parse("XX 0 1").is_err());
        assert!(ConstraintSet::parse("ML 0 0").is_err());
        assert!(ConstraintSet::parse("ML 0").is_err());
    }

    #[test]
    fn validate_rejects_contradictions() {
        let set = ConstraintSet::parse("ML 0 1\nCL 1 0\n").unwrap();
        assert!(matches!(
            set.validate(2),
            Err(Error::ConstraintConflict(0, 1))
        ));
        let set = ConstraintSet::parse("PL 0 1\nNL 0 1\n").unwrap();
        assert!(set.validate(2).is_err());
        let set = ConstraintSet::parse("ML 0 5\n").unwrap();
        assert!(set.validate(3).is_err());
    }
}
