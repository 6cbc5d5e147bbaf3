//! Encoding trees: rooted trees whose leaves are the graph's vertices.
//!
//! Nodes live in an arena. Leaf `v` always has id `v`, the root has id `n`,
//! and nodes created by stretching are appended. Compressed nodes leave a
//! tombstone so ids stay stable. Every node caches its vertex count, volume
//! in G, cut in G and cut in G'.

use serde::{Deserialize, Serialize};

use crate::constraints::RelationGraph;
use crate::error::{Error, Result};
use crate::graph::{EdgeWeights, WeightedGraph};
use crate::partition::{close, Partition};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    vertex: Option<usize>,
    size: usize,
    volume: f64,
    cut: f64,
    rel_cut: f64,
}

impl TreeNode {
    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    /// The vertex held by a leaf.
    pub fn vertex(&self) -> Option<usize> {
        self.vertex
    }

    pub fn is_leaf(&self) -> bool {
        self.vertex.is_some()
    }

    /// Number of vertices under this node.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn cut(&self) -> f64 {
        self.cut
    }

    pub fn rel_cut(&self) -> f64 {
        self.rel_cut
    }
}

/// Plain nested form used for JSON and Newick exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NestedTree {
    Leaf { vertex: usize },
    Node { children: Vec<NestedTree> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingTree {
    nodes: Vec<Option<TreeNode>>,
    root: NodeId,
    vertex_count: usize,
}

/// Per-node statistics recomputed from the graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct NodeStats {
    pub size: usize,
    pub volume: f64,
    pub cut: f64,
    pub rel_cut: f64,
}

fn leaf(vertex: usize, parent: NodeId) -> TreeNode {
    TreeNode {
        parent: Some(parent),
        children: Vec::new(),
        vertex: Some(vertex),
        size: 1,
        volume: 0.0,
        cut: 0.0,
        rel_cut: 0.0,
    }
}

fn internal(parent: Option<NodeId>, children: Vec<NodeId>) -> TreeNode {
    TreeNode {
        parent,
        children,
        vertex: None,
        size: 0,
        volume: 0.0,
        cut: 0.0,
        rel_cut: 0.0,
    }
}

impl EncodingTree {
    /// Root with every vertex as a direct leaf child.
    pub fn flat(g: &WeightedGraph, rel: &RelationGraph) -> Self {
        let n = g.n();
        let mut nodes: Vec<Option<TreeNode>> = (0..n).map(|v| Some(leaf(v, n))).collect();
        nodes.push(Some(internal(None, (0..n).collect())));
        let mut tree = Self {
            nodes,
            root: n,
            vertex_count: n,
        };
        tree.refresh_caches(g, rel);
        tree
    }

    /// Height-2 tree with one root child per module. Singleton modules are
    /// attached as leaves directly under the root.
    pub fn from_partition(g: &WeightedGraph, rel: &RelationGraph, p: &Partition) -> Self {
        let n = g.n();
        let mut nodes: Vec<Option<TreeNode>> = (0..n).map(|v| Some(leaf(v, n))).collect();
        nodes.push(Some(internal(None, Vec::new())));
        let mut tree = Self {
            nodes,
            root: n,
            vertex_count: n,
        };
        for (m, members) in p.modules().iter().enumerate() {
            if let [v] = members[..] {
                tree.node_mut(n).children.push(v);
                continue;
            }
            let id = tree.nodes.len();
            tree.nodes.push(Some(TreeNode {
                size: members.len(),
                volume: p.volume(m),
                cut: p.cut(m),
                rel_cut: p.rel_cut(m),
                ..internal(Some(n), members.clone())
            }));
            for &v in members {
                tree.node_mut(v).parent = Some(id);
            }
            tree.node_mut(n).children.push(id);
        }
        tree.refresh_leaf_and_root(g, rel);
        tree
    }

    /// Builds the structure from nested form. Caches are zero until
    /// [`EncodingTree::refresh_caches`] is called.
    pub fn from_nested(nested: &NestedTree) -> Result<Self> {
        let n = count_leaves(nested);
        if n == 0 {
            return Err(Error::input("tree has no leaves"));
        }
        let mut tree = Self {
            nodes: vec![None; n + 1],
            root: n,
            vertex_count: n,
        };
        match nested {
            NestedTree::Leaf { .. } => {
                return Err(Error::input("tree root must be an internal node"));
            }
            NestedTree::Node { children } => {
                tree.nodes[n] = Some(internal(None, Vec::new()));
                for child in children {
                    let id = tree.insert_nested(child, n)?;
                    tree.node_mut(n).children.push(id);
                }
            }
        }
        if let Some(v) = (0..n).find(|&v| tree.nodes[v].is_none()) {
            return Err(Error::input(format!("vertex {v} missing from tree")));
        }
        tree.refresh_sizes();
        Ok(tree)
    }

    fn insert_nested(&mut self, nested: &NestedTree, parent: NodeId) -> Result<NodeId> {
        match nested {
            NestedTree::Leaf { vertex } => {
                let v = *vertex;
                if v >= self.vertex_count {
                    return Err(Error::input(format!(
                        "leaf {v} out of range for {} leaves",
                        self.vertex_count
                    )));
                }
                if self.nodes[v].is_some() {
                    return Err(Error::input(format!("vertex {v} appears twice in tree")));
                }
                self.nodes[v] = Some(leaf(v, parent));
                Ok(v)
            }
            NestedTree::Node { children } => {
                if children.is_empty() {
                    return Err(Error::input("internal tree node without children"));
                }
                let id = self.nodes.len();
                self.nodes.push(Some(internal(Some(parent), Vec::new())));
                for child in children {
                    let c = self.insert_nested(child, id)?;
                    self.node_mut(id).children.push(c);
                }
                Ok(id)
            }
        }
    }

    pub fn to_nested(&self) -> NestedTree {
        self.nested_at(self.root)
    }

    fn nested_at(&self, id: NodeId) -> NestedTree {
        let node = self.node(id);
        match node.vertex {
            Some(vertex) => NestedTree::Leaf { vertex },
            None => NestedTree::Node {
                children: node.children.iter().map(|&c| self.nested_at(c)).collect(),
            },
        }
    }

    /// Newick string with vertex indices as leaf names.
    pub fn to_newick(&self) -> String {
        fn write(tree: &EncodingTree, id: NodeId, out: &mut String) {
            let node = tree.node(id);
            if let Some(v) = node.vertex {
                out.push_str(&v.to_string());
                return;
            }
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write(tree, c, out);
            }
            out.push(')');
        }
        let mut out = String::new();
        write(self, self.root, &mut out);
        out.push(';');
        out
    }

    /// Parses Newick whose leaf names are vertex indices. Branch lengths and
    /// internal labels are ignored.
    pub fn from_newick(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let nested = parse_newick(&chars, &mut pos)?;
        if chars.get(pos) == Some(&';') {
            pos += 1;
        }
        if pos != chars.len() {
            return Err(Error::input(format!(
                "trailing characters in Newick at {pos}"
            )));
        }
        Self::from_nested(&nested)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(Option::is_some)
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        self.nodes[id].as_ref().expect("live tree node")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        self.nodes[id].as_mut().expect("live tree node")
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.node(id).children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    /// Ids of all live nodes in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(id, _)| id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Upper bound (exclusive) on node ids.
    pub fn id_bound(&self) -> usize {
        self.nodes.len()
    }

    /// Non-root, non-leaf nodes.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids()
            .filter(move |&id| id != self.root && !self.node(id).is_leaf())
    }

    /// Edge count from the root to every live node (`usize::MAX` for dead ids).
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.nodes.len()];
        depth[self.root] = 0;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            for &c in &self.node(id).children {
                depth[c] = depth[id] + 1;
                stack.push(c);
            }
        }
        depth
    }

    /// Largest root-to-leaf edge count.
    pub fn height(&self) -> usize {
        let depth = self.depths();
        (0..self.vertex_count).map(|v| depth[v]).max().unwrap_or(0)
    }

    /// Vertices under `id`, in left-to-right order.
    pub fn leaves(&self, id: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            let node = self.node(x);
            match node.vertex {
                Some(v) => out.push(v),
                None => stack.extend(node.children.iter().rev()),
            }
        }
        out
    }

    /// Vertex sets of the root's children.
    pub fn top_level_sets(&self) -> Vec<Vec<usize>> {
        self.children(self.root)
            .iter()
            .map(|&c| self.leaves(c))
            .collect()
    }

    /// Inserts a new parent over sisters `a` and `b`, taking `a`'s position
    /// among its siblings. `link` and `rel_link` are the G and G' weights
    /// between the two vertex sets.
    pub fn stretch_with_link(&mut self, a: NodeId, b: NodeId, link: f64, rel_link: f64) -> NodeId {
        let parent = self.parent(a).expect("stretch below the root");
        assert_eq!(Some(parent), self.parent(b), "stretch needs sister nodes");
        assert_ne!(a, b);
        let (na, nb) = (self.node(a).clone(), self.node(b).clone());
        let id = self.nodes.len();
        self.nodes.push(Some(TreeNode {
            size: na.size + nb.size,
            volume: na.volume + nb.volume,
            cut: na.cut + nb.cut - 2.0 * link,
            rel_cut: na.rel_cut + nb.rel_cut - 2.0 * rel_link,
            ..internal(Some(parent), vec![a, b])
        }));
        self.node_mut(a).parent = Some(id);
        self.node_mut(b).parent = Some(id);
        let siblings = &mut self.node_mut(parent).children;
        let pos_a = siblings.iter().position(|&c| c == a).unwrap();
        siblings[pos_a] = id;
        siblings.retain(|&c| c != b);
        id
    }

    /// Stretch with link weights computed from the graphs.
    pub fn stretch(
        &mut self,
        g: &WeightedGraph,
        rel: &RelationGraph,
        a: NodeId,
        b: NodeId,
    ) -> NodeId {
        let (link, rel_link) = self.link_weights(g, rel, a, b);
        self.stretch_with_link(a, b, link, rel_link)
    }

    /// Total G and G' weight between the vertex sets of `a` and `b`.
    pub fn link_weights(
        &self,
        g: &WeightedGraph,
        rel: &RelationGraph,
        a: NodeId,
        b: NodeId,
    ) -> (f64, f64) {
        let mut in_b = vec![false; self.vertex_count];
        for v in self.leaves(b) {
            in_b[v] = true;
        }
        let mut link = 0.0;
        let mut rel_link = 0.0;
        for u in self.leaves(a) {
            link += g
                .neighbors(u)
                .iter()
                .filter(|&&(v, _)| in_b[v])
                .map(|&(_, w)| w)
                .sum::<f64>();
            rel_link += rel
                .neighbors(u)
                .iter()
                .filter(|&&(v, _)| in_b[v])
                .map(|&(_, w)| w)
                .sum::<f64>();
        }
        (link, rel_link)
    }

    /// Removes internal node `id` and hands its children to its parent, in
    /// place and in order.
    pub fn compress(&mut self, id: NodeId) {
        assert_ne!(id, self.root, "cannot compress the root");
        let node = self.nodes[id].take().expect("live tree node");
        assert!(!node.is_leaf(), "cannot compress a leaf");
        let parent = node.parent.unwrap();
        for &c in &node.children {
            self.node_mut(c).parent = Some(parent);
        }
        let siblings = &mut self.node_mut(parent).children;
        let pos = siblings.iter().position(|&c| c == id).unwrap();
        siblings.splice(pos..=pos, node.children.iter().copied());
    }

    fn refresh_sizes(&mut self) {
        for id in self.postorder() {
            let size = match self.node(id).vertex {
                Some(_) => 1,
                None => self
                    .node(id)
                    .children
                    .iter()
                    .map(|&c| self.node(c).size)
                    .sum(),
            };
            self.node_mut(id).size = size;
        }
    }

    fn refresh_leaf_and_root(&mut self, g: &WeightedGraph, rel: &RelationGraph) {
        for v in 0..self.vertex_count {
            let leaf = self.node_mut(v);
            leaf.volume = g.degree(v);
            leaf.cut = g.degree(v);
            leaf.rel_cut = rel.signed_degree(v);
        }
        let root = self.root;
        let root = self.node_mut(root);
        root.size = g.n();
        root.volume = g.total_volume();
        root.cut = 0.0;
        root.rel_cut = 0.0;
    }

    /// Recomputes every cache from the graphs.
    pub fn refresh_caches(&mut self, g: &WeightedGraph, rel: &RelationGraph) {
        let stats = self.scratch_stats(g, Some(rel));
        for id in self.node_ids().collect::<Vec<_>>() {
            let s = stats[id];
            let node = self.node_mut(id);
            node.size = s.size;
            node.volume = s.volume;
            node.cut = s.cut;
            node.rel_cut = s.rel_cut;
        }
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.node(id).children.iter().copied());
        }
        order.reverse();
        order
    }

    /// Size, volume and both cuts for every node, computed without the
    /// caches: volumes by summing leaf degrees upwards, cuts by walking each
    /// edge's two endpoints up to their lowest common ancestor.
    pub(crate) fn scratch_stats(
        &self,
        g: &WeightedGraph,
        rel: Option<&RelationGraph>,
    ) -> Vec<NodeStats> {
        let mut stats = vec![NodeStats::default(); self.nodes.len()];
        for id in self.postorder() {
            let node = self.node(id);
            stats[id] = match node.vertex {
                Some(v) => NodeStats {
                    size: 1,
                    volume: g.degree(v),
                    ..NodeStats::default()
                },
                None => node
                    .children
                    .iter()
                    .fold(NodeStats::default(), |acc, &c| NodeStats {
                        size: acc.size + stats[c].size,
                        volume: acc.volume + stats[c].volume,
                        ..acc
                    }),
            };
        }
        let depth = self.depths();
        let walk = |stats: &mut Vec<NodeStats>, u: usize, v: usize, w: f64, relation: bool| {
            let (mut a, mut b) = (u, v);
            while a != b {
                let x = if depth[a] >= depth[b] { &mut a } else { &mut b };
                if relation {
                    stats[*x].rel_cut += w;
                } else {
                    stats[*x].cut += w;
                }
                *x = self.node(*x).parent.unwrap();
            }
        };
        for (u, v, w) in g.edges() {
            walk(&mut stats, u, v, w, false);
        }
        for (u, v, w) in rel.into_iter().flat_map(|r| r.edges()) {
            walk(&mut stats, u, v, w, true);
        }
        stats
    }

    /// Structural checks plus cache agreement with a recomputation within
    /// `1e-9` relative.
    pub fn validate(&self, g: &WeightedGraph, rel: &RelationGraph) -> Result<(), String> {
        let n = self.vertex_count;
        if g.n() != n {
            return Err(format!(
                "tree has {n} leaves but graph has {} vertices",
                g.n()
            ));
        }
        let root = self.node(self.root);
        if root.parent.is_some() || root.vertex.is_some() {
            return Err("root must be an internal node without parent".into());
        }
        for v in 0..n {
            match self.nodes.get(v).and_then(Option::as_ref) {
                Some(node) if node.vertex == Some(v) && node.children.is_empty() => {}
                _ => return Err(format!("leaf {v} is missing or malformed")),
            }
        }
        let mut reached = 0;
        for id in self.postorder() {
            reached += 1;
            let node = self.node(id);
            for &c in &node.children {
                if self.node(c).parent != Some(id) {
                    return Err(format!("node {c} does not point back to parent {id}"));
                }
            }
            if node.vertex.is_none() && node.children.is_empty() {
                return Err(format!("internal node {id} has no children"));
            }
        }
        if reached != self.node_count() {
            return Err("unreachable nodes in arena".into());
        }
        // children partition the parent: every vertex reaches the root
        // exactly once and sizes add up
        let mut seen = vec![false; n];
        for v in self.leaves(self.root) {
            if std::mem::replace(&mut seen[v], true) {
                return Err(format!("vertex {v} appears twice"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("root does not cover every vertex".into());
        }
        let stats = self.scratch_stats(g, Some(rel));
        for id in self.node_ids() {
            let node = self.node(id);
            let s = stats[id];
            if node.size != s.size {
                return Err(format!(
                    "node {id} size: cached {}, actual {}",
                    node.size, s.size
                ));
            }
            for (what, cached, fresh) in [
                ("volume", node.volume, s.volume),
                ("cut", node.cut, s.cut),
                ("relation cut", node.rel_cut, s.rel_cut),
            ] {
                if !close(cached, fresh) {
                    return Err(format!(
                        "node {id} {what}: cached {cached}, recomputed {fresh}"
                    ));
                }
            }
        }
        Ok(())
    }
}

fn count_leaves(nested: &NestedTree) -> usize {
    match nested {
        NestedTree::Leaf { .. } => 1,
        NestedTree::Node { children } => children.iter().map(count_leaves).sum(),
    }
}

fn parse_newick(chars: &[char], pos: &mut usize) -> Result<NestedTree> {
    let err = |at: usize, what: &str| Error::input(format!("Newick: {what} at position {at}"));
    let node = if chars.get(*pos) == Some(&'(') {
        *pos += 1;
        let mut children = vec![parse_newick(chars, pos)?];
        loop {
            match chars.get(*pos) {
                Some(',') => {
                    *pos += 1;
                    children.push(parse_newick(chars, pos)?);
                }
                Some(')') => {
                    *pos += 1;
                    break;
                }
                _ => return Err(err(*pos, "expected ',' or ')'")),
            }
        }
        // optional internal label
        while chars
            .get(*pos)
            .is_some_and(|c| !matches!(c, ',' | ')' | ';' | ':' | '('))
        {
            *pos += 1;
        }
        NestedTree::Node { children }
    } else {
        let start = *pos;
        while chars.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
            *pos += 1;
        }
        if start == *pos {
            return Err(err(start, "expected a leaf index or '('"));
        }
        let name: String = chars[start..*pos].iter().collect();
        NestedTree::Leaf {
            vertex: name.parse().map_err(|_| err(start, "bad leaf index"))?,
        }
    };
    if chars.get(*pos) == Some(&':') {
        *pos += 1;
        while chars
            .get(*pos)
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        {
            *pos += 1;
        }
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> (WeightedGraph, RelationGraph) {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        (g, RelationGraph::from_edges(3, [(0, 2, 1.0)]).unwrap())
    }

    #[test]
    fn flat_tree_caches() {
        let (g, rel) = triangle();
        let t = EncodingTree::flat(&g, &rel);
        assert_eq!(t.height(), 1);
        assert_eq!(t.node(0).cut(), 2.0);
        assert_eq!(t.node(0).rel_cut(), 1.0);
        assert_eq!(t.node(3).volume(), 6.0);
        t.validate(&g, &rel).unwrap();
    }

    #[test]
    fn stretch_then_compress() {
        let (g, rel) = triangle();
        let mut t = EncodingTree::flat(&g, &rel);
        let d = t.stretch(&g, &rel, 0, 1);
        assert_eq!(t.children(3), &[d, 2]);
        assert_eq!(t.height(), 2);
        assert_eq!(
            (t.node(d).volume(), t.node(d).cut(), t.node(d).rel_cut()),
            (4.0, 2.0, 1.0)
        );
        t.validate(&g, &rel).unwrap();
        assert_eq!(t.to_newick(), "((0,1),2);");
        t.compress(d);
        assert_eq!(t.children(3), &[0, 1, 2]);
        assert_eq!(t.node_count(), 4);
        t.validate(&g, &rel).unwrap();
    }

    #[test]
    fn from_partition_height_two() {
        let (g, rel) = triangle();
        let p = Partition::from_assignment(&g, &rel, &[0, 0, 1]).unwrap();
        let t = EncodingTree::from_partition(&g, &rel, &p);
        assert_eq!(t.height(), 2);
        assert_eq!(t.top_level_sets(), vec![vec![0, 1], vec![2]]);
        t.validate(&g, &rel).unwrap();
    }

    #[test]
    fn newick_and_json_round_trip() {
        let t = EncodingTree::from_newick("((0, 2):0.5,(1,3)x);").unwrap();
        assert_eq!(t.to_newick(), "((0,2),(1,3));");
        let json = serde_json::to_string(&t.to_nested()).unwrap();
        assert_eq!(
            json,
            r#"{"children":[{"children":[{"vertex":0},{"vertex":2}]},{"children":[{"vertex":1},{"vertex":3}]}]}"#
        );
        let back: NestedTree = serde_json::from_str(&json).unwrap();
        assert_eq!(
            EncodingTree::from_nested(&back).unwrap().to_newick(),
            t.to_newick()
        );
        assert_eq!(t.node(t.root()).size(), 4);
    }

    #[test]
    fn malformed_trees_rejected() {
        assert!(EncodingTree::from_newick("((0,1),1);").is_err());
        assert!(EncodingTree::from_newick("((0,1),3);").is_err());
        assert!(EncodingTree::from_newick("((0,1),2").is_err());
        assert!(EncodingTree::from_newick("0;").is_err());
    }

    #[test]
    fn validate_detects_bad_cache() {
        let (g, rel) = triangle();
        let mut t = EncodingTree::flat(&g, &rel);
        let d = t.stretch_with_link(0, 1, 0.5, 0.0);
        assert!(t
            .validate(&g, &rel)
            .unwrap_err()
            .contains(&format!("node {d} cut")));
    }
}
