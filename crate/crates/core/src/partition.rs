//! Flat clusterings: a vertex -> module assignment with per-module volume,
//! cut and relation-cut caches.

use crate::constraints::RelationGraph;
use crate::error::{Error, Result};
use crate::graph::{EdgeWeights, WeightedGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    assignment: Vec<usize>,
    modules: Vec<Vec<usize>>,
    volume: Vec<f64>,
    cut: Vec<f64>,
    rel_cut: Vec<f64>,
}

/// Volume, cut and relation cut per module id, computed in one pass over
/// the degrees and edges.
pub(crate) fn module_stats(
    g: &WeightedGraph,
    rel: &RelationGraph,
    assignment: &[usize],
    modules: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut volume = vec![0.0; modules];
    let mut cut = vec![0.0; modules];
    let mut rel_cut = vec![0.0; modules];
    for (v, &m) in assignment.iter().enumerate() {
        volume[m] += g.degree(v);
    }
    for (u, v, w) in g.edges() {
        let (a, b) = (assignment[u], assignment[v]);
        if a != b {
            cut[a] += w;
            cut[b] += w;
        }
    }
    for (u, v, w) in rel.edges() {
        let (a, b) = (assignment[u], assignment[v]);
        if a != b {
            rel_cut[a] += w;
            rel_cut[b] += w;
        }
    }
    (volume, cut, rel_cut)
}

fn check_graphs(g: &WeightedGraph, rel: &RelationGraph) -> Result<()> {
    if g.n() != rel.vertex_count() {
        return Err(Error::input(format!(
            "data graph has {} vertices but relation graph has {}",
            g.n(),
            rel.vertex_count()
        )));
    }
    Ok(())
}

impl Partition {
    /// Builds from arbitrary module labels. Modules are renumbered in order of
    /// their smallest vertex.
    pub fn from_assignment(
        g: &WeightedGraph,
        rel: &RelationGraph,
        labels: &[usize],
    ) -> Result<Self> {
        check_graphs(g, rel)?;
        if labels.len() != g.n() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: g.n(),
            });
        }
        let mut remap = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        let count = remap.len();
        let mut modules = vec![Vec::new(); count];
        for (v, &m) in assignment.iter().enumerate() {
            modules[m].push(v);
        }
        let (volume, cut, rel_cut) = module_stats(g, rel, &assignment, count);
        Ok(Self {
            assignment,
            modules,
            volume,
            cut,
            rel_cut,
        })
    }

    /// Builds from explicit vertex sets, which must partition the vertices.
    pub fn from_modules(
        g: &WeightedGraph,
        rel: &RelationGraph,
        modules: &[Vec<usize>],
    ) -> Result<Self> {
        let n = g.n();
        let mut labels = vec![usize::MAX; n];
        for (m, members) in modules.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::input(format!("module {m} is empty")));
            }
            for &v in members {
                if v >= n {
                    return Err(Error::input(format!("vertex {v} out of range")));
                }
                if labels[v] != usize::MAX {
                    return Err(Error::input(format!("vertex {v} appears in two modules")));
                }
                labels[v] = m;
            }
        }
        if let Some(v) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::input(format!("vertex {v} is not covered")));
        }
        Self::from_assignment(g, rel, &labels)
    }

    pub fn singletons(g: &WeightedGraph, rel: &RelationGraph) -> Result<Self> {
        Self::from_assignment(g, rel, &(0..g.n()).collect::<Vec<_>>())
    }

    /// Assembles a partition from caches maintained elsewhere. Used by the
    /// optimizers to expose their incremental state for checking.
    pub(crate) fn from_parts(
        assignment: Vec<usize>,
        modules: Vec<Vec<usize>>,
        volume: Vec<f64>,
        cut: Vec<f64>,
        rel_cut: Vec<f64>,
    ) -> Self {
        Self {
            assignment,
            modules,
            volume,
            cut,
            rel_cut,
        }
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.assignment.len()
    }

    /// Module index of every vertex.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn modules(&self) -> &[Vec<usize>] {
        &self.modules
    }

    pub fn module_sizes(&self) -> Vec<usize> {
        self.modules.iter().map(Vec::len).collect()
    }

    pub fn volume(&self, m: usize) -> f64 {
        self.volume[m]
    }

    pub fn cut(&self, m: usize) -> f64 {
        self.cut[m]
    }

    pub fn rel_cut(&self, m: usize) -> f64 {
        self.rel_cut[m]
    }

    /// Checks that modules are non-empty, disjoint and covering, that the
    /// assignment agrees with the module lists, and that the caches match a
    /// recomputation within `1e-9` relative.
    pub fn validate(&self, g: &WeightedGraph, rel: &RelationGraph) -> Result<(), String> {
        let n = g.n();
        if self.assignment.len() != n {
            return Err(format!(
                "assignment covers {} of {n} vertices",
                self.assignment.len()
            ));
        }
        let mut seen = vec![false; n];
        for (m, members) in self.modules.iter().enumerate() {
            if members.is_empty() {
                return Err(format!("module {m} is empty"));
            }
            for &v in members {
                if std::mem::replace(&mut seen[v], true) {
                    return Err(format!("vertex {v} listed twice"));
                }
                if self.assignment[v] != m {
                    return Err(format!(
                        "vertex {v} listed in module {m} but assigned to {}",
                        self.assignment[v]
                    ));
                }
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(format!("vertex {v} not in any module"));
        }
        let (volume, cut, rel_cut) = module_stats(g, rel, &self.assignment, self.modules.len());
        for m in 0..self.modules.len() {
            for (what, cached, fresh) in [
                ("volume", self.volume[m], volume[m]),
                ("cut", self.cut[m], cut[m]),
                ("relation cut", self.rel_cut[m], rel_cut[m]),
            ] {
                if !close(cached, fresh) {
                    return Err(format!(
                        "module {m} {what}: cached {cached}, recomputed {fresh}"
                    ));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> (WeightedGraph, RelationGraph) {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let rel = RelationGraph::from_edges(3, [(0, 2, 1.0)]).unwrap();
        (g, rel)
    }

    #[test]
    fn caches_from_assignment() {
        let (g, rel) = triangle();
        let p = Partition::from_assignment(&g, &rel, &[7, 7, 3]).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 1]);
        assert_eq!(p.modules(), &[vec![0, 1], vec![2]]);
        assert_eq!((p.volume(0), p.cut(0), p.rel_cut(0)), (4.0, 2.0, 1.0));
        assert_eq!((p.volume(1), p.cut(1), p.rel_cut(1)), (2.0, 2.0, 1.0));
        p.validate(&g, &rel).unwrap();
    }

    #[test]
    fn from_modules_rejects_bad_covers() {
        let (g, rel) = triangle();
        assert!(Partition::from_modules(&g, &rel, &[vec![0, 1]]).is_err());
        assert!(Partition::from_modules(&g, &rel, &[vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_modules(&g, &rel, &[vec![0, 1, 2], vec![]]).is_err());
        assert!(Partition::from_modules(&g, &rel, &[vec![2], vec![0, 1]]).is_ok());
    }

    #[test]
    fn validate_catches_stale_cache() {
        let (g, rel) = triangle();
        let p = Partition::from_parts(
            vec![0, 0, 1],
            vec![vec![0, 1], vec![2]],
            vec![4.0, 2.0],
            vec![2.0, 2.5],
            vec![1.0, 1.0],
        );
        assert!(p.validate(&g, &rel).unwrap_err().contains("cut"));
    }
}
