//! Data graph construction: feature matrix -> dense similarity -> sparse
//! p-nearest-neighbor graph, plus the volume and cut primitives that every
//! objective is built from.

use std::cmp::Ordering;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Read access to a sparse symmetric weight structure.
pub trait EdgeWeights {
    fn vertex_count(&self) -> usize;

    /// Neighbors of `v` with the edge weight, sorted by neighbor index.
    fn neighbors(&self, v: usize) -> &[(usize, f64)];
}

/// Sparse symmetric adjacency without self-loops.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    /// Builds the adjacency from undirected edges. Repeated edges accumulate.
    /// Entries whose accumulated weight is exactly zero are kept only when
    /// `keep_zero` is set.
    pub fn from_edges<I>(n: usize, edges: I, allow_negative: bool, keep_zero: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::input(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::input(format!("self-loop on vertex {i}")));
            }
            if !w.is_finite() {
                return Err(Error::input(format!(
                    "non-finite weight on edge ({i}, {j})"
                )));
            }
            if !allow_negative && w < 0.0 {
                return Err(Error::input(format!(
                    "negative weight {w} on edge ({i}, {j})"
                )));
            }
            pairs.push((i.min(j), i.max(j), w));
        }
        pairs.sort_by_key(|a| (a.0, a.1));

        let mut rows = vec![Vec::new(); n];
        let mut idx = 0;
        while idx < pairs.len() {
            let (i, j, mut w) = pairs[idx];
            idx += 1;
            while idx < pairs.len() && pairs[idx].0 == i && pairs[idx].1 == j {
                w += pairs[idx].2;
                idx += 1;
            }
            if w == 0.0 && !keep_zero {
                continue;
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(Self { rows })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            rows: vec![Vec::new(); n],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, v: usize) -> &[(usize, f64)] {
        &self.rows[v]
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    /// Weight of edge `(i, j)`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }
}

/// Dense feature matrix, one row per data point. Row `i` is vertex `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows < 2 {
            return Err(Error::input(format!(
                "need at least 2 data points, got {rows}"
            )));
        }
        if cols == 0 {
            return Err(Error::input("feature dimension is zero"));
        }
        if values.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!(
                "non-finite feature at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::input(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Similarity kernel applied to pairs of feature rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `exp(-||x_i - x_j||^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// Cosine similarity clamped below at zero.
    Cosine,
}

impl Kernel {
    pub const DEFAULT_SIGMA: f64 = 10.0;

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(Error::input(
                format!("gaussian kernel width must be positive, got {sigma}"),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Gaussian {
            sigma: Self::DEFAULT_SIGMA,
        }
    }
}

/// Symmetric similarity matrix with zero diagonal, stored as the strict
/// upper triangle in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds from a full square matrix, checking symmetry.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::input("similarity matrix is not square"));
            }
            for j in (i + 1)..n {
                let s = row[j];
                if !s.is_finite() || s < 0.0 || s != rows[j][i] {
                    return Err(Error::input(format!(
                        "similarity ({i}, {j}) must be finite, non-negative and symmetric"
                    )));
                }
                upper.push(s);
            }
        }
        Ok(Self { n, upper })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            Ordering::Equal => 0.0,
            Ordering::Less => self.upper[self.offset(i, j)],
            Ordering::Greater => self.upper[self.offset(j, i)],
        }
    }

    /// Minimum and maximum similarity over all distinct pairs.
    pub fn extrema(&self) -> (f64, f64) {
        self.upper
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            })
    }
}

/// The data graph: non-negative symmetric weights with cached degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adj: SparseSymmetric,
    degree: Vec<f64>,
    total_volume: f64,
}

impl WeightedGraph {
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Ok(Self::from_adjacency(SparseSymmetric::from_edges(
            n, edges, false, false,
        )?))
    }

    fn from_adjacency(adj: SparseSymmetric) -> Self {
        let degree: Vec<f64> = (0..adj.vertex_count())
            .map(|v| adj.row(v).iter().map(|&(_, w)| w).sum())
            .collect();
        let total_volume = degree.iter().sum();
        Self {
            adj,
            degree,
            total_volume,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.vertex_count()
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degree[v]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn edge_count(&self) -> usize {
        self.adj.edge_count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.edges()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj.weight(i, j)
    }
}

impl EdgeWeights for WeightedGraph {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        self.adj.row(v)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise similarities under `kernel`. Rows are computed in parallel;
/// each entry depends only on its two rows, so the result is identical for
/// any thread count.
pub fn build_similarity(data: &DataMatrix, kernel: Kernel) -> Result<SimilarityMatrix> {
    kernel.validate()?;
    let n = data.rows();
    let norms: Vec<f64> = match kernel {
        Kernel::Cosine => {
            let norms: Vec<f64> = (0..n)
                .map(|i| data.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            let zero = norms.iter().filter(|&&x| x == 0.0).count();
            if zero > 0 {
                warn!("{zero} zero-norm rows under the cosine kernel; their similarities are 0");
            }
            norms
        }
        Kernel::Gaussian { .. } => Vec::new(),
    };

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = data.row(i);
            ((i + 1)..n)
                .map(|j| {
                    let xj = data.row(j);
                    match kernel {
                        Kernel::Gaussian { sigma } => {
                            (-squared_distance(xi, xj) / (2.0 * sigma * sigma)).exp()
                        }
                        Kernel::Cosine => {
                            let denom = norms[i] * norms[j];
                            if denom == 0.0 {
                                0.0
                            } else {
                                let dot: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
                                (dot / denom).max(0.0)
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();

    Ok(SimilarityMatrix {
        n,
        upper: rows.concat(),
    })
}

/// Keeps, for every vertex, its `p` most similar partners and symmetrizes by
/// union. Ties at the cut-off rank go to the smaller vertex index and
/// zero-similarity candidates are dropped.
pub fn sparsify_knn(sim: &SimilarityMatrix, p: usize) -> Result<WeightedGraph> {
    let n = sim.n();
    if p == 0 || p >= n {
        return Err(Error::input(format!(
            "neighbor count p must satisfy 1 <= p < n = {n}, got {p}"
        )));
    }
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));

    let mut kept: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sim.get(i, j), j))
                .collect();
            if p < cand.len() {
                cand.select_nth_unstable_by(p - 1, by_rank);
                cand.truncate(p);
            }
            cand.into_iter()
                .filter(|&(s, _)| s > 0.0)
                .map(move |(_, j)| (i.min(j), i.max(j)))
        })
        .collect();
    kept.sort_unstable();
    kept.dedup();

    WeightedGraph::from_edges(n, kept.into_iter().map(|(i, j)| (i, j, sim.get(i, j))))
}

/// Neighbor count `floor(20 k / log2(n)^2) + 1` for `k` expected clusters.
pub fn default_p(k: usize, n: usize) -> usize {
    assert!(k >= 1 && n >= 2, "default_p needs k >= 1 and n >= 2");
    let log_n = (n as f64).log2();
    (20.0 * k as f64 / (log_n * log_n)).floor() as usize + 1
}

/// Similarity matrix of `data` and its `p`-nearest-neighbor graph.
pub fn build_graph(
    data: &DataMatrix,
    kernel: Kernel,
    p: usize,
) -> Result<(SimilarityMatrix, WeightedGraph)> {
    let sim = build_similarity(data, kernel)?;
    let g = sparsify_knn(&sim, p)?;
    Ok((sim, g))
}

/// Sum of degrees over `set`.
pub fn volume(g: &WeightedGraph, set: &[usize]) -> f64 {
    set.iter().map(|&v| g.degree(v)).sum()
}

/// Total weight of edges with exactly one endpoint in `set`. Edges are
/// visited in a fixed global order, so `cut(S)` and `cut(V \ S)` agree bit
/// for bit.
pub fn cut<G: EdgeWeights + ?Sized>(g: &G, set: &[usize]) -> f64 {
    let n = g.vertex_count();
    let mut inside = vec![false; n];
    for &v in set {
        inside[v] = true;
    }
    let mut total = 0.0;
    for u in 0..n {
        for &(v, w) in g.neighbors(u) {
            if v > u && inside[u] != inside[v] {
                total += w;
            }
        }
    }
    total
}
