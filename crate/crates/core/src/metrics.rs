//! External clustering indices: ARI, NMI and dendrogram purity.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::tree::EncodingTree;

/// Maps arbitrary labels to dense indices in order of first appearance.
fn encode<L: Eq + Hash>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let codes = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (codes, ids.len())
}

struct Contingency {
    n: usize,
    cells: HashMap<(usize, usize), usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn contingency<L: Eq + Hash, M: Eq + Hash>(pred: &[L], truth: &[M]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (p, kp) = encode(pred);
    let (t, kt) = encode(truth);
    let mut cells = HashMap::new();
    let mut rows = vec![0; kp];
    let mut cols = vec![0; kt];
    for (&a, &b) in p.iter().zip(&t) {
        *cells.entry((a, b)).or_insert(0) += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    Ok(Contingency {
        n: pred.len(),
        cells,
        rows,
        cols,
    })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when the index is undefined (both sides
/// put everything in one cluster, or every point in its own).
pub fn ari<L: Eq + Hash, M: Eq + Hash>(pred: &[L], truth: &[M]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let index: f64 = c.cells.values().map(|&x| pairs(x)).sum();
    let a: f64 = c.rows.iter().map(|&x| pairs(x)).sum();
    let b: f64 = c.cols.iter().map(|&x| pairs(x)).sum();
    let all = pairs(c.n);
    if all == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / all;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&x| x > 0)
        .map(|&x| {
            let p = x as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the two entropies.
pub fn nmi<L: Eq + Hash, M: Eq + Hash>(pred: &[L], truth: &[M]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if c.n == 0 {
        return Ok(1.0);
    }
    let n = c.n as f64;
    let hu = entropy(&c.rows, n);
    let hv = entropy(&c.cols, n);
    if hu == 0.0 && hv == 0.0 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mi: f64 = c
        .cells
        .iter()
        .map(|(&(i, j), &x)| {
            let x = x as f64;
            (x / n) * (n * x / (c.rows[i] as f64 * c.cols[j] as f64)).ln()
        })
        .sum();
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// Mean, over all same-class leaf pairs, of the fraction of that class among
/// the leaves of the pair's lowest common ancestor. Returns 1 when no class
/// has two members.
pub fn dendrogram_purity<L: Eq + Hash>(tree: &EncodingTree, truth: &[L]) -> Result<f64> {
    if truth.len() != tree.vertex_count() {
        return Err(Error::LengthMismatch {
            left: tree.vertex_count(),
            right: truth.len(),
        });
    }
    let (class, k) = encode(truth);
    let mut sizes = vec![0usize; k];
    for &c in &class {
        sizes[c] += 1;
    }
    let total_pairs: f64 = sizes.iter().map(|&s| pairs(s)).sum();
    if total_pairs == 0.0 {
        return Ok(1.0);
    }
    // class counts per subtree, merged smaller into larger; pairs of a class
    // drawn from two different children meet at this node
    let mut counts: Vec<Option<HashMap<usize, usize>>> = vec![None; tree.id_bound()];
    let mut score = 0.0;
    for id in tree.postorder() {
        let node = tree.node(id);
        if let Some(v) = node.vertex() {
            counts[id] = Some(HashMap::from([(class[v], 1)]));
            continue;
        }
        let mut acc: HashMap<usize, usize> = HashMap::new();
        let mut meeting: HashMap<usize, usize> = HashMap::new();
        for &c in node.children() {
            let mut child = counts[c].take().unwrap();
            if child.len() > acc.len() {
                std::mem::swap(&mut child, &mut acc);
            }
            for (cls, x) in child {
                let e = acc.entry(cls).or_insert(0);
                *meeting.entry(cls).or_insert(0) += x * *e;
                *e += x;
            }
        }
        let size = node.size() as f64;
        for (cls, m) in meeting {
            if m > 0 {
                score += m as f64 * acc[&cls] as f64 / size;
            }
        }
        counts[id] = Some(acc);
    }
    Ok(score / total_pairs)
}
