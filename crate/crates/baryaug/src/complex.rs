//! Neighborhood graphs over a distance matrix and their clique complexes.
//!
//! Two construction rules: symmetrized kNN (union by default, mutual behind
//! a flag) and the density-adaptive continuous kNN, where vertices connect
//! when their distance beats `delta * sqrt(d_k(i) * d_k(j))`. Maximal cliques
//! come from Bron-Kerbosch with pivoting; per-vertex weights are the inverse
//! clique-membership counts used by the sampler.

use crate::error::{Error, Result};
use crate::ot::DistanceMatrix;

/// Construction rule, kept for provenance and serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphRule {
    Knn { k: usize, mutual: bool },
    Cknn { k: usize, delta: f64 },
}

/// Undirected graph over dataset indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    n: usize,
    edges: Vec<(usize, usize)>, // i < j, sorted
    adjacency: Vec<Vec<usize>>, // sorted neighbor lists
    rule: GraphRule,
}

impl NeighborhoodGraph {
    /// Build from an edge list; self-loops rejected, duplicates collapsed.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize)>, rule: GraphRule) -> Result<Self> {
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::BadParameter {
                    name: "edges",
                    reason: format!("self-loop at {a}"),
                });
            }
            if a >= n || b >= n {
                return Err(Error::BadParameter {
                    name: "edges",
                    reason: format!("edge ({a}, {b}) out of range for n = {n}"),
                });
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &norm {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: norm,
            adjacency,
            rule,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn rule(&self) -> &GraphRule {
        &self.rule
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }
}

/// Per-vertex k nearest neighbors by distance, ties broken by lower index,
/// self excluded.
fn nearest_lists(m: &DistanceMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = m.n();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                m.get(i, a)
                    .partial_cmp(&m.get(i, b))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect()
}

/// Symmetrized kNN graph with the union rule: edge `(i, j)` when either
/// endpoint ranks the other among its `k` nearest.
pub fn knn_graph(m: &DistanceMatrix, k: usize) -> Result<NeighborhoodGraph> {
    knn_graph_with(m, k, false)
}

/// kNN graph with selectable symmetrization: union (default) or mutual.
pub fn knn_graph_with(m: &DistanceMatrix, k: usize, mutual: bool) -> Result<NeighborhoodGraph> {
    let n = m.n();
    if k == 0 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let lists = nearest_lists(m, k);
    let mut edges = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            if mutual {
                if i < j && lists[j].contains(&i) {
                    edges.push((i, j));
                }
            } else {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    NeighborhoodGraph::from_edges(n, edges, GraphRule::Knn { k, mutual })
}

/// Density-adaptive continuous kNN graph: edge `(i, j)` iff
/// `m[i][j] < delta * sqrt(d_k(i) * d_k(j))` with `d_k` the distance to the
/// k-th nearest neighbor (self excluded). A zero k-th-neighbor distance
/// makes the right side zero and the vertex isolated; that is documented
/// behavior, not an error.
pub fn cknn_graph(m: &DistanceMatrix, k: usize, delta: f64) -> Result<NeighborhoodGraph> {
    let n = m.n();
    if k == 0 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::BadDelta(delta));
    }
    let lists = nearest_lists(m, k);
    let dk: Vec<f64> = (0..n).map(|i| m.get(i, lists[i][k - 1])).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if m.get(i, j) < delta * (dk[i] * dk[j]).sqrt() {
                edges.push((i, j));
            }
        }
    }
    NeighborhoodGraph::from_edges(n, edges, GraphRule::Cknn { k, delta })
}

/// The set of maximal cliques with inverse-membership vertex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueComplex {
    cliques: Vec<Vec<usize>>,     // each ascending; list lexicographic
    vertex_weights: Vec<f64>,     // p_i = 1 / #cliques containing i
    membership: Vec<Vec<usize>>,  // per-vertex clique ids
}

impl CliqueComplex {
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn clique(&self, id: usize) -> &[usize] {
        &self.cliques[id]
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weights
    }

    pub fn membership(&self, v: usize) -> &[usize] {
        &self.membership[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_weights.len()
    }

    /// Rebuild weights/membership from a clique list (e.g. after file load).
    pub fn from_cliques(n: usize, mut cliques: Vec<Vec<usize>>) -> Result<Self> {
        for c in &mut cliques {
            c.sort_unstable();
            c.dedup();
            if c.iter().any(|&v| v >= n) {
                return Err(Error::BadParameter {
                    name: "cliques",
                    reason: "vertex index out of range".into(),
                });
            }
        }
        cliques.sort();
        cliques.dedup();
        let mut membership = vec![Vec::new(); n];
        for (id, c) in cliques.iter().enumerate() {
            for &v in c {
                membership[v].push(id);
            }
        }
        if membership.iter().any(|m| m.is_empty()) {
            return Err(Error::BadParameter {
                name: "cliques",
                reason: "a vertex belongs to no clique".into(),
            });
        }
        let vertex_weights = membership.iter().map(|m| 1.0 / m.len() as f64).collect();
        Ok(Self {
            cliques,
            vertex_weights,
            membership,
        })
    }
}

/// Options for clique enumeration.
#[derive(Debug, Clone)]
pub struct CliqueOptions {
    /// Replace oversized maximal cliques by their cap-sized subsets.
    pub max_clique_size: Option<usize>,
    /// Hard limit on the number of emitted cliques.
    pub clique_limit: usize,
}

impl Default for CliqueOptions {
    fn default() -> Self {
        Self {
            max_clique_size: None,
            clique_limit: 1_000_000,
        }
    }
}

/// Word-packed vertex set for the Bron-Kerbosch recursion.
#[derive(Clone)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn empty(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    fn remove(&mut self, v: usize) {
        self.words[v / 64] &= !(1 << (v % 64));
    }

    fn contains(&self, v: usize) -> bool {
        self.words[v / 64] & (1 << (v % 64)) != 0
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn and(&self, other: &Self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn and_count(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

/// Enumerate exactly the maximal cliques of `g` (Bron-Kerbosch with
/// pivoting), in deterministic lexicographic order of the sorted vertex
/// sets. Isolated vertices yield singleton cliques. With
/// `max_clique_size = Some(cap)`, oversized cliques are replaced by all
/// their cap-sized subsets (deduplicated), keeping vertex coverage.
pub fn maximal_cliques(g: &NeighborhoodGraph, opts: &CliqueOptions) -> Result<CliqueComplex> {
    let n = g.n();
    let nbr: Vec<BitSet> = (0..n)
        .map(|v| {
            let mut s = BitSet::empty(n);
            for &u in g.neighbors(v) {
                s.insert(u);
            }
            s
        })
        .collect();

    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut r: Vec<usize> = Vec::new();
    bron_kerbosch(
        &nbr,
        &mut r,
        BitSet::full(n),
        BitSet::empty(n),
        &mut out,
        opts.clique_limit,
    )?;

    let cliques = match opts.max_clique_size {
        None => out,
        Some(cap) => {
            let cap = cap.max(1);
            let mut replaced: Vec<Vec<usize>> = Vec::new();
            for c in out {
                if c.len() <= cap {
                    replaced.push(c);
                } else {
                    let mut subset: Vec<usize> = Vec::with_capacity(cap);
                    emit_subsets(&c, cap, 0, &mut subset, &mut replaced, opts.clique_limit)?;
                }
                if replaced.len() > opts.clique_limit {
                    return Err(Error::CliqueLimit {
                        limit: opts.clique_limit,
                    });
                }
            }
            replaced
        }
    };

    let mut cliques = cliques;
    cliques.sort();
    cliques.dedup();
    CliqueComplex::from_cliques(n, cliques)
}

fn bron_kerbosch(
    nbr: &[BitSet],
    r: &mut Vec<usize>,
    mut p: BitSet,
    mut x: BitSet,
    out: &mut Vec<Vec<usize>>,
    limit: usize,
) -> Result<()> {
    if p.is_empty() && x.is_empty() {
        if out.len() >= limit {
            return Err(Error::CliqueLimit { limit });
        }
        out.push(r.clone());
        return Ok(());
    }
    // pivot: vertex of P u X with the most candidates in P (lowest index wins ties)
    let pivot = p
        .iter()
        .chain(x.iter())
        .map(|u| (nbr[u].and_count(&p), std::cmp::Reverse(u)))
        .max()
        .map(|(_, std::cmp::Reverse(u))| u)
        .expect("nonempty P u X");
    let candidates: Vec<usize> = p.iter().filter(|&v| !nbr[pivot].contains(v)).collect();
    for v in candidates {
        r.push(v);
        bron_kerbosch(nbr, r, p.and(&nbr[v]), x.and(&nbr[v]), out, limit)?;
        r.pop();
        p.remove(v);
        x.insert(v);
    }
    Ok(())
}

fn emit_subsets(
    clique: &[usize],
    cap: usize,
    start: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    limit: usize,
) -> Result<()> {
    if cur.len() == cap {
        if out.len() >= limit {
            return Err(Error::CliqueLimit { limit });
        }
        out.push(cur.clone());
        return Ok(());
    }
    let need = cap - cur.len();
    for i in start..=clique.len().saturating_sub(need) {
        cur.push(clique[i]);
        emit_subsets(clique, cap, i + 1, cur, out, limit)?;
        cur.pop();
    }
    Ok(())
}
