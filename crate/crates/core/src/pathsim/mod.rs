//! Exact PathSim: path-instance counting, scoring and Top-K search.

mod brute;
mod sparse;

pub use brute::count_paths_bruteforce;
pub use sparse::SparseCountMatrix;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{HinGraph, MetaPath, NodeId, NodeTypeId};
use crate::util;

/// Top-k neighbors of a query, by score descending then node id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query: NodeId,
    pub k: usize,
    pub entries: Vec<(NodeId, f64)>,
}

/// `2 * cross / (self_x + self_y)`, 0 when the denominator is 0.
pub fn pathsim_ratio(cross: u64, self_x: u64, self_y: u64) -> f64 {
    let den = self_x as u128 + self_y as u128;
    if den == 0 {
        return 0.0;
    }
    (2 * cross as u128) as f64 / den as f64
}

fn factors(g: &HinGraph, p: &MetaPath) -> Vec<SparseCountMatrix> {
    (0..p.len())
        .map(|i| SparseCountMatrix::biadjacency(g, p.node_types()[i], p.edge_types()[i], p.node_types()[i + 1]))
        .collect()
}

fn chain(start: SparseCountMatrix, factors: &[SparseCountMatrix]) -> Result<SparseCountMatrix> {
    factors.iter().try_fold(start, |acc, f| acc.multiply(f))
}

fn check_path(g: &HinGraph, p: &MetaPath) -> Result<()> {
    MetaPath::new(g.schema(), p.node_types().to_vec(), p.edge_types().to_vec()).map(|_| ())
}

/// Commuting matrix `W_R1 · ... · W_Rl`. With `restrict_rows` only those rows
/// are produced (left-to-right vector-chain product); full symmetric paths
/// of even length are computed as `B · Bᵀ` from the half-path product `B`.
pub fn commuting_matrix(g: &HinGraph, p: &MetaPath, restrict_rows: Option<&[NodeId]>) -> Result<SparseCountMatrix> {
    check_path(g, p)?;
    let fs = factors(g, p);
    match restrict_rows {
        Some(rows) => chain(SparseCountMatrix::selection(g, p.source_type(), rows)?, &fs),
        None if p.is_symmetric() && p.len() % 2 == 0 => {
            let half = chain(fs[0].clone(), &fs[1..p.len() / 2])?;
            let mid_nodes = g.nodes_of_type(half.col_type());
            half.multiply(&half.transpose(mid_nodes))
        }
        None => chain(fs[0].clone(), &fs[1..]),
    }
}

/// Precomputed state for scoring many queries under one symmetric meta-path:
/// relation factors plus every anchor node's self path count.
#[derive(Debug, Clone)]
pub struct PathSimEngine<'g> {
    graph: &'g HinGraph,
    path: MetaPath,
    factors: Vec<SparseCountMatrix>,
    self_counts: Vec<u64>,
}

impl<'g> PathSimEngine<'g> {
    pub fn new(graph: &'g HinGraph, path: &MetaPath) -> Result<Self> {
        check_path(graph, path)?;
        if !path.is_symmetric() {
            return Err(Error::InvalidArgument(format!(
                "PathSim needs a symmetric meta-path, got {}",
                path.display(graph.schema())
            )));
        }
        let fs = factors(graph, path);
        let self_counts = if path.len() % 2 == 0 {
            // M[x,x] = sum_k B[x,k]^2
            let half = chain(fs[0].clone(), &fs[1..path.len() / 2])?;
            let mut out = Vec::with_capacity(half.n_rows());
            for i in 0..half.n_rows() {
                let (_, vals) = half.row(i);
                let mut s = 0u64;
                for &v in vals {
                    s = v
                        .checked_mul(v)
                        .and_then(|sq| s.checked_add(sq))
                        .ok_or_else(|| Error::Overflow("self path count".into()))?;
                }
                out.push(s);
            }
            out
        } else {
            let m = chain(fs[0].clone(), &fs[1..])?;
            (0..m.n_rows()).map(|i| m.get(i, i)).collect()
        };
        Ok(PathSimEngine { graph, path: path.clone(), factors: fs, self_counts })
    }

    pub fn graph(&self) -> &'g HinGraph {
        self.graph
    }

    pub fn path(&self) -> &MetaPath {
        &self.path
    }

    pub fn anchor_type(&self) -> NodeTypeId {
        self.path.source_type()
    }

    /// Anchor-type nodes, ascending.
    pub fn anchors(&self) -> &'g [NodeId] {
        self.graph.nodes_of_type(self.anchor_type())
    }

    fn check_anchor(&self, v: NodeId) -> Result<()> {
        if v.index() >= self.graph.num_nodes() {
            return Err(Error::InvalidArgument(format!("node {} out of range", v.0)));
        }
        if self.graph.node_type(v) != self.anchor_type() {
            let s = self.graph.schema();
            return Err(Error::TypeMismatch(format!(
                "node `{}` has type {}, meta-path anchor is {}",
                self.graph.external_id(v),
                s.node_type_name(self.graph.node_type(v)),
                s.node_type_name(self.anchor_type())
            )));
        }
        Ok(())
    }

    /// Number of path instances from `v` back to itself.
    pub fn self_count(&self, v: NodeId) -> Result<u64> {
        self.check_anchor(v)?;
        Ok(self.self_counts[self.graph.local_index(v)])
    }

    /// Row `x` of the commuting matrix as `(node, count)` with positive counts.
    pub fn row_counts(&self, x: NodeId) -> Result<Vec<(NodeId, u64)>> {
        self.check_anchor(x)?;
        let m = chain(SparseCountMatrix::selection(self.graph, self.anchor_type(), &[x])?, &self.factors)?;
        let (cols, vals) = m.row(0);
        let anchors = self.anchors();
        Ok(cols.iter().zip(vals).map(|(&c, &v)| (anchors[c as usize], v)).collect())
    }

    pub fn score(&self, x: NodeId, y: NodeId) -> Result<f64> {
        self.check_anchor(y)?;
        let cross = self
            .row_counts(x)?
            .into_iter()
            .find(|(n, _)| *n == y)
            .map_or(0, |(_, c)| c);
        let sx = self.self_counts[self.graph.local_index(x)];
        let sy = self.self_counts[self.graph.local_index(y)];
        Ok(pathsim_ratio(cross, sx, sy))
    }

    /// Nonzero scores of every anchor node against `x`, by node id. Absent
    /// nodes score 0.
    pub fn row(&self, x: NodeId) -> Result<Vec<(NodeId, f64)>> {
        let sx = self.self_counts[{
            self.check_anchor(x)?;
            self.graph.local_index(x)
        }];
        let out = self
            .row_counts(x)?
            .into_iter()
            .map(|(y, c)| (y, pathsim_ratio(c, sx, self.self_counts[self.graph.local_index(y)])))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        Ok(out)
    }

    /// Rows for many queries; parallel over `threads` workers, output in
    /// query order.
    pub fn rows(&self, queries: &[NodeId], threads: usize) -> Result<Vec<Vec<(NodeId, f64)>>> {
        util::with_threads(threads, || queries.par_iter().map(|&q| self.row(q)).collect())
    }

    pub fn topk(&self, x: NodeId, k: usize, include_self: bool) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut entries: Vec<(NodeId, f64)> = self.row(x)?.into_iter().filter(|(y, _)| include_self || *y != x).collect();
        util::sort_ranked(&mut entries);
        entries.truncate(k);
        Ok(RankedList { query: x, k, entries })
    }
}

/// PathSim between two anchor-type nodes.
pub fn pathsim(g: &HinGraph, p: &MetaPath, x: NodeId, y: NodeId) -> Result<f64> {
    PathSimEngine::new(g, p)?.score(x, y)
}

/// Nonzero PathSim scores of all anchor-type nodes against `x`.
pub fn pathsim_row(g: &HinGraph, p: &MetaPath, x: NodeId) -> Result<Vec<(NodeId, f64)>> {
    PathSimEngine::new(g, p)?.row(x)
}

/// Top-k most similar anchor-type nodes to `x`. Nodes scoring 0 are never
/// listed.
pub fn topk_search(g: &HinGraph, p: &MetaPath, x: NodeId, k: usize, include_self: bool) -> Result<RankedList> {
    PathSimEngine::new(g, p)?.topk(x, k, include_self)
}
