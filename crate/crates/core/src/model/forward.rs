use rayon::prelude::*;

use super::{ModelParams, TypeBinding};
use crate::error::{Error, Result};
use crate::hin::{HinGraph, NodeId};
use crate::tensor::{PoolGroups, Tape, Tensor, Var};
use crate::util;

/// Per-layer slot states: `layers[l][i]` is the `N x d` matrix of slot `i`
/// after layer `l` (layer 0 is the initial one-hot features).
#[derive(Debug, Clone)]
pub struct NodeStates {
    pub layers: Vec<Vec<Tensor>>,
}

impl NodeStates {
    pub fn last(&self) -> &[Tensor] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A recorded forward pass for one query.
pub struct Forward {
    pub tape: Tape,
    /// `m x 1` predicted scores, one per entry of `targets`.
    pub scores: Var,
    pub targets: Vec<NodeId>,
}

impl Forward {
    pub fn score_values(&self) -> Vec<f64> {
        self.tape.value(self.scores).data().to_vec()
    }
}

/// Query gets `e1`, every other node `e2`; the same vector in every slot.
pub fn init_features(g: &HinGraph, query: NodeId, d: usize) -> Result<Tensor> {
    if query.index() >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!("query node {} out of range", query.0)));
    }
    if d < 2 {
        return Err(Error::InvalidArgument("hidden width d must be at least 2".into()));
    }
    let mut h = Tensor::zeros(g.num_nodes(), d);
    for v in 0..g.num_nodes() {
        h.set(v, if v == query.index() { 0 } else { 1 }, 1.0);
    }
    Ok(h)
}

/// Directed view of the adjacency: edge `e` runs `src[e] -> dst[e]`, and
/// the edges into node `t` occupy `offsets[t]..offsets[t + 1]`.
struct EdgeIndex {
    offsets: Vec<usize>,
    src: Vec<u32>,
    dst: Vec<u32>,
    etype: Vec<u32>,
    /// (parameter index, node rows) per node type present in the graph
    type_rows: Vec<(usize, Vec<u32>)>,
}

impl EdgeIndex {
    fn new(g: &HinGraph, bind: &TypeBinding) -> Self {
        let (offsets, adj) = g.adjacency_csr();
        let mut dst = Vec::with_capacity(adj.len());
        for t in 0..g.num_nodes() {
            dst.extend(std::iter::repeat(t as u32).take(offsets[t + 1] - offsets[t]));
        }
        let mut type_rows: Vec<(usize, Vec<u32>)> = Vec::new();
        for ty in 0..g.schema().num_node_types() {
            let nodes = g.nodes_of_type(crate::hin::NodeTypeId(ty as u16));
            if nodes.is_empty() {
                continue;
            }
            let pid = bind.node[ty];
            let rows = nodes.iter().map(|v| v.0);
            match type_rows.iter_mut().find(|(p, _)| *p == pid) {
                Some((_, r)) => r.extend(rows),
                None => type_rows.push((pid, rows.collect())),
            }
        }
        for (_, rows) in &mut type_rows {
            rows.sort_unstable();
        }
        EdgeIndex {
            offsets: offsets.to_vec(),
            src: adj.iter().map(|(s, _)| s.0).collect(),
            dst,
            etype: adj.iter().map(|(_, r)| r.0 as u32).collect(),
            type_rows,
        }
    }
}

/// `class[v * t + i]` = first slot of `v` whose state equals slot `i`
/// bit-for-bit.
fn slot_classes(states: &[&Tensor]) -> Vec<u8> {
    let t = states.len();
    let n = states[0].rows();
    let mut class = vec![0u8; n * t];
    for v in 0..n {
        for i in 0..t {
            let row = states[i].row(v);
            let first = (0..i)
                .find(|&j| states[j].row(v).iter().zip(row).all(|(a, b)| a.to_bits() == b.to_bits()))
                .unwrap_or(i);
            class[v * t + i] = first as u8;
        }
    }
    class
}

fn pool_groups(ix: &EdgeIndex, n: usize, t: usize, class: Option<&[u8]>) -> PoolGroups {
    let mut groups = PoolGroups::new();
    for node in 0..n {
        for e in ix.offsets[node]..ix.offsets[node + 1] {
            let (s, d) = (ix.src[e] as usize, ix.dst[e] as usize);
            for i in 0..t {
                let repeated = class.is_some_and(|c| {
                    (0..i).any(|j| c[s * t + j] == c[s * t + i] && c[d * t + j] == c[d * t + i])
                });
                if !repeated {
                    groups.push(i, e);
                }
            }
        }
        groups.close_group();
    }
    groups
}

struct Ctx<'a> {
    g: &'a HinGraph,
    params: &'a ModelParams,
    ix: EdgeIndex,
    bind: TypeBinding,
    pv: Vec<Var>,
}

impl<'a> Ctx<'a> {
    fn new(tape: &mut Tape, g: &'a HinGraph, params: &'a ModelParams) -> Result<Self> {
        let bind = params.bind(g)?;
        let ix = EdgeIndex::new(g, &bind);
        let pv = params.tensors().iter().enumerate().map(|(i, t)| tape.param(i, t)).collect();
        Ok(Ctx { g, params, ix, bind, pv })
    }

    fn layer(&self, tape: &mut Tape, prev: &[Var]) -> Result<Vec<Var>> {
        let cfg = &self.params.config;
        let lay = &self.params.layout;
        let d = cfg.d;
        let t = prev.len();
        let n = self.g.num_nodes();
        let bias = lay.bias.map(|b| b.map(|i| self.pv[i]));

        let w_msg = self.pv[lay.message];
        let w_src = tape.slice_cols(w_msg, 0, d)?;
        let w_dst = tape.slice_cols(w_msg, if cfg.use_edge_type { 2 * d } else { d }, d)?;
        // edge-type term is shared by every slot
        let edge_term = if cfg.use_edge_type {
            let w_e = tape.slice_cols(w_msg, d, d)?;
            let mut parts = Vec::new();
            let mut index = Vec::new();
            for (r, p) in self.bind.edge.iter().enumerate() {
                let p = p.ok_or_else(|| Error::Shape("missing edge embedding".into()))?;
                parts.push(tape.matmul_t(self.pv[p], w_e)?);
                index.push(vec![r as u32]);
            }
            let table = tape.scatter_rows(&parts, &index, self.bind.edge.len())?;
            Some(tape.gather_rows(table, &self.ix.etype)?)
        } else {
            None
        };

        let mut messages = Vec::with_capacity(t);
        for &h in prev {
            let proj = if cfg.use_node_type {
                let mut parts = Vec::new();
                let mut index = Vec::new();
                for (pid, rows) in &self.ix.type_rows {
                    let x = tape.gather_rows(h, rows)?;
                    parts.push(tape.matmul_t(x, self.pv[*pid])?);
                    index.push(rows.clone());
                }
                tape.scatter_rows(&parts, &index, n)?
            } else {
                tape.matmul_t(h, self.pv[lay.node_proj[0]])?
            };
            let a = tape.matmul_t(proj, w_src)?;
            let c = tape.matmul_t(proj, w_dst)?;
            let a = tape.gather_rows(a, &self.ix.src)?;
            let c = tape.gather_rows(c, &self.ix.dst)?;
            let mut m = tape.add(a, c)?;
            if let Some(e) = edge_term {
                m = tape.add(m, e)?;
            }
            if let Some(b) = bias {
                m = tape.add_row(m, b[0])?;
            }
            messages.push(m);
        }

        let class = (cfg.distinct_slots && t > 1).then(|| {
            let vals: Vec<&Tensor> = prev.iter().map(|v| tape.value(*v)).collect();
            slot_classes(&vals)
        });
        let groups = pool_groups(&self.ix, n, t, class.as_deref());
        let pooled = tape.pool(&messages, groups, cfg.aggregator.pool_kind(), t)?;

        let mut next = Vec::with_capacity(t);
        for (i, &h) in prev.iter().enumerate() {
            let q = if t == 1 { pooled } else { tape.slice_cols(pooled, i * d, d)? };
            let hq = tape.concat(&[h, q])?;
            let mut u = tape.matmul_t(hq, self.pv[lay.update])?;
            if let Some(b) = bias {
                u = tape.add_row(u, b[1])?;
            }
            next.push(u);
        }
        Ok(next)
    }

    fn decode(&self, tape: &mut Tape, last: &[Var], rows: &[u32]) -> Result<Var> {
        let lay = &self.params.layout;
        let bias = lay.bias.map(|b| b.map(|i| self.pv[i]));
        let mut parts = Vec::with_capacity(last.len());
        for &h in last {
            parts.push(tape.gather_rows(h, rows)?);
        }
        let z = if parts.len() == 1 { parts[0] } else { tape.concat(&parts)? };
        let mut hidden = tape.matmul_t(z, self.pv[lay.dec_hidden])?;
        if let Some(b) = bias {
            hidden = tape.add_row(hidden, b[2])?;
        }
        let hidden = tape.relu(hidden);
        let mut y = tape.matmul_t(hidden, self.pv[lay.dec_out])?;
        if let Some(b) = bias {
            y = tape.add_row(y, b[3])?;
        }
        Ok(y)
    }

    fn encode(&self, tape: &mut Tape, query: NodeId) -> Result<Vec<Vec<Var>>> {
        let x = init_features(self.g, query, self.params.config.d)?;
        let x = tape.constant(x);
        let mut layers = vec![vec![x; self.params.config.effective_slots()]];
        for _ in 0..self.params.config.layers {
            let next = self.layer(tape, layers.last().unwrap())?;
            layers.push(next);
        }
        Ok(layers)
    }
}

/// Records encoder and decoder for `query`, scoring only `targets`
/// (duplicates allowed). Parameters enter the tape in
/// [`ModelParams::tensors`] order.
pub fn build_forward(g: &HinGraph, query: NodeId, params: &ModelParams, targets: &[NodeId]) -> Result<Forward> {
    let mut tape = Tape::new();
    let ctx = Ctx::new(&mut tape, g, params)?;
    let layers = ctx.encode(&mut tape, query)?;
    let mut rows = Vec::with_capacity(targets.len());
    for t in targets {
        if t.index() >= g.num_nodes() {
            return Err(Error::InvalidArgument(format!("target node {} out of range", t.0)));
        }
        rows.push(t.0);
    }
    let scores = ctx.decode(&mut tape, layers.last().unwrap(), &rows)?;
    Ok(Forward { tape, scores, targets: targets.to_vec() })
}

/// All slot states for `query`, layer by layer.
pub fn encode(g: &HinGraph, query: NodeId, params: &ModelParams) -> Result<NodeStates> {
    let mut tape = Tape::new();
    let ctx = Ctx::new(&mut tape, g, params)?;
    let layers = ctx.encode(&mut tape, query)?;
    Ok(NodeStates {
        layers: layers.iter().map(|l| l.iter().map(|v| tape.value(*v).clone()).collect()).collect(),
    })
}

/// One encoder layer applied to explicit slot states (`N x d` each).
pub fn encoder_layer(g: &HinGraph, prev: &[Tensor], params: &ModelParams) -> Result<Vec<Tensor>> {
    let t = params.config.effective_slots();
    if prev.len() != t {
        return Err(Error::Shape(format!("expected {t} slot states, got {}", prev.len())));
    }
    if prev.iter().any(|h| h.shape() != (g.num_nodes(), params.config.d)) {
        return Err(Error::Shape("slot state shape does not match graph and width".into()));
    }
    let mut tape = Tape::new();
    let ctx = Ctx::new(&mut tape, g, params)?;
    let vars: Vec<Var> = prev.iter().map(|h| tape.constant(h.clone())).collect();
    let next = ctx.layer(&mut tape, &vars)?;
    Ok(next.iter().map(|v| tape.value(*v).clone()).collect())
}

/// Decoder applied to one node's slot vectors.
pub fn decode(slots: &[&[f64]], params: &ModelParams) -> Result<f64> {
    let cfg = &params.config;
    if slots.len() != cfg.effective_slots() || slots.iter().any(|s| s.len() != cfg.d) {
        return Err(Error::Shape("decoder input does not match T x d".into()));
    }
    let lay = &params.layout;
    let z: Vec<f64> = slots.concat();
    let z = Tensor::from_vec(1, z.len(), z)?;
    let w = params.tensors();
    let mut hidden = z.matmul_t(&w[lay.dec_hidden])?;
    if let Some(b) = lay.bias {
        hidden.add_assign(&w[b[2]]);
    }
    let hidden = crate::tensor::relu(&hidden);
    let mut y = hidden.matmul_t(&w[lay.dec_out])?;
    if let Some(b) = lay.bias {
        y.add_assign(&w[b[3]]);
    }
    Ok(y.get(0, 0))
}

/// Predicted scores from `query` to every node of its type, in id order.
pub fn forward_all(g: &HinGraph, query: NodeId, params: &ModelParams) -> Result<Vec<(NodeId, f64)>> {
    if query.index() >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!("query node {} out of range", query.0)));
    }
    let targets = g.nodes_of_type(g.node_type(query)).to_vec();
    let f = build_forward(g, query, params, &targets)?;
    let scores = f.score_values();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("prediction for query {} is not finite", g.external_id(query))));
    }
    Ok(targets.into_iter().zip(scores).collect())
}

/// [`forward_all`] for many queries on `threads` workers; output order
/// follows `queries`.
pub fn forward_many(
    g: &HinGraph,
    queries: &[NodeId],
    params: &ModelParams,
    threads: usize,
) -> Result<Vec<Vec<(NodeId, f64)>>> {
    util::with_threads(threads, || queries.par_iter().map(|&q| forward_all(g, q, params)).collect())
}
