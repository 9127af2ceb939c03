use std::collections::{HashMap, HashSet};

use super::{EdgeTypeId, NetworkSchema, NodeId, NodeTypeId};
use crate::error::{Error, Result};

/// Immutable undirected typed multigraph (at most one edge per pair and type).
///
/// Every edge is stored in both endpoint adjacency lists. Lists are sorted by
/// `(neighbor, edge type)`.
#[derive(Debug, Clone)]
pub struct HinGraph {
    schema: NetworkSchema,
    node_types: Vec<NodeTypeId>,
    external_ids: Vec<String>,
    id_lookup: HashMap<String, NodeId>,
    adj_offsets: Vec<usize>,
    adj: Vec<(NodeId, EdgeTypeId)>,
    by_type: Vec<Vec<NodeId>>,
    local_index: Vec<u32>,
    num_edges: usize,
}

impl HinGraph {
    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    /// Undirected edge count (each edge counted once).
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn node_type(&self, v: NodeId) -> NodeTypeId {
        self.node_types[v.index()]
    }

    pub fn node_types(&self) -> &[NodeTypeId] {
        &self.node_types
    }

    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeTypeId)] {
        &self.adj[self.adj_offsets[v.index()]..self.adj_offsets[v.index() + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj_offsets[v.index() + 1] - self.adj_offsets[v.index()]
    }

    /// Neighbors of `v` reached through edges of type `r`.
    pub fn neighbors_via(&self, v: NodeId, r: EdgeTypeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors(v).iter().filter(move |(_, e)| *e == r).map(|(n, _)| *n)
    }

    /// Adjacency in CSR form: `(offsets, entries)`; node `v`'s list is
    /// `entries[offsets[v]..offsets[v + 1]]`.
    pub fn adjacency_csr(&self) -> (&[usize], &[(NodeId, EdgeTypeId)]) {
        (&self.adj_offsets, &self.adj)
    }

    /// Nodes of type `t`, ascending.
    pub fn nodes_of_type(&self, t: NodeTypeId) -> &[NodeId] {
        &self.by_type[t.index()]
    }

    /// Position of `v` inside `nodes_of_type(node_type(v))`.
    pub fn local_index(&self, v: NodeId) -> usize {
        self.local_index[v.index()] as usize
    }

    pub fn external_id(&self, v: NodeId) -> &str {
        &self.external_ids[v.index()]
    }

    pub fn find_node(&self, external: &str) -> Option<NodeId> {
        self.id_lookup.get(external).copied()
    }

    /// Each undirected edge once, as `(s, t, r)` with `s < t`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, EdgeTypeId)> + '_ {
        (0..self.num_nodes()).flat_map(move |s| {
            let s = NodeId(s as u32);
            self.neighbors(s).iter().filter(move |(t, _)| s < *t).map(move |(t, r)| (s, *t, *r))
        })
    }
}

/// Incremental, validating constructor for [`HinGraph`].
#[derive(Debug)]
pub struct GraphBuilder {
    schema: NetworkSchema,
    node_types: Vec<NodeTypeId>,
    external_ids: Vec<String>,
    id_lookup: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId, EdgeTypeId)>,
    seen: HashSet<(NodeId, NodeId, EdgeTypeId)>,
}

impl GraphBuilder {
    pub fn new(schema: NetworkSchema) -> Self {
        GraphBuilder {
            schema,
            node_types: Vec::new(),
            external_ids: Vec::new(),
            id_lookup: HashMap::new(),
            edges: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn add_node(&mut self, external_id: &str, node_type: NodeTypeId) -> Result<NodeId> {
        if node_type.index() >= self.schema.num_node_types() {
            return Err(Error::Graph(format!("node type id {} out of range", node_type.0)));
        }
        if self.id_lookup.contains_key(external_id) {
            return Err(Error::Graph(format!("duplicate node id `{external_id}`")));
        }
        if self.node_types.len() >= u32::MAX as usize {
            return Err(Error::Graph("too many nodes".into()));
        }
        let id = NodeId(self.node_types.len() as u32);
        self.node_types.push(node_type);
        self.external_ids.push(external_id.to_string());
        self.id_lookup.insert(external_id.to_string(), id);
        Ok(id)
    }

    pub fn lookup(&self, external_id: &str) -> Option<NodeId> {
        self.id_lookup.get(external_id).copied()
    }

    pub fn add_edge(&mut self, s: NodeId, t: NodeId, r: EdgeTypeId) -> Result<()> {
        let n = self.node_types.len();
        if s.index() >= n || t.index() >= n {
            return Err(Error::Graph(format!("dangling edge endpoint ({}, {})", s.0, t.0)));
        }
        if r.index() >= self.schema.num_edge_types() {
            return Err(Error::Graph(format!("edge type id {} out of range", r.0)));
        }
        if s == t {
            return Err(Error::Graph(format!(
                "self-loop on `{}` is not allowed",
                self.external_ids[s.index()]
            )));
        }
        let def = self.schema.edge_type(r);
        let (ts, tt) = (self.node_types[s.index()], self.node_types[t.index()]);
        if !def.connects(ts, tt) {
            return Err(Error::Graph(format!(
                "edge type `{}` connects {}-{} but endpoints `{}`,`{}` have types {}-{}",
                def.name,
                self.schema.node_type_name(def.a),
                self.schema.node_type_name(def.b),
                self.external_ids[s.index()],
                self.external_ids[t.index()],
                self.schema.node_type_name(ts),
                self.schema.node_type_name(tt),
            )));
        }
        let key = if s < t { (s, t, r) } else { (t, s, r) };
        if !self.seen.insert(key) {
            return Err(Error::Graph(format!(
                "parallel edge `{}`-`{}` of type `{}`",
                self.external_ids[s.index()],
                self.external_ids[t.index()],
                def.name
            )));
        }
        self.edges.push(key);
        Ok(())
    }

    pub fn build(self) -> HinGraph {
        let n = self.node_types.len();
        let mut degree = vec![0usize; n];
        for &(s, t, _) in &self.edges {
            degree[s.index()] += 1;
            degree[t.index()] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets[..n].to_vec();
        let mut adj = vec![(NodeId(0), EdgeTypeId(0)); self.edges.len() * 2];
        for &(s, t, r) in &self.edges {
            adj[fill[s.index()]] = (t, r);
            fill[s.index()] += 1;
            adj[fill[t.index()]] = (s, r);
            fill[t.index()] += 1;
        }
        for v in 0..n {
            adj[adj_offsets[v]..adj_offsets[v + 1]].sort_unstable();
        }
        let mut by_type = vec![Vec::new(); self.schema.num_node_types()];
        let mut local_index = vec![0u32; n];
        for (v, t) in self.node_types.iter().enumerate() {
            local_index[v] = by_type[t.index()].len() as u32;
            by_type[t.index()].push(NodeId(v as u32));
        }
        HinGraph {
            schema: self.schema,
            node_types: self.node_types,
            external_ids: self.external_ids,
            id_lookup: self.id_lookup,
            adj_offsets,
            adj,
            by_type,
            local_index,
            num_edges: self.edges.len(),
        }
    }
}
