use std::fmt;

use super::{EdgeTypeId, NetworkSchema, NodeTypeId};
use crate::error::{Error, Result};

/// A walk template `A1 -R1- A2 -R2- ... -Rl- A(l+1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    node_types: Vec<NodeTypeId>,
    edge_types: Vec<EdgeTypeId>,
}

impl MetaPath {
    pub fn new(schema: &NetworkSchema, node_types: Vec<NodeTypeId>, edge_types: Vec<EdgeTypeId>) -> Result<Self> {
        let err = |msg: String| Error::MetaPath { spec: format!("{node_types:?}/{edge_types:?}"), msg };
        if node_types.len() < 2 {
            return Err(err("needs at least two node types".into()));
        }
        if edge_types.len() + 1 != node_types.len() {
            return Err(err("edge type count must be node type count minus one".into()));
        }
        for t in &node_types {
            if t.index() >= schema.num_node_types() {
                return Err(err(format!("node type id {} out of range", t.0)));
            }
        }
        for (i, r) in edge_types.iter().enumerate() {
            if r.index() >= schema.num_edge_types() {
                return Err(err(format!("edge type id {} out of range", r.0)));
            }
            if !schema.edge_type(*r).connects(node_types[i], node_types[i + 1]) {
                return Err(err(format!(
                    "edge type `{}` does not connect {} and {}",
                    schema.edge_type(*r).name,
                    schema.node_type_name(node_types[i]),
                    schema.node_type_name(node_types[i + 1])
                )));
            }
        }
        Ok(MetaPath { node_types, edge_types })
    }

    /// Parses `A-P-A` (edge types inferred) or `A[AP]P[PA]A` (explicit).
    ///
    /// In the explicit form a bracket holds an edge type name. A bracket may
    /// also spell the endpoint names of the traversed relation in walk order
    /// (`[PA]` for the `AP` relation walked from P to A) when that is unique.
    pub fn parse(spec: &str, schema: &NetworkSchema) -> Result<Self> {
        let err = |msg: String| Error::MetaPath { spec: spec.to_string(), msg };
        let spec_trim = spec.trim();
        if spec_trim.is_empty() {
            return Err(err("empty meta-path".into()));
        }
        let (names, brackets) = if spec_trim.contains('[') {
            split_explicit(spec_trim).map_err(err)?
        } else {
            let names: Vec<String> = spec_trim.split('-').map(|s| s.trim().to_string()).collect();
            let n = names.len();
            (names, vec![None; n.saturating_sub(1)])
        };
        if names.len() < 2 {
            return Err(err("needs at least two node types".into()));
        }
        let mut node_types = Vec::with_capacity(names.len());
        for n in &names {
            node_types.push(schema.node_type_id(n).ok_or_else(|| err(format!("unknown node type `{n}`")))?);
        }
        let mut edge_types = Vec::with_capacity(brackets.len());
        for (i, b) in brackets.iter().enumerate() {
            let (x, y) = (node_types[i], node_types[i + 1]);
            let candidates = schema.edge_types_between(x, y);
            let r = match b {
                None => match candidates.as_slice() {
                    [] => {
                        return Err(err(format!("no edge type connects {} and {}", names[i], names[i + 1])));
                    }
                    [r] => *r,
                    _ => {
                        return Err(err(format!(
                            "ambiguous: {} edge types connect {} and {}; use explicit syntax like {}[{}]{}",
                            candidates.len(),
                            names[i],
                            names[i + 1],
                            names[i],
                            schema.edge_type(candidates[0]).name,
                            names[i + 1]
                        )));
                    }
                },
                Some(label) => resolve_bracket(schema, label, x, y, &candidates)
                    .ok_or_else(|| err(format!("edge type `{label}` does not connect {} and {}", names[i], names[i + 1])))?,
            };
            edge_types.push(r);
        }
        MetaPath::new(schema, node_types, edge_types).map_err(|e| match e {
            Error::MetaPath { msg, .. } => err(msg),
            other => other,
        })
    }

    pub fn node_types(&self) -> &[NodeTypeId] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[EdgeTypeId] {
        &self.edge_types
    }

    /// Number of relations `l`.
    pub fn len(&self) -> usize {
        self.edge_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_types.is_empty()
    }

    pub fn source_type(&self) -> NodeTypeId {
        self.node_types[0]
    }

    pub fn target_type(&self) -> NodeTypeId {
        *self.node_types.last().unwrap()
    }

    pub fn is_symmetric(&self) -> bool {
        self.node_types.iter().eq(self.node_types.iter().rev()) && self.edge_types.iter().eq(self.edge_types.iter().rev())
    }

    /// Compact form (`A-P-A`) when every step is unambiguous under `schema`,
    /// explicit form otherwise.
    pub fn display(&self, schema: &NetworkSchema) -> String {
        let ambiguous = (0..self.len())
            .any(|i| schema.edge_types_between(self.node_types[i], self.node_types[i + 1]).len() > 1);
        let mut out = String::from(schema.node_type_name(self.node_types[0]));
        for (i, r) in self.edge_types.iter().enumerate() {
            if ambiguous {
                out.push('[');
                out.push_str(&schema.edge_type(*r).name);
                out.push(']');
            } else {
                out.push('-');
            }
            out.push_str(schema.node_type_name(self.node_types[i + 1]));
        }
        out
    }

    /// Every symmetric meta-path with `2..=max_edges` relations (even counts
    /// only when the schema has no same-type relation) valid for `schema`.
    pub fn enumerate_symmetric(schema: &NetworkSchema, max_edges: usize) -> Vec<MetaPath> {
        let mut out = Vec::new();
        // half-walks of h relations, mirrored; odd lengths take a same-type middle relation
        let mut halves: Vec<(Vec<NodeTypeId>, Vec<EdgeTypeId>)> = (0..schema.num_node_types())
            .map(|t| (vec![NodeTypeId(t as u16)], Vec::new()))
            .collect();
        for h in 0..=max_edges / 2 {
            for (nodes, edges) in &halves {
                let last = *nodes.last().unwrap();
                if h >= 1 && 2 * h <= max_edges {
                    let mut n = nodes.clone();
                    let mut e = edges.clone();
                    n.extend(nodes.iter().rev().skip(1));
                    e.extend(edges.iter().rev());
                    out.push(MetaPath { node_types: n, edge_types: e });
                }
                if 2 * h < max_edges {
                    for (ri, def) in schema.edge_types().iter().enumerate() {
                        if def.a == last && def.b == last {
                            let mut n = nodes.clone();
                            let mut e = edges.clone();
                            e.push(EdgeTypeId(ri as u16));
                            e.extend(edges.iter().rev());
                            n.push(last);
                            n.extend(nodes.iter().rev().skip(1));
                            out.push(MetaPath { node_types: n, edge_types: e });
                        }
                    }
                }
            }
            let mut next = Vec::new();
            for (nodes, edges) in &halves {
                let last = *nodes.last().unwrap();
                for (ri, def) in schema.edge_types().iter().enumerate() {
                    let other = if def.a == last {
                        def.b
                    } else if def.b == last {
                        def.a
                    } else {
                        continue;
                    };
                    let mut n = nodes.clone();
                    let mut e = edges.clone();
                    n.push(other);
                    e.push(EdgeTypeId(ri as u16));
                    next.push((n, e));
                }
            }
            halves = next;
        }
        out.sort_by(|a, b| (a.len(), &a.node_types, &a.edge_types).cmp(&(b.len(), &b.node_types, &b.edge_types)));
        out
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.node_types.iter().enumerate() {
            if i > 0 {
                write!(f, "-[{}]-", self.edge_types[i - 1].0)?;
            }
            write!(f, "{}", t.0)?;
        }
        Ok(())
    }
}

type Split = (Vec<String>, Vec<Option<String>>);

fn split_explicit(spec: &str) -> std::result::Result<Split, String> {
    let mut names = Vec::new();
    let mut brackets = Vec::new();
    let mut rest = spec;
    loop {
        let stop = rest.find(['[', '-']).unwrap_or(rest.len());
        let name = rest[..stop].trim();
        if name.is_empty() {
            return Err("missing node type name".into());
        }
        names.push(name.to_string());
        rest = &rest[stop..];
        if rest.is_empty() {
            break;
        }
        if let Some(after) = rest.strip_prefix('[') {
            let close = after.find(']').ok_or("unterminated `[`")?;
            let label = after[..close].trim();
            if label.is_empty() {
                return Err("empty edge type in brackets".into());
            }
            brackets.push(Some(label.to_string()));
            rest = &after[close + 1..];
        } else {
            brackets.push(None);
            rest = &rest[1..];
        }
        if rest.is_empty() {
            return Err("meta-path ends with a relation".into());
        }
    }
    Ok((names, brackets))
}

fn resolve_bracket(
    schema: &NetworkSchema,
    label: &str,
    x: NodeTypeId,
    y: NodeTypeId,
    candidates: &[EdgeTypeId],
) -> Option<EdgeTypeId> {
    if let Some(r) = schema.edge_type_id(label) {
        return candidates.contains(&r).then_some(r);
    }
    let walked = format!("{}{}", schema.node_type_name(x), schema.node_type_name(y));
    if label == walked && candidates.len() == 1 {
        return Some(candidates[0]);
    }
    None
}
