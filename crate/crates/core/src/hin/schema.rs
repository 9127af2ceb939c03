use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EdgeTypeId, NodeTypeId};
use crate::error::{Error, Result};

/// On-disk form of `schema.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub node_types: Vec<String>,
    pub edge_types: Vec<EdgeTypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTypeEntry {
    pub name: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTypeDef {
    pub name: String,
    pub a: NodeTypeId,
    pub b: NodeTypeId,
}

impl EdgeTypeDef {
    /// True when this edge type links the two node types, in either order.
    pub fn connects(&self, x: NodeTypeId, y: NodeTypeId) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

/// Node types and the undirected relation types between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSchema {
    node_types: Vec<String>,
    edge_types: Vec<EdgeTypeDef>,
}

impl NetworkSchema {
    pub fn new<S: AsRef<str>>(node_types: &[S], edge_types: &[(S, S, S)]) -> Result<Self> {
        let file = SchemaFile {
            node_types: node_types.iter().map(|s| s.as_ref().to_string()).collect(),
            edge_types: edge_types
                .iter()
                .map(|(n, a, b)| EdgeTypeEntry {
                    name: n.as_ref().to_string(),
                    a: a.as_ref().to_string(),
                    b: b.as_ref().to_string(),
                })
                .collect(),
        };
        Self::from_file(&file)
    }

    pub fn from_file(file: &SchemaFile) -> Result<Self> {
        let mut node_types: Vec<String> = Vec::with_capacity(file.node_types.len());
        for name in &file.node_types {
            if name.is_empty() {
                return Err(Error::Schema("empty node type name".into()));
            }
            if node_types.contains(name) {
                return Err(Error::Schema(format!("duplicate node type `{name}`")));
            }
            node_types.push(name.clone());
        }
        if node_types.len() > u16::MAX as usize || file.edge_types.len() > u16::MAX as usize {
            return Err(Error::Schema("too many types".into()));
        }
        let lookup = |n: &str| -> Result<NodeTypeId> {
            node_types
                .iter()
                .position(|t| t == n)
                .map(|i| NodeTypeId(i as u16))
                .ok_or_else(|| Error::Schema(format!("edge type references unknown node type `{n}`")))
        };
        let mut edge_types: Vec<EdgeTypeDef> = Vec::with_capacity(file.edge_types.len());
        for e in &file.edge_types {
            if e.name.is_empty() {
                return Err(Error::Schema("empty edge type name".into()));
            }
            if edge_types.iter().any(|d| d.name == e.name) {
                return Err(Error::Schema(format!("duplicate edge type `{}`", e.name)));
            }
            edge_types.push(EdgeTypeDef { name: e.name.clone(), a: lookup(&e.a)?, b: lookup(&e.b)? });
        }
        if node_types.len() <= 1 && edge_types.len() <= 1 {
            return Err(Error::Schema(
                "a heterogeneous network needs more than one node type or more than one edge type".into(),
            ));
        }
        Ok(NetworkSchema { node_types, edge_types })
    }

    pub fn to_file(&self) -> SchemaFile {
        SchemaFile {
            node_types: self.node_types.clone(),
            edge_types: self
                .edge_types
                .iter()
                .map(|e| EdgeTypeEntry {
                    name: e.name.clone(),
                    a: self.node_type_name(e.a).to_string(),
                    b: self.node_type_name(e.b).to_string(),
                })
                .collect(),
        }
    }

    pub fn num_node_types(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_edge_types(&self) -> usize {
        self.edge_types.len()
    }

    pub fn node_type_names(&self) -> &[String] {
        &self.node_types
    }

    pub fn node_type_name(&self, t: NodeTypeId) -> &str {
        &self.node_types[t.index()]
    }

    pub fn edge_type(&self, r: EdgeTypeId) -> &EdgeTypeDef {
        &self.edge_types[r.index()]
    }

    pub fn edge_types(&self) -> &[EdgeTypeDef] {
        &self.edge_types
    }

    pub fn node_type_id(&self, name: &str) -> Option<NodeTypeId> {
        self.node_types.iter().position(|t| t == name).map(|i| NodeTypeId(i as u16))
    }

    pub fn edge_type_id(&self, name: &str) -> Option<EdgeTypeId> {
        self.edge_types.iter().position(|e| e.name == name).map(|i| EdgeTypeId(i as u16))
    }

    /// Edge types linking `x` and `y` (either orientation).
    pub fn edge_types_between(&self, x: NodeTypeId, y: NodeTypeId) -> Vec<EdgeTypeId> {
        self.edge_types
            .iter()
            .enumerate()
            .filter(|(_, e)| e.connects(x, y))
            .map(|(i, _)| EdgeTypeId(i as u16))
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON form. Order-sensitive, since type ids
    /// are positional.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file()).expect("schema serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
