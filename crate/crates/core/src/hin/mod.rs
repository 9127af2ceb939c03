//! Typed graph model: schema, immutable graph, meta-paths, ingestion and
//! synthetic generation.

mod graph;
mod io;
mod metapath;
mod schema;
mod synth;

pub use graph::{GraphBuilder, HinGraph};
pub(crate) use io::{data_lines, parse_err};
pub use io::{
    load_graph, load_graph_dir, load_schema, save_graph, write_id_map, EDGES_FILE, ID_MAP_FILE, NODES_FILE, SCHEMA_FILE,
};
pub use metapath::MetaPath;
pub use schema::{EdgeTypeDef, NetworkSchema, SchemaFile};
pub use synth::{apc_schema, synth_apc, synth_graph};

use serde::{Deserialize, Serialize};

/// Dense node index in `0..graph.num_nodes()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeTypeId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeTypeId(pub u16);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NodeTypeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeTypeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
