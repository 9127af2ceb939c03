use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{GraphBuilder, HinGraph, NetworkSchema, SchemaFile};
use crate::error::{Error, Result};

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const ID_MAP_FILE: &str = "id_map.tsv";

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub(crate) fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

pub fn load_schema(path: &Path) -> Result<NetworkSchema> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SchemaFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    NetworkSchema::from_file(&file)
}

/// Loads `nodes.tsv`, `edges.tsv` and `schema.json`. Dense ids follow the
/// order of `nodes.tsv`.
pub fn load_graph(nodes_path: &Path, edges_path: &Path, schema_path: &Path) -> Result<HinGraph> {
    let schema = load_schema(schema_path)?;
    let mut builder = GraphBuilder::new(schema);
    for (line, text) in data_lines(nodes_path)? {
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 2 {
            return Err(parse_err(nodes_path, line, format!("expected 2 tab-separated columns, found {}", cols.len())));
        }
        let (id, ty) = (cols[0].trim(), cols[1].trim());
        if id.is_empty() {
            return Err(parse_err(nodes_path, line, "empty node id"));
        }
        let t = builder
            .schema()
            .node_type_id(ty)
            .ok_or_else(|| parse_err(nodes_path, line, format!("unknown node type `{ty}`")))?;
        builder.add_node(id, t).map_err(|e| parse_err(nodes_path, line, strip(e)))?;
    }
    for (line, text) in data_lines(edges_path)? {
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(edges_path, line, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let (s, t, r) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
        let s_id = builder
            .lookup(s)
            .ok_or_else(|| parse_err(edges_path, line, format!("dangling edge endpoint `{s}`")))?;
        let t_id = builder
            .lookup(t)
            .ok_or_else(|| parse_err(edges_path, line, format!("dangling edge endpoint `{t}`")))?;
        let r_id = builder
            .schema()
            .edge_type_id(r)
            .ok_or_else(|| parse_err(edges_path, line, format!("unknown edge type `{r}`")))?;
        builder.add_edge(s_id, t_id, r_id).map_err(|e| parse_err(edges_path, line, strip(e)))?;
    }
    Ok(builder.build())
}

fn strip(e: Error) -> String {
    match e {
        Error::Graph(m) => m,
        other => other.to_string(),
    }
}

/// Loads the three standard files from `dir`.
pub fn load_graph_dir(dir: &Path) -> Result<HinGraph> {
    load_graph(&dir.join(NODES_FILE), &dir.join(EDGES_FILE), &dir.join(SCHEMA_FILE))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `nodes.tsv`, `edges.tsv`, `schema.json` into `dir` (created if
/// needed). Returns the written paths.
pub fn save_graph(g: &HinGraph, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = g.schema();
    let nodes = dir.join(NODES_FILE);
    let mut w = create(&nodes)?;
    let io = |e| Error::io(&nodes, e);
    for v in 0..g.num_nodes() {
        let v = super::NodeId(v as u32);
        writeln!(w, "{}\t{}", g.external_id(v), schema.node_type_name(g.node_type(v))).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let edges = dir.join(EDGES_FILE);
    let mut w = create(&edges)?;
    let io = |e| Error::io(&edges, e);
    for (s, t, r) in g.edges() {
        writeln!(w, "{}\t{}\t{}", g.external_id(s), g.external_id(t), schema.edge_type(r).name).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let schema_path = dir.join(SCHEMA_FILE);
    let text = serde_json::to_string_pretty(&schema.to_file())?;
    fs::write(&schema_path, text + "\n").map_err(|e| Error::io(&schema_path, e))?;
    Ok(vec![nodes, edges, schema_path])
}

/// `dense_id<TAB>original_id`, one line per node.
pub fn write_id_map(g: &HinGraph, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for v in 0..g.num_nodes() {
        writeln!(w, "{}\t{}", v, g.external_id(super::NodeId(v as u32))).map_err(io)?;
    }
    w.flush().map_err(io)
}
