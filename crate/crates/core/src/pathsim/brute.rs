use crate::error::{Error, Result};
use crate::hin::{HinGraph, MetaPath, NodeId};

/// Counts walks from `x` to `y` whose type sequence matches `p`, by direct
/// enumeration over adjacency lists. Exponential in `p.len()`; meant as an
/// oracle for small graphs.
pub fn count_paths_bruteforce(g: &HinGraph, p: &MetaPath, x: NodeId, y: NodeId) -> Result<u64> {
    for v in [x, y] {
        if v.index() >= g.num_nodes() {
            return Err(Error::InvalidArgument(format!("node {} out of range", v.0)));
        }
    }
    if g.node_type(x) != p.source_type() || g.node_type(y) != p.target_type() {
        return Err(Error::TypeMismatch(format!(
            "endpoints have types {}/{}, meta-path expects {}/{}",
            g.schema().node_type_name(g.node_type(x)),
            g.schema().node_type_name(g.node_type(y)),
            g.schema().node_type_name(p.source_type()),
            g.schema().node_type_name(p.target_type()),
        )));
    }
    let mut count = 0u64;
    walk(g, p, x, 0, y, &mut count)?;
    Ok(count)
}

fn walk(g: &HinGraph, p: &MetaPath, at: NodeId, step: usize, y: NodeId, count: &mut u64) -> Result<()> {
    if step == p.len() {
        if at == y {
            *count = count
                .checked_add(1)
                .ok_or_else(|| Error::Overflow("brute-force walk count".into()))?;
        }
        return Ok(());
    }
    let r = p.edge_types()[step];
    let next_type = p.node_types()[step + 1];
    for &(n, e) in g.neighbors(at) {
        if e == r && g.node_type(n) == next_type {
            walk(g, p, n, step + 1, y, count)?;
        }
    }
    Ok(())
}
