use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphBuilder, HinGraph, NetworkSchema, NodeId, NodeTypeId};
use crate::error::{Error, Result};

/// Random typed graph: `nodes_per_type[t]` nodes of each type and
/// `edges_per_type[r]` distinct edges of each relation, sampled uniformly
/// without replacement. Node ids are `<type name><index>`.
pub fn synth_graph(
    schema: &NetworkSchema,
    nodes_per_type: &[usize],
    edges_per_type: &[usize],
    seed: u64,
) -> Result<HinGraph> {
    if nodes_per_type.len() != schema.num_node_types() {
        return Err(Error::InvalidArgument(format!(
            "expected {} node counts, got {}",
            schema.num_node_types(),
            nodes_per_type.len()
        )));
    }
    if edges_per_type.len() != schema.num_edge_types() {
        return Err(Error::InvalidArgument(format!(
            "expected {} edge counts, got {}",
            schema.num_edge_types(),
            edges_per_type.len()
        )));
    }
    let mut builder = GraphBuilder::new(schema.clone());
    let mut first = Vec::with_capacity(nodes_per_type.len());
    for (t, &n) in nodes_per_type.iter().enumerate() {
        let ty = NodeTypeId(t as u16);
        let name = schema.node_type_name(ty).to_string();
        first.push(builder.num_nodes());
        for i in 0..n {
            builder.add_node(&format!("{name}{i}"), ty)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (r, (&k, def)) in edges_per_type.iter().zip(schema.edge_types()).enumerate() {
        let (na, nb) = (nodes_per_type[def.a.index()], nodes_per_type[def.b.index()]);
        let same = def.a == def.b;
        let capacity = if same { na * na.saturating_sub(1) / 2 } else { na * nb };
        if k > capacity {
            return Err(Error::InvalidArgument(format!(
                "edge type `{}` asks for {k} edges but only {capacity} distinct pairs exist",
                def.name
            )));
        }
        if k == 0 {
            continue;
        }
        let mut picks = index::sample(&mut rng, capacity, k).into_vec();
        picks.sort_unstable();
        for code in picks {
            let (i, j) = if same { unrank_pair(code) } else { (code / nb, code % nb) };
            let s = NodeId((first[def.a.index()] + i) as u32);
            let t = NodeId((first[def.b.index()] + j) as u32);
            builder.add_edge(s, t, super::EdgeTypeId(r as u16))?;
        }
    }
    Ok(builder.build())
}

/// Author-paper-venue schema used by the presets below.
pub fn apc_schema() -> NetworkSchema {
    NetworkSchema::new(&["A", "P", "C"], &[("AP", "A", "P"), ("PC", "P", "C")]).expect("static schema")
}

/// Bibliographic-style graph with about `total` nodes split 2:2:1 over
/// A/P/C, three authorships and one venue link per paper on average
/// (mean degree stays near 3.2 at every size).
pub fn synth_apc(total: usize, seed: u64) -> Result<HinGraph> {
    if total < 5 {
        return Err(Error::InvalidArgument("synthetic A-P-C graph needs at least 5 nodes".into()));
    }
    let n_a = total * 2 / 5;
    let n_p = total * 2 / 5;
    let n_c = total - n_a - n_p;
    synth_graph(&apc_schema(), &[n_a, n_p, n_c], &[(3 * n_p).min(n_a * n_p), n_p.min(n_p * n_c)], seed)
}

/// Maps `code` in `0..n(n-1)/2` to the pair `(i, j)` with `i > j`.
fn unrank_pair(code: usize) -> (usize, usize) {
    // i(i-1)/2 <= code < i(i+1)/2
    let mut i = (((8.0 * code as f64 + 1.0).sqrt() + 1.0) / 2.0) as usize;
    while i * (i - 1) / 2 > code {
        i -= 1;
    }
    while (i + 1) * i / 2 <= code {
        i += 1;
    }
    (i, code - i * (i - 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::save_graph;

    fn ap() -> NetworkSchema {
        NetworkSchema::new(&["A", "P"], &[("AP", "A", "P")]).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_graph(&ap(), &[10, 20], &[30], 7).unwrap();
        let b = synth_graph(&ap(), &[10, 20], &[30], 7).unwrap();
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_graph(&a, da.path()).unwrap();
        save_graph(&b, db.path()).unwrap();
        for f in ["nodes.tsv", "edges.tsv", "schema.json"] {
            assert_eq!(
                std::fs::read(da.path().join(f)).unwrap(),
                std::fs::read(db.path().join(f)).unwrap()
            );
        }
        let c = synth_graph(&ap(), &[10, 20], &[30], 8).unwrap();
        assert_ne!(a.edges().collect::<Vec<_>>(), c.edges().collect::<Vec<_>>());
    }

    #[test]
    fn counts_and_isolated() {
        let g = synth_graph(&ap(), &[10, 20], &[30], 1).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (30, 30));
        let g = synth_graph(&ap(), &[3, 4], &[0], 1).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn apc_preset_scales_degree() {
        let small = synth_apc(100, 1).unwrap();
        let big = synth_apc(1000, 1).unwrap();
        assert_eq!((small.num_nodes(), small.num_edges()), (100, 160));
        assert_eq!((big.num_nodes(), big.num_edges()), (1000, 1600));
    }

    #[test]
    fn infeasible() {
        assert!(synth_graph(&ap(), &[2, 2], &[5], 1).is_err());
        assert!(synth_graph(&ap(), &[2, 2], &[4], 1).is_ok());
    }

    #[test]
    fn same_type_relation_fills_all_pairs() {
        let s = NetworkSchema::new(&["P", "V"], &[("cites", "P", "P"), ("PV", "P", "V")]).unwrap();
        let g = synth_graph(&s, &[6, 2], &[15, 3], 3).unwrap();
        assert_eq!(g.num_edges(), 18);
    }

    #[test]
    fn unrank_covers_range() {
        let mut seen = std::collections::HashSet::new();
        for code in 0..(50 * 49 / 2) {
            let (i, j) = unrank_pair(code);
            assert!(i > j && i < 50);
            assert!(seen.insert((i, j)));
        }
    }
}
