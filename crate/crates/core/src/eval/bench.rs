use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hin::{synth_apc, NodeTypeId};
use crate::model::{forward_all, ModelConfig, ModelParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    /// Queries scored per graph.
    pub queries: usize,
    /// Repetitions; the fastest is kept.
    pub reps: usize,
    pub model: ModelConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { seed: 0, queries: 4, reps: 3, model: ModelConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub nodes: usize,
    pub edges: usize,
    pub seconds: f64,
}

/// Model inference wall-clock on seeded A-P-C graphs of the given sizes
/// (constant mean degree), for a fixed number of author queries.
pub fn bench_inference(sizes: &[usize], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let g = synth_apc(n, cfg.seed)?;
        let params = ModelParams::init(g.schema(), cfg.model.clone(), cfg.seed)?;
        let authors = g.nodes_of_type(NodeTypeId(0));
        let queries = &authors[..cfg.queries.min(authors.len())];
        let mut best = f64::INFINITY;
        for _ in 0..cfg.reps.max(1) {
            let t = Instant::now();
            for &q in queries {
                std::hint::black_box(forward_all(&g, q, &params)?);
            }
            best = best.min(t.elapsed().as_secs_f64());
        }
        log::info!("bench: {n} nodes, {} edges: {best:.4}s", g.num_edges());
        out.push(BenchRow { nodes: g.num_nodes(), edges: g.num_edges(), seconds: best });
    }
    Ok(out)
}
