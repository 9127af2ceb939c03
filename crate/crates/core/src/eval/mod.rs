//! Approximation (RMSE) and similarity-search (nDCG@k) evaluation, sweep
//! tables and inference timing.

mod bench;
mod metrics;
mod sweep;

pub use bench::{bench_inference, BenchConfig, BenchRow};
pub use metrics::{dcg, ndcg_at_k, rmse};
pub use sweep::{linear_fit, write_sweep, LinearFit, SweepRow};

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hin::{HinGraph, NodeId};
use crate::model::{forward_all, ModelParams};
use crate::pathsim::PathSimEngine;
use crate::util::{self, format_sig};

/// Source of predicted scores for a query against every node of its type.
pub enum Backend<'a> {
    Exact(PathSimEngine<'a>),
    Model(&'a ModelParams),
    Constant(f64),
    /// Independent uniform scores, seeded per (seed, query).
    Random(u64),
}

impl Backend<'_> {
    pub fn name(&self) -> String {
        match self {
            Backend::Exact(_) => "exact".into(),
            Backend::Model(_) => "model".into(),
            Backend::Constant(c) => format!("constant({c})"),
            Backend::Random(s) => format!("random({s})"),
        }
    }

    /// Scores aligned with `g.nodes_of_type(type of q)`.
    pub fn scores(&self, g: &HinGraph, q: NodeId) -> Result<Vec<f64>> {
        let anchors = g.nodes_of_type(g.node_type(q));
        match self {
            Backend::Exact(e) => {
                let row = e.row(q)?;
                let mut out = vec![0.0; anchors.len()];
                for (v, s) in row {
                    out[g.local_index(v)] = s;
                }
                Ok(out)
            }
            Backend::Model(p) => Ok(forward_all(g, q, p)?.into_iter().map(|(_, s)| s).collect()),
            Backend::Constant(c) => Ok(vec![*c; anchors.len()]),
            Backend::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ q.0 as u64);
                Ok((0..anchors.len()).map(|_| rng.gen::<f64>()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query: String,
    pub rmse: f64,
    pub ndcg: f64,
    /// No candidate has positive relevance; nDCG is 0 by convention.
    pub idcg_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub scoring_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metapath: String,
    pub backend: String,
    pub k: usize,
    pub include_self: bool,
    pub n_queries: usize,
    /// (query, target) pairs entering the RMSE.
    pub n_pairs: usize,
    /// Over all pairs of all queries.
    pub rmse: f64,
    pub mean_ndcg: f64,
    pub zero_idcg_queries: usize,
    /// Predictions were clipped to [0, 1] before scoring.
    #[serde(default)]
    pub clamped: bool,
    pub config_fingerprint: String,
    pub per_query: Vec<QueryEval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// sha256 of a serializable config, hex.
pub fn fingerprint<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(config).unwrap_or_default();
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub k: usize,
    pub include_self: bool,
    pub threads: usize,
    pub metapath: String,
    pub config_fingerprint: String,
    /// Clip predictions to [0, 1] first. Off by default: raw decoder
    /// outputs are what the model produces.
    pub clamp: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { k: 10, include_self: false, threads: 1, metapath: String::new(), config_fingerprint: String::new(), clamp: false }
    }
}

/// Scores every test query with `backend` and reports RMSE over all
/// same-type targets plus nDCG@k against the exact `rows` (nonzero entries;
/// missing targets are 0).
pub fn evaluate(
    g: &HinGraph,
    backend: &Backend,
    queries: &[NodeId],
    rows: &[Vec<(NodeId, f64)>],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if queries.len() != rows.len() {
        return Err(Error::InvalidArgument(format!("{} queries but {} exact rows", queries.len(), rows.len())));
    }
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no test queries to evaluate".into()));
    }
    if opts.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let start = Instant::now();
    let mut scored: Vec<Vec<f64>> = util::with_threads(opts.threads, || {
        queries.par_iter().map(|&q| backend.scores(g, q)).collect::<Result<Vec<_>>>()
    })?;
    if opts.clamp {
        scored.iter_mut().flatten().for_each(|s| *s = s.clamp(0.0, 1.0));
    }
    let scoring_seconds = start.elapsed().as_secs_f64();

    let mut per_query = Vec::with_capacity(queries.len());
    let mut ss = 0.0;
    let mut n_pairs = 0;
    for ((&q, row), pred) in queries.iter().zip(rows).zip(&scored) {
        let anchors = g.nodes_of_type(g.node_type(q));
        let mut truth = vec![0.0; anchors.len()];
        for &(v, s) in row {
            if g.node_type(v) != g.node_type(q) {
                return Err(Error::TypeMismatch(format!("row of `{}` lists `{}`", g.external_id(q), g.external_id(v))));
            }
            truth[g.local_index(v)] = s;
        }
        let r = rmse(pred, &truth)?;
        ss += r * r * anchors.len() as f64;
        n_pairs += anchors.len();

        let mut ranked: Vec<(NodeId, f64)> = anchors
            .iter()
            .zip(pred)
            .filter(|(v, _)| opts.include_self || **v != q)
            .map(|(v, s)| (*v, *s))
            .collect();
        util::sort_ranked(&mut ranked);
        let order: Vec<NodeId> = ranked.iter().map(|e| e.0).collect();
        let relevance: HashMap<NodeId, f64> = row
            .iter()
            .filter(|(v, _)| opts.include_self || *v != q)
            .copied()
            .collect();
        let idcg_zero = !relevance.values().any(|&x| x > 0.0);
        per_query.push(QueryEval {
            query: g.external_id(q).to_string(),
            rmse: r,
            ndcg: ndcg_at_k(&order, &relevance, opts.k),
            idcg_zero,
        });
    }
    let mean_ndcg = per_query.iter().map(|x| x.ndcg).sum::<f64>() / per_query.len() as f64;
    Ok(EvalReport {
        metapath: opts.metapath.clone(),
        backend: backend.name(),
        k: opts.k,
        include_self: opts.include_self,
        n_queries: queries.len(),
        n_pairs,
        rmse: (ss / n_pairs.max(1) as f64).sqrt(),
        mean_ndcg,
        zero_idcg_queries: per_query.iter().filter(|x| x.idcg_zero).count(),
        clamped: opts.clamp,
        config_fingerprint: opts.config_fingerprint.clone(),
        per_query,
        timings: Some(Timings { scoring_seconds, total_seconds: start.elapsed().as_secs_f64() }),
    })
}

/// Mean nDCG@k of `n_seeds` seeded random rankings.
pub fn random_ndcg_baseline(
    g: &HinGraph,
    queries: &[NodeId],
    rows: &[Vec<(NodeId, f64)>],
    opts: &EvalOptions,
    n_seeds: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..n_seeds {
        total += evaluate(g, &Backend::Random(s), queries, rows, opts)?.mean_ndcg;
    }
    Ok(total / n_seeds.max(1) as f64)
}

impl EvalReport {
    pub fn without_timings(mut self) -> Self {
        self.timings = None;
        self
    }

    /// Summary line plus one row per query, 12 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# metapath\tbackend\tk\tqueries\tpairs\trmse\tmean_ndcg\n");
        s.push_str(&format!(
            "# {}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.metapath,
            self.backend,
            self.k,
            self.n_queries,
            self.n_pairs,
            format_sig(self.rmse, 12),
            format_sig(self.mean_ndcg, 12)
        ));
        s.push_str("query\trmse\tndcg\tidcg_zero\n");
        for q in &self.per_query {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", q.query, format_sig(q.rmse, 12), format_sig(q.ndcg, 12), q.idcg_zero));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::tests_support::g0;
    use crate::hin::MetaPath;

    fn opts(k: usize, include_self: bool) -> EvalOptions {
        EvalOptions { k, include_self, metapath: "A-P-A".into(), ..EvalOptions::default() }
    }

    #[test]
    fn g0_backends() {
        let g = g0();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let e = PathSimEngine::new(&g, &p).unwrap();
        let a1 = NodeId(0);
        let rows = vec![e.row(a1).unwrap()];

        let exact = evaluate(&g, &Backend::Exact(PathSimEngine::new(&g, &p).unwrap()), &[a1], &rows, &opts(10, true)).unwrap();
        assert_eq!(exact.rmse, 0.0);
        assert_eq!(exact.mean_ndcg, 1.0);

        let zero = evaluate(&g, &Backend::Constant(0.0), &[a1], &rows, &opts(10, true)).unwrap();
        assert!((zero.rmse - ((1.0 + 4.0 / 9.0) / 2.0f64).sqrt()).abs() < 1e-12);
        assert!((zero.rmse - 0.84984).abs() < 1e-5);

        // one candidate left once the query is excluded
        for b in [Backend::Constant(0.3), Backend::Random(1)] {
            let r = evaluate(&g, &b, &[a1], &rows, &opts(1, false)).unwrap();
            assert_eq!(r.mean_ndcg, 1.0);
        }
    }

    #[test]
    fn random_backend_is_seeded() {
        let g = crate::hin::synth_apc(100, 1).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let e = PathSimEngine::new(&g, &p).unwrap();
        let qs: Vec<NodeId> = e.anchors()[..10].to_vec();
        let rows: Vec<_> = qs.iter().map(|&q| e.row(q).unwrap()).collect();
        let a = evaluate(&g, &Backend::Random(3), &qs, &rows, &opts(10, false)).unwrap();
        let b = evaluate(&g, &Backend::Random(3), &qs, &rows, &opts(10, false)).unwrap();
        assert_eq!(a.without_timings(), b.without_timings());
        let exact = evaluate(&g, &Backend::Exact(e), &qs, &rows, &opts(10, false)).unwrap();
        let r = random_ndcg_baseline(&g, &qs, &rows, &opts(10, false), 5).unwrap();
        assert!(r < 1.0 && r < exact.mean_ndcg);
    }

    #[test]
    fn tsv_has_row_per_query() {
        let g = g0();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let e = PathSimEngine::new(&g, &p).unwrap();
        let qs = [NodeId(0), NodeId(1)];
        let rows: Vec<_> = qs.iter().map(|&q| e.row(q).unwrap()).collect();
        let r = evaluate(&g, &Backend::Constant(0.0), &qs, &rows, &opts(10, true)).unwrap();
        let tsv = r.to_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.contains("a2\t0.849836585599\t"));
    }
}
