use std::collections::HashSet;
use std::fs;
use std::path::Path;

use hinsim::eval::{self, Backend, EvalOptions, EvalReport, SweepRow};
use hinsim::gradcheck::{gradcheck_synthetic, GradcheckConfig};
use hinsim::hin::{load_graph, load_graph_dir, load_schema, save_graph, synth_apc, synth_graph, write_id_map, ID_MAP_FILE};
use hinsim::model::forward_all;
use hinsim::train::{self, build_dataset, AdamWConfig, Dataset, SplitSpec, TrainConfig};
use hinsim::util::{file_stem, format_sig, sort_ranked};
use hinsim::{Aggregator, Error, HinGraph, MetaPath, ModelConfig, ModelParams, NodeId, PathSimEngine};
use serde_json::json;

use crate::args::*;
use crate::output::{CliError, CliResult, OutDir};

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = cli.threads.max(1);
    let force = cli.force;
    match cli.command {
        Command::Synth(a) => synth(a, force),
        Command::Exact(a) => exact(a, threads, force),
        Command::MakeDataset(a) => make_dataset(a, force),
        Command::Train(a) => train_cmd(a, threads, force),
        Command::Eval(a) => eval_cmd(a, threads, force),
        Command::Search(a) => search(a, force),
        Command::Gradcheck(a) => gradcheck(a, force),
        Command::Bench(a) => bench(a, force),
        Command::Report(a) => report(a, force),
    }
}

fn load(g: &GraphArgs) -> CliResult<HinGraph> {
    match (&g.graph, &g.nodes, &g.edges, &g.schema) {
        (Some(dir), ..) => Ok(load_graph_dir(dir)?),
        (None, Some(n), Some(e), Some(s)) => Ok(load_graph(n, e, s)?),
        _ => Err(CliError::usage("give --graph DIR or all of --nodes, --edges, --schema")),
    }
}

fn node(g: &HinGraph, id: &str) -> CliResult<NodeId> {
    g.find_node(id).ok_or_else(|| CliError::usage(format!("unknown node id `{id}`")))
}

fn row_tsv(g: &HinGraph, q: NodeId, row: &[(NodeId, f64)]) -> String {
    let mut s = String::new();
    for &(t, score) in row {
        s.push_str(&format!("{}\t{}\t{}\n", g.external_id(q), g.external_id(t), format_sig(score, 12)));
    }
    s
}

fn ranked_tsv(g: &HinGraph, entries: &[(NodeId, f64)]) -> String {
    let mut s = String::new();
    for (i, &(v, score)) in entries.iter().enumerate() {
        s.push_str(&format!("{}\t{}\t{}\n", i + 1, g.external_id(v), format_sig(score, 12)));
    }
    s
}

fn synth(a: SynthArgs, force: bool) -> CliResult<()> {
    let g = match &a.schema {
        Some(path) => {
            let schema = load_schema(path)?;
            synth_graph(&schema, &a.node_counts, &a.edge_counts, a.seed)?
        }
        None => {
            if !a.node_counts.is_empty() || !a.edge_counts.is_empty() {
                return Err(CliError::usage("--node-counts/--edge-counts need --schema"));
            }
            synth_apc(a.size, a.seed)?
        }
    };
    let mut out = OutDir::prepare(&a.out, force)?;
    for p in save_graph(&g, &out.root)? {
        out.record(p);
    }
    let config = json!({
        "schema": a.schema, "size": a.size, "node_counts": a.node_counts,
        "edge_counts": a.edge_counts, "seed": a.seed,
    });
    out.finish("synth", config, json!({ "nodes": g.num_nodes(), "edges": g.num_edges() }))
}

fn exact(a: ExactArgs, threads: usize, force: bool) -> CliResult<()> {
    let g = load(&a.graph)?;
    let path = MetaPath::parse(&a.metapath, g.schema())?;
    let engine = PathSimEngine::new(&g, &path)?;
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let mut queries: Vec<NodeId> = Vec::new();
    match a.queries.as_deref() {
        Some("all") => queries.extend_from_slice(engine.anchors()),
        Some(file) => {
            let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
                queries.push(node(&g, line)?);
            }
        }
        None => {}
    }
    for q in &a.query {
        queries.push(node(&g, q)?);
    }
    if queries.is_empty() {
        return Err(CliError::usage("no queries: pass --query ID or --queries all|FILE"));
    }
    let mut seen = HashSet::new();
    queries.retain(|q| seen.insert(*q));
    for &q in &queries {
        if g.node_type(q) != engine.anchor_type() {
            return Err(CliError::usage(format!(
                "query `{}` is not of the meta-path's anchor type `{}`",
                g.external_id(q),
                g.schema().node_type_name(engine.anchor_type())
            )));
        }
    }
    let rows = engine.rows(&queries, threads)?;
    let mut out = OutDir::prepare(&a.out, force)?;
    id_map(&mut out, &g)?;
    // queries without self paths score 0 against everything, themselves included
    let mut zero_self = Vec::new();
    for &q in &queries {
        if engine.self_count(q)? == 0 {
            zero_self.push(g.external_id(q).to_string());
        }
    }
    for (&q, row) in queries.iter().zip(&rows) {
        let stem = file_stem(g.external_id(q));
        out.write(format!("rows/{stem}.tsv"), &row_tsv(&g, q, row))?;
        let mut ranked: Vec<(NodeId, f64)> =
            row.iter().copied().filter(|(v, _)| a.include_self || *v != q).collect();
        sort_ranked(&mut ranked);
        ranked.truncate(a.k);
        out.write(format!("topk/{stem}.tsv"), &ranked_tsv(&g, &ranked))?;
    }
    let config = json!({
        "graph": a.graph.graph, "nodes": a.graph.nodes, "edges": a.graph.edges, "schema": a.graph.schema,
        "metapath": path.display(g.schema()), "k": a.k, "include_self": a.include_self, "threads": threads,
        "queries": queries.iter().map(|&q| g.external_id(q)).collect::<Vec<_>>(),
    });
    let results = json!({ "queries": queries.len(), "zero_denominator_convention": "score 0", "zero_self_count_queries": zero_self });
    out.finish("exact", config, results)
}

fn make_dataset(a: MakeDatasetArgs, force: bool) -> CliResult<()> {
    let g = load(&a.graph)?;
    let path = MetaPath::parse(&a.metapath, g.schema())?;
    let split = SplitSpec { n_train: a.train, n_val: a.val, n_test: a.test, pairs_per_query: a.pairs, seed: a.seed };
    let ds = build_dataset(&g, &path, &split)?;
    let mut out = OutDir::prepare(&a.out, force)?;
    ds.save(&g, &out.root)?;
    for f in [train::DATASET_FILE, train::TRAIN_FILE, train::VAL_FILE, train::TEST_QUERIES_FILE, train::ROWS_DIR, train::GRAPH_DIR] {
        out.record(out.path(f));
    }
    let config = json!({
        "graph": a.graph.graph, "nodes": a.graph.nodes, "edges": a.graph.edges, "schema": a.graph.schema,
        "metapath": ds.metapath, "split": split,
    });
    let results = json!({ "train_samples": ds.train.len(), "val_samples": ds.val.len(), "test_queries": ds.test_queries.len() });
    out.finish("make-dataset", config, results)
}

fn model_config(m: &ModelArgs, path: &MetaPath) -> CliResult<ModelConfig> {
    let d = m.d.unwrap_or(if m.paper_scale { 256 } else { 32 });
    // five-node meta-paths use three path instances, shorter ones two
    let t = m.t.unwrap_or(if path.len() + 1 >= 5 { 3 } else { 2 });
    let cfg = ModelConfig {
        d,
        slots: t,
        layers: m.l,
        aggregator: Aggregator::parse(&m.aggregator)?,
        use_node_type: !m.no_node_type,
        use_edge_type: !m.no_edge_type,
        distinct_slots: !m.literal_slots,
        bias: m.bias,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(a: TrainArgs, threads: usize, force: bool) -> CliResult<()> {
    let (g, ds) = Dataset::load(&a.dataset)?;
    let path = ds.metapath(&g)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr_max: a.lr_max,
        lr_min: a.lr_min,
        adam: AdamWConfig { beta1: a.beta1, beta2: a.beta2, eps: a.eps, weight_decay: a.weight_decay },
        model: model_config(&a.model, &path)?,
        seed: a.seed,
        train_fraction: a.train_fraction,
        threads,
    };
    cfg.validate()?;
    let mut out = OutDir::prepare(&a.out, force)?;
    let config = json!({ "dataset": a.dataset, "train": cfg });
    match train::train(&g, &ds, &cfg) {
        Ok(res) => {
            let ck = out.path("checkpoint.json");
            res.best.save(&ck)?;
            out.record(ck);
            let log = out.path("train_log.jsonl");
            train::write_log(&res.log, &log)?;
            out.record(log);
            let results = json!({
                "best_epoch": res.best_epoch, "best_loss": res.best_loss,
                "train_queries_used": res.train_queries_used, "parameters": res.best.num_scalars(),
            });
            out.finish("train", config, results)
        }
        Err(Error::Diverged { epoch, msg, last_good }) => {
            if let Some(p) = last_good {
                let path = out.path("last_good.json");
                p.save(&path)?;
                out.record(path);
            }
            let text = format!("training diverged at epoch {epoch}: {msg}");
            out.finish("train", config, json!({ "diverged": text }))?;
            Err(CliError::numeric("diverged", text))
        }
        Err(e) => Err(e.into()),
    }
}

fn id_map(out: &mut OutDir, g: &HinGraph) -> CliResult<()> {
    let p = out.path(ID_MAP_FILE);
    write_id_map(g, &p)?;
    out.record(p);
    Ok(())
}

fn load_checkpoint(path: &Path, g: &HinGraph, allow_mismatch: bool) -> CliResult<ModelParams> {
    let p = ModelParams::load(path)?;
    p.check_schema(g.schema(), allow_mismatch)?;
    Ok(p)
}

fn eval_cmd(a: EvalArgs, threads: usize, force: bool) -> CliResult<()> {
    let (g, ds) = Dataset::load(&a.dataset)?;
    let path = ds.metapath(&g)?;
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let params;
    let mut random_mean = None;
    let backend = match (&a.checkpoint, a.exact, a.baseline.as_deref()) {
        (Some(ck), false, None) => {
            params = load_checkpoint(ck, &g, a.allow_schema_mismatch)?;
            Backend::Model(&params)
        }
        (None, true, None) => Backend::Exact(PathSimEngine::new(&g, &path)?),
        (None, false, Some("mean")) => {
            if ds.train.is_empty() {
                return Err(CliError::usage("mean baseline needs train samples"));
            }
            Backend::Constant(ds.train.iter().map(|s| s.label).sum::<f64>() / ds.train.len() as f64)
        }
        (None, false, Some("zero")) => Backend::Constant(0.0),
        (None, false, Some("random")) => Backend::Random(0),
        (None, false, Some(other)) => return Err(CliError::usage(format!("unknown baseline `{other}` (mean|zero|random)"))),
        _ => return Err(CliError::usage("choose one of --checkpoint, --exact, --baseline")),
    };
    let opts = EvalOptions {
        k: a.k,
        include_self: a.include_self,
        threads,
        metapath: path.display(g.schema()),
        clamp: a.clamp,
        // content-based so that identical runs in different directories agree
        config_fingerprint: eval::fingerprint(&json!({
            "split": ds.split, "metapath": path.display(g.schema()),
            "checkpoint": a.checkpoint.as_ref().map(|ck| eval::fingerprint(&fs::read_to_string(ck).unwrap_or_default())),
            "exact": a.exact, "baseline": a.baseline, "k": a.k, "include_self": a.include_self, "clamp": a.clamp,
        })),
    };
    let report = eval::evaluate(&g, &backend, &ds.test_queries, &ds.test_rows, &opts)?;
    if matches!(backend, Backend::Random(_)) {
        random_mean = Some(eval::random_ndcg_baseline(&g, &ds.test_queries, &ds.test_rows, &opts, a.random_seeds)?);
    }
    let timings = report.timings.clone();
    let report = report.without_timings();
    let mut out = OutDir::prepare(&a.out, force)?;
    id_map(&mut out, &g)?;
    out.write_json("report.json", &report)?;
    out.write("report.tsv", &report.to_tsv())?;
    let config = json!({
        "dataset": a.dataset, "checkpoint": a.checkpoint, "exact": a.exact, "baseline": a.baseline,
        "random_seeds": a.random_seeds, "k": a.k, "include_self": a.include_self, "threads": threads,
    });
    let results = json!({
        "rmse": report.rmse, "mean_ndcg": report.mean_ndcg,
        "random_mean_ndcg_over_seeds": random_mean, "timings": timings,
    });
    println!("rmse\t{}\tndcg@{}\t{}", format_sig(report.rmse, 12), a.k, format_sig(report.mean_ndcg, 12));
    out.finish("eval", config, results)
}

fn search(a: SearchArgs, force: bool) -> CliResult<()> {
    let g = load(&a.graph)?;
    let params = load_checkpoint(&a.checkpoint, &g, a.allow_schema_mismatch)?;
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let queries: Vec<NodeId> = a.query.iter().map(|q| node(&g, q)).collect::<CliResult<_>>()?;
    let mut out = OutDir::prepare(&a.out, force)?;
    id_map(&mut out, &g)?;
    for &q in &queries {
        let mut ranked: Vec<(NodeId, f64)> = forward_all(&g, q, &params)?
            .into_iter()
            .filter(|(v, _)| a.include_self || *v != q)
            .map(|(v, s)| (v, if a.clamp { s.clamp(0.0, 1.0) } else { s }))
            .collect();
        sort_ranked(&mut ranked);
        ranked.truncate(a.k);
        out.write(format!("topk/{}.tsv", file_stem(g.external_id(q))), &ranked_tsv(&g, &ranked))?;
    }
    let config = json!({
        "checkpoint": a.checkpoint, "graph": a.graph.graph, "nodes": a.graph.nodes, "edges": a.graph.edges,
        "schema": a.graph.schema, "queries": a.query, "k": a.k, "include_self": a.include_self,
        "clamp": a.clamp,
    });
    out.finish("search", config, json!({ "queries": queries.len() }))
}

fn gradcheck(a: GradcheckArgs, force: bool) -> CliResult<()> {
    let model = ModelConfig {
        d: a.d,
        slots: a.t,
        layers: a.l,
        aggregator: Aggregator::parse(&a.aggregator)?,
        ..ModelConfig::default()
    };
    model.validate()?;
    let cfg = GradcheckConfig::default();
    let r = gradcheck_synthetic(a.seed, model.clone(), a.nodes, &cfg)?;
    let summary = json!({
        "ok": r.ok, "coords": r.coords, "passed": r.passed, "certified": r.certified,
        "uncertified": r.uncertified, "pass_fraction": r.pass_fraction, "max_rel_error": r.max_rel_error,
    });
    println!("{} {}/{} coordinates within {:e}, {} certified at selection boundaries, max relative error {:.3e}",
        if r.ok { "PASS" } else { "FAIL" }, r.passed, r.coords, cfg.tol, r.certified, r.max_rel_error);
    println!("{summary}");
    if let Some(dir) = &a.out {
        let mut out = OutDir::prepare(dir, force)?;
        out.write_json("gradcheck.json", &r)?;
        out.finish("gradcheck", json!({ "seed": a.seed, "model": model, "nodes": a.nodes, "check": cfg }), summary)?;
    }
    if r.ok {
        Ok(())
    } else {
        Err(CliError::numeric("gradcheck", format!("{} coordinates failed without a selection boundary", r.uncertified)))
    }
}

fn bench(a: BenchArgs, force: bool) -> CliResult<()> {
    if a.sizes.is_empty() {
        return Err(CliError::usage("--sizes needs at least one value"));
    }
    let anchor = MetaPath::parse("A-P-A", &hinsim::hin::apc_schema())?;
    let cfg = eval::BenchConfig { seed: a.seed, queries: a.queries, reps: a.reps, model: model_config(&a.model, &anchor)? };
    let rows = eval::bench_inference(&a.sizes, &cfg)?;
    let mut out = OutDir::prepare(&a.out, force)?;
    let mut tsv = String::from("nodes\tedges\tseconds\n");
    for r in &rows {
        tsv.push_str(&format!("{}\t{}\t{:.6}\n", r.nodes, r.edges, r.seconds));
    }
    out.write("bench.tsv", &tsv)?;
    let fit = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
        Some(eval::linear_fit(&xs, &ys)?)
    } else {
        None
    };
    out.write_json("fit.json", &json!({ "fit": fit }))?;
    print!("{tsv}");
    if let Some(f) = fit {
        println!("slope {:.3e} s/node, R^2 {:.4}", f.slope, f.r2);
    }
    out.finish("bench", json!({ "sizes": a.sizes, "bench": cfg }), json!({ "fit": fit }))
}

fn report(a: ReportArgs, force: bool) -> CliResult<()> {
    let mut rows = Vec::with_capacity(a.points.len());
    for p in &a.points {
        let (value, path) = p
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--point expects VALUE=PATH, got `{p}`")))?;
        let value: f64 = value.parse().map_err(|_| CliError::usage(format!("sweep value `{value}` is not a number")))?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: EvalReport = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { path: path.into(), line: e.line(), msg: e.to_string() })?;
        rows.push(SweepRow { variable: a.variable.clone(), value, rmse: r.rmse, ndcg: r.mean_ndcg, label: r.backend });
    }
    let mut out = OutDir::prepare(&a.out, force)?;
    let stem = file_stem(&a.variable);
    for p in eval::write_sweep(&rows, &out.root, &format!("sweep_{stem}"))? {
        out.record(p);
    }
    out.finish("report", json!({ "variable": a.variable, "points": a.points }), json!({ "rows": rows.len() }))
}
