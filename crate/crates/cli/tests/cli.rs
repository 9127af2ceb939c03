use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hinsim"))
        .args(args)
        .env("METAPATH_SIM_LOG", "error")
        .output()
        .expect("run hinsim")
}

fn ok(args: &[&str]) -> String {
    let out = hinsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_g0(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("schema.json"), r#"{"node_types":["A","P"],"edge_types":[{"name":"AP","a":"A","b":"P"}]}"#).unwrap();
    fs::write(dir.join("nodes.tsv"), "a1\tA\na2\tA\np1\tP\np2\tP\n").unwrap();
    fs::write(dir.join("edges.tsv"), "a1\tp1\tAP\na1\tp2\tAP\np1\ta2\tAP\n").unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exact_on_g0() {
    let t = tempfile::tempdir().unwrap();
    let g = t.path().join("g0");
    write_g0(&g);
    let out = t.path().join("ex");
    ok(&["exact", "--graph", s(&g), "--metapath", "A-P-A", "--query", "a1", "--k", "1", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("topk/a1.tsv")).unwrap(), "1\ta2\t0.666666666667\n");
    assert_eq!(fs::read_to_string(out.join("rows/a1.tsv")).unwrap(), "a1\ta1\t1\na1\ta2\t0.666666666667\n");
    assert_eq!(fs::read_to_string(out.join("id_map.tsv")).unwrap(), "0\ta1\n1\ta2\n2\tp1\n3\tp2\n");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "exact");
    assert_eq!(manifest["results"]["zero_self_count_queries"], serde_json::json!([]));

    let all = t.path().join("all");
    let files = [g.join("nodes.tsv"), g.join("edges.tsv"), g.join("schema.json")];
    ok(&["exact", "--nodes", s(&files[0]), "--edges", s(&files[1]), "--schema", s(&files[2]),
        "--metapath", "A-P-A", "--queries", "all", "--out", s(&all)]);
    assert_eq!(fs::read_dir(all.join("rows")).unwrap().count(), 2);
}

#[test]
fn exit_codes_and_error_json() {
    let t = tempfile::tempdir().unwrap();
    let g = t.path().join("g0");
    write_g0(&g);
    let out = t.path().join("x");

    let r = hinsim(&["exact", "--graph", s(&g), "--metapath", "A-P", "--query", "a1", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["kind"], "usage");

    let r = hinsim(&["exact", "--graph", s(&g), "--metapath", "A-P-A", "--query", "zz", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));

    fs::write(g.join("edges.tsv"), "a1\tp1\tAP\na1\tnobody\tAP\n").unwrap();
    let r = hinsim(&["exact", "--graph", s(&g), "--metapath", "A-P-A", "--query", "a1", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["kind"], "data");
    assert!(err["message"].as_str().unwrap().contains("edges.tsv:2"));

    assert_eq!(hinsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hinsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let t = tempfile::tempdir().unwrap();
    let g = t.path().join("g");
    ok(&["synth", "--size", "50", "--seed", "2", "--out", s(&g)]);
    let before = fs::read(g.join("edges.tsv")).unwrap();
    let r = hinsim(&["synth", "--size", "60", "--seed", "3", "--out", s(&g)]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(fs::read(g.join("edges.tsv")).unwrap(), before);
    ok(&["synth", "--size", "60", "--seed", "3", "--out", s(&g), "--force"]);
    assert_ne!(fs::read(g.join("edges.tsv")).unwrap(), before);
}

fn pipeline(root: &Path) {
    let g = root.join("g");
    let ds = root.join("ds");
    let run = root.join("run");
    ok(&["synth", "--size", "120", "--seed", "4", "--out", s(&g)]);
    ok(&["make-dataset", "--graph", s(&g), "--metapath", "A-P-A", "--train", "12", "--val", "4", "--test", "10",
        "--pairs", "6", "--seed", "4", "--out", s(&ds)]);
    ok(&["train", "--dataset", s(&ds), "--epochs", "3", "--d", "8", "--seed", "4", "--out", s(&run)]);
    ok(&["eval", "--dataset", s(&ds), "--checkpoint", s(&run.join("checkpoint.json")), "--out", s(&root.join("ev"))]);
    ok(&["search", "--checkpoint", s(&run.join("checkpoint.json")), "--graph", s(&g), "--query", "A1", "--k", "3",
        "--out", s(&root.join("search"))]);
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["n_queries"], 10);
    assert!(report["rmse"].as_f64().unwrap() >= 0.0);
    for f in [
        "g/edges.tsv", "ds/train.tsv", "ds/val.tsv", "ds/test_queries.txt", "run/checkpoint.json",
        "run/train_log.jsonl", "ev/report.json", "ev/report.tsv", "search/topk/A1.tsv",
    ] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(a.path().join("search/topk/A1.tsv")).unwrap().lines().count(), 3);
}

#[test]
fn exact_and_baseline_eval() {
    let t = tempfile::tempdir().unwrap();
    let g = t.path().join("g");
    let ds = t.path().join("ds");
    ok(&["synth", "--size", "100", "--seed", "1", "--out", s(&g)]);
    ok(&["make-dataset", "--graph", s(&g), "--metapath", "A-P-C-P-A", "--train", "5", "--val", "2", "--test", "8",
        "--pairs", "4", "--out", s(&ds)]);
    let line = ok(&["eval", "--dataset", s(&ds), "--exact", "--out", s(&t.path().join("e"))]);
    assert!(line.starts_with("rmse\t0\t"));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("e/report.json")).unwrap()).unwrap();
    for q in rep["per_query"].as_array().unwrap() {
        if !q["idcg_zero"].as_bool().unwrap() {
            assert_eq!(q["ndcg"], 1.0);
        }
    }
    ok(&["eval", "--dataset", s(&ds), "--baseline", "zero", "--clamp", "--out", s(&t.path().join("z"))]);
    let z: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("z/report.json")).unwrap()).unwrap();
    assert_eq!(z["clamped"], true);
    ok(&["eval", "--dataset", s(&ds), "--baseline", "random", "--random-seeds", "5", "--out", s(&t.path().join("r"))]);
    let r = hinsim(&["eval", "--dataset", s(&ds), "--baseline", "median", "--out", s(&t.path().join("m"))]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn gradcheck_bench_report() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(&["gradcheck", "--seed", "3", "--d", "8", "--T", "2", "--L", "2"]);
    assert!(out.starts_with("PASS"));
    let summary: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    assert!(summary["max_rel_error"].as_f64().unwrap() < 1e-4);

    let b = t.path().join("b");
    ok(&["bench", "--sizes", "100,200,400", "--queries", "1", "--reps", "1", "--d", "4", "--out", s(&b)]);
    assert_eq!(fs::read_to_string(b.join("bench.tsv")).unwrap().lines().count(), 4);

    let rep = t.path().join("rep");
    let r1 = t.path().join("r1.json");
    fs::write(&r1, r#"{"metapath":"A-P-A","backend":"model","k":10,"include_self":false,"n_queries":1,"n_pairs":2,
        "rmse":0.25,"mean_ndcg":0.5,"zero_idcg_queries":0,"config_fingerprint":"","per_query":[]}"#).unwrap();
    ok(&["report", "--variable", "T", "--point", &format!("1={}", s(&r1)), "--point", &format!("2={}", s(&r1)),
        "--out", s(&rep)]);
    assert_eq!(fs::read_to_string(rep.join("sweep_T.tsv")).unwrap(), "T\trmse\tndcg\tlabel\n1\t0.25\t0.5\tmodel\n2\t0.25\t0.5\tmodel\n");
}
