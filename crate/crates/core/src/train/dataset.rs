use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{data_lines, load_graph_dir, parse_err, save_graph, HinGraph, MetaPath, NodeId};
use crate::pathsim::PathSimEngine;
use crate::util::file_stem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub pairs_per_query: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub query: NodeId,
    pub target: NodeId,
    pub label: f64,
}

/// Labeled pairs for train/validation queries and full exact rows for test
/// queries. Test rows list nonzero scores only; every other anchor-type
/// node scores 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub metapath: String,
    pub split: SplitSpec,
    pub train_queries: Vec<NodeId>,
    pub val_queries: Vec<NodeId>,
    pub test_queries: Vec<NodeId>,
    pub train: Vec<TrainingSample>,
    pub val: Vec<TrainingSample>,
    pub test_rows: Vec<Vec<(NodeId, f64)>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    metapath: String,
    split: SplitSpec,
    anchor_type: String,
    schema_fingerprint: String,
    n_train_samples: usize,
    n_val_samples: usize,
    train_queries: Vec<String>,
    val_queries: Vec<String>,
    test_queries: Vec<String>,
}

pub const DATASET_FILE: &str = "dataset.json";
pub const TRAIN_FILE: &str = "train.tsv";
pub const VAL_FILE: &str = "val.tsv";
pub const TEST_QUERIES_FILE: &str = "test_queries.txt";
pub const ROWS_DIR: &str = "rows";
pub const GRAPH_DIR: &str = "graph";

/// `pairs_per_query` targets for `q`: half (rounded up) drawn from the
/// nonzero support of the exact row, the rest uniformly from all anchors,
/// never repeating a target.
fn sample_targets(
    rng: &mut ChaCha8Rng,
    q: NodeId,
    row: &[(NodeId, f64)],
    anchors: &[NodeId],
    pairs: usize,
) -> Vec<TrainingSample> {
    let label_of = |t: NodeId| row.binary_search_by_key(&t, |e| e.0).map(|i| row[i].1).unwrap_or(0.0);
    let n_pos = pairs.div_ceil(2).min(row.len());
    let mut chosen: Vec<NodeId> = row.choose_multiple(rng, n_pos).map(|e| e.0).collect();
    let mut seen: HashSet<NodeId> = chosen.iter().copied().collect();
    while chosen.len() < pairs {
        let t = anchors[rng.gen_range(0..anchors.len())];
        if seen.insert(t) {
            chosen.push(t);
        }
    }
    chosen.into_iter().map(|t| TrainingSample { query: q, target: t, label: label_of(t) }).collect()
}

pub fn build_dataset(g: &HinGraph, p: &MetaPath, split: &SplitSpec) -> Result<Dataset> {
    let engine = PathSimEngine::new(g, p)?;
    let anchors = engine.anchors();
    let need = split.n_train + split.n_val + split.n_test;
    if need > anchors.len() {
        return Err(Error::InvalidArgument(format!(
            "split needs {need} queries but only {} `{}` nodes exist",
            anchors.len(),
            g.schema().node_type_name(engine.anchor_type())
        )));
    }
    if split.pairs_per_query == 0 || split.pairs_per_query > anchors.len() {
        return Err(Error::InvalidArgument(format!(
            "pairs per query must be in 1..={}, got {}",
            anchors.len(),
            split.pairs_per_query
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split.seed);
    let picked: Vec<NodeId> = anchors.choose_multiple(&mut rng, need).copied().collect();
    let (train_q, rest) = picked.split_at(split.n_train);
    let (val_q, test_q) = rest.split_at(split.n_val);

    let mut empty_support = 0;
    let mut samples = |queries: &[NodeId], rng: &mut ChaCha8Rng| -> Result<Vec<TrainingSample>> {
        let mut out = Vec::with_capacity(queries.len() * split.pairs_per_query);
        for &q in queries {
            let row = engine.row(q)?;
            if row.is_empty() {
                empty_support += 1;
            }
            out.extend(sample_targets(rng, q, &row, anchors, split.pairs_per_query));
        }
        Ok(out)
    };
    let train = samples(train_q, &mut rng)?;
    let val = samples(val_q, &mut rng)?;
    if empty_support > 0 {
        log::warn!("{empty_support} train/validation queries have no path instances; their labels are all zero");
    }
    let test_rows = test_q.iter().map(|&q| engine.row(q)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        metapath: p.display(g.schema()),
        split: split.clone(),
        train_queries: train_q.to_vec(),
        val_queries: val_q.to_vec(),
        test_queries: test_q.to_vec(),
        train,
        val,
        test_rows,
    })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::File::create(path).and_then(|mut f| f.write_all(body.as_bytes())).map_err(|e| Error::io(path, e))
}

fn samples_tsv(g: &HinGraph, s: &[TrainingSample]) -> String {
    let mut out = String::new();
    for x in s {
        // shortest round-trip float form: reloading reproduces labels exactly
        out.push_str(&format!("{}\t{}\t{:?}\n", g.external_id(x.query), g.external_id(x.target), x.label));
    }
    out
}

fn lookup(g: &HinGraph, path: &Path, line: usize, id: &str) -> Result<NodeId> {
    g.find_node(id).ok_or_else(|| parse_err(path, line, format!("unknown node `{id}`")))
}

fn read_samples(g: &HinGraph, path: &Path) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let f: Vec<&str> = text.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_err(path, line, "expected query<TAB>target<TAB>label"));
        }
        let label: f64 = f[2].trim().parse().map_err(|_| parse_err(path, line, format!("bad label `{}`", f[2])))?;
        out.push(TrainingSample { query: lookup(g, path, line, f[0])?, target: lookup(g, path, line, f[1])?, label });
    }
    Ok(out)
}

/// Reads a `query<TAB>target<TAB>score` row file.
pub fn read_row(g: &HinGraph, path: &Path) -> Result<(NodeId, Vec<(NodeId, f64)>)> {
    let mut query = None;
    let mut row = Vec::new();
    for (line, text) in data_lines(path)? {
        let f: Vec<&str> = text.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_err(path, line, "expected query<TAB>target<TAB>score"));
        }
        let q = lookup(g, path, line, f[0])?;
        if query.is_some_and(|x| x != q) {
            return Err(parse_err(path, line, "row file mixes queries"));
        }
        query = Some(q);
        let s: f64 = f[2].trim().parse().map_err(|_| parse_err(path, line, format!("bad score `{}`", f[2])))?;
        row.push((lookup(g, path, line, f[1])?, s));
    }
    let q = query.ok_or_else(|| parse_err(path, 1, "empty row file"))?;
    row.sort_by_key(|e| e.0);
    Ok((q, row))
}

impl Dataset {
    /// Writes the dataset plus a copy of the graph under `dir`.
    pub fn save(&self, g: &HinGraph, dir: &Path) -> Result<()> {
        let rows_dir = dir.join(ROWS_DIR);
        fs::create_dir_all(&rows_dir).map_err(|e| Error::io(&rows_dir, e))?;
        save_graph(g, &dir.join(GRAPH_DIR))?;
        let ext = |qs: &[NodeId]| qs.iter().map(|&q| g.external_id(q).to_string()).collect::<Vec<_>>();
        let anchor = self.train_queries.iter().chain(&self.val_queries).chain(&self.test_queries).next();
        let meta = DatasetMeta {
            metapath: self.metapath.clone(),
            split: self.split.clone(),
            anchor_type: anchor.map(|&q| g.schema().node_type_name(g.node_type(q)).to_string()).unwrap_or_default(),
            schema_fingerprint: g.schema().fingerprint(),
            n_train_samples: self.train.len(),
            n_val_samples: self.val.len(),
            train_queries: ext(&self.train_queries),
            val_queries: ext(&self.val_queries),
            test_queries: ext(&self.test_queries),
        };
        write_file(&dir.join(DATASET_FILE), &serde_json::to_string_pretty(&meta)?)?;
        write_file(&dir.join(TRAIN_FILE), &samples_tsv(g, &self.train))?;
        write_file(&dir.join(VAL_FILE), &samples_tsv(g, &self.val))?;
        let mut tq = String::new();
        for (&q, row) in self.test_queries.iter().zip(&self.test_rows) {
            tq.push_str(g.external_id(q));
            tq.push('\n');
            let mut body = String::new();
            for &(t, s) in row {
                body.push_str(&format!("{}\t{}\t{:?}\n", g.external_id(q), g.external_id(t), s));
            }
            write_file(&rows_dir.join(format!("{}.tsv", file_stem(g.external_id(q)))), &body)?;
        }
        write_file(&dir.join(TEST_QUERIES_FILE), &tq)?;
        Ok(())
    }

    /// Loads a dataset directory written by [`Dataset::save`], with its graph.
    pub fn load(dir: &Path) -> Result<(HinGraph, Dataset)> {
        let g = load_graph_dir(&dir.join(GRAPH_DIR))?;
        let meta_path = dir.join(DATASET_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: DatasetMeta =
            serde_json::from_str(&text).map_err(|e| parse_err(&meta_path, e.line(), e.to_string()))?;
        if meta.schema_fingerprint != g.schema().fingerprint() {
            return Err(Error::Schema(format!("{} does not match the stored graph schema", meta_path.display())));
        }
        let ids = |v: &[String]| -> Result<Vec<NodeId>> {
            v.iter().map(|id| lookup(&g, &meta_path, 1, id)).collect()
        };
        let train_queries = ids(&meta.train_queries)?;
        let val_queries = ids(&meta.val_queries)?;
        let tq_path = dir.join(TEST_QUERIES_FILE);
        let mut test_queries = Vec::new();
        for (line, text) in data_lines(&tq_path)? {
            test_queries.push(lookup(&g, &tq_path, line, text.trim())?);
        }
        let mut test_rows = Vec::with_capacity(test_queries.len());
        for &q in &test_queries {
            let path = dir.join(ROWS_DIR).join(format!("{}.tsv", file_stem(g.external_id(q))));
            if !path.exists() {
                return Err(Error::Graph(format!("missing exact row for test query `{}`", g.external_id(q))));
            }
            // an all-zero row is written as an empty file
            if fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len() == 0 {
                test_rows.push(Vec::new());
                continue;
            }
            let (rq, row) = read_row(&g, &path)?;
            if rq != q {
                return Err(parse_err(&path, 1, format!("row belongs to `{}`", g.external_id(rq))));
            }
            test_rows.push(row);
        }
        let train = read_samples(&g, &dir.join(TRAIN_FILE))?;
        let val = read_samples(&g, &dir.join(VAL_FILE))?;
        let ds = Dataset {
            metapath: meta.metapath,
            split: meta.split,
            train_queries,
            val_queries,
            test_queries,
            train,
            val,
            test_rows,
        };
        Ok((g, ds))
    }

    /// Samples grouped by query id, each group in file order.
    pub fn by_query(samples: &[TrainingSample]) -> BTreeMap<NodeId, Vec<TrainingSample>> {
        let mut m: BTreeMap<NodeId, Vec<TrainingSample>> = BTreeMap::new();
        for s in samples {
            m.entry(s.query).or_default().push(*s);
        }
        m
    }

    pub fn metapath(&self, g: &HinGraph) -> Result<MetaPath> {
        MetaPath::parse(&self.metapath, g.schema())
    }
}
