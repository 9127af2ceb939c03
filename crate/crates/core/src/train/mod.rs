//! Dataset construction, AdamW with cosine annealing, and the MSE training
//! loop with validation-based checkpoint selection.

mod dataset;
mod optim;

pub use dataset::{
    build_dataset, read_row, Dataset, SplitSpec, TrainingSample, DATASET_FILE, GRAPH_DIR, ROWS_DIR,
    TEST_QUERIES_FILE, TRAIN_FILE, VAL_FILE,
};
pub use optim::{cosine_lr, AdamW, AdamWConfig};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{HinGraph, NodeId};
use crate::model::{build_forward, ModelConfig, ModelParams};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub adam: AdamWConfig,
    pub model: ModelConfig,
    pub seed: u64,
    /// Fraction of the train queries actually used (a prefix of the
    /// dataset's randomly ordered train queries).
    pub train_fraction: f64,
    /// Workers for validation; the update loop itself is sequential.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr_max: 1e-3,
            lr_min: 1e-5,
            adam: AdamWConfig::default(),
            model: ModelConfig::default(),
            seed: 0,
            train_fraction: 1.0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_max >= self.lr_min && self.lr_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need lr_max >= lr_min > 0, got lr_max={} lr_min={}",
                self.lr_max, self.lr_min
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("train fraction must be in (0, 1], got {}", self.train_fraction)));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps <= 0.0 || a.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("invalid AdamW hyperparameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Absent when the dataset has no validation samples.
    pub val_loss: Option<f64>,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub best_epoch: usize,
    /// Selection loss of `best`: validation MSE, or training MSE without
    /// validation data.
    pub best_loss: f64,
    pub log: Vec<EpochLog>,
    pub train_queries_used: usize,
}

/// Mean squared error over every sample, grouped by query for shared
/// encodings.
pub fn mean_loss(g: &HinGraph, params: &ModelParams, samples: &[TrainingSample], threads: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let groups: Vec<(NodeId, Vec<TrainingSample>)> = Dataset::by_query(samples).into_iter().collect();
    let sums: Vec<f64> = util::with_threads(threads, || {
        groups
            .par_iter()
            .map(|(q, s)| {
                let targets: Vec<NodeId> = s.iter().map(|x| x.target).collect();
                let f = build_forward(g, *q, params, &targets)?;
                Ok(f.score_values().iter().zip(s).map(|(p, x)| (p - x.label).powi(2)).sum())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(sums.iter().sum::<f64>() / samples.len() as f64)
}

fn diverged(epoch: usize, msg: String, last_good: &ModelParams) -> Error {
    Error::Diverged { epoch, msg, last_good: Some(Box::new(last_good.clone())) }
}

/// Trains from a fresh initialization seeded by `cfg.seed`.
pub fn train(g: &HinGraph, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let init = ModelParams::init(g.schema(), cfg.model.clone(), cfg.seed)?;
    train_from(g, ds, cfg, init)
}

/// Trains starting from `params`. Each epoch visits the used train queries
/// in a seeded shuffled order and takes one AdamW step per query on the MSE
/// over that query's samples.
pub fn train_from(g: &HinGraph, ds: &Dataset, cfg: &TrainConfig, mut params: ModelParams) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.metapath = Some(ds.metapath.clone());
    let n_all = ds.train_queries.len();
    if n_all == 0 {
        return Err(Error::InvalidArgument("dataset has no train queries".into()));
    }
    let n_used = ((cfg.train_fraction * n_all as f64).ceil() as usize).clamp(1, n_all);
    let used: Vec<NodeId> = ds.train_queries[..n_used].to_vec();
    let by_query = Dataset::by_query(&ds.train);
    let batches: Vec<(NodeId, Vec<NodeId>, Vec<f64>)> = used
        .iter()
        .filter_map(|q| by_query.get(q).map(|s| (*q, s.iter().map(|x| x.target).collect(), s.iter().map(|x| x.label).collect())))
        .collect();
    if batches.is_empty() {
        return Err(Error::InvalidArgument("selected train queries have no samples".into()));
    }
    let used_samples: Vec<TrainingSample> =
        batches.iter().flat_map(|(q, _, _)| by_query[q].iter().copied()).collect();

    let total_steps = cfg.epochs * batches.len();
    let mut opt = AdamW::new(cfg.adam, params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut step = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut warned_disconnected = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        let mut count = 0usize;
        let mut lr = cfg.lr_max;
        for &b in &order {
            let (q, targets, labels) = &batches[b];
            let f = build_forward(g, *q, &params, targets)?;
            let mut tape = f.tape;
            let loss = tape.mse(f.scores, labels)?;
            let lv = tape.value(loss).get(0, 0);
            if !lv.is_finite() {
                return Err(diverged(epoch, format!("loss is {lv} on query {}", g.external_id(*q)), &best));
            }
            let grads = tape.backward(loss, params.num_tensors())?;
            if !grads.disconnected.is_empty() && !warned_disconnected {
                warned_disconnected = true;
                let names: Vec<&str> = grads.disconnected.iter().map(|&i| params.names()[i].as_str()).collect();
                log::warn!("no gradient reaches {} (zero update); further occurrences not reported", names.join(", "));
            }
            lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
            if let Err(e) = opt.step(params.tensors_mut(), &grads.grads, lr) {
                return Err(diverged(epoch, e.to_string(), &best));
            }
            step += 1;
            sq_sum += lv * labels.len() as f64;
            count += labels.len();
        }
        if !params.is_finite() {
            return Err(diverged(epoch, "parameters became non-finite".into(), &best));
        }
        let train_loss = sq_sum / count as f64;
        let val_loss = if ds.val.is_empty() { None } else { Some(mean_loss(g, &params, &ds.val, cfg.threads)?) };
        let selection = match val_loss {
            Some(v) => v,
            // without validation data, select on the post-epoch training loss
            None => mean_loss(g, &params, &used_samples, cfg.threads)?,
        };
        if !selection.is_finite() {
            return Err(diverged(epoch, format!("selection loss is {selection}"), &best));
        }
        log::info!("epoch {epoch}: train {train_loss:.6e} val {val_loss:?} lr {lr:.3e}");
        if selection < best_loss {
            best_loss = selection;
            best_epoch = epoch;
            best = params.clone();
        }
        log.push(EpochLog { epoch, train_loss, val_loss, lr, steps: step });
    }
    Ok(TrainOutcome { best, best_epoch, best_loss, log, train_queries_used: n_used })
}

/// JSON-lines training log.
pub fn write_log(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut out = String::new();
    for rec in log {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(out.as_bytes())).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::tests_support::g0;
    use crate::hin::{synth_apc, MetaPath};

    #[test]
    fn g0_labels_come_from_the_row() {
        let g = g0();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 1, n_val: 0, n_test: 0, pairs_per_query: 2, seed: 0 };
        for seed in 0..5 {
            let ds = build_dataset(&g, &p, &SplitSpec { seed, ..split.clone() }).unwrap();
            assert_eq!(ds.train.len(), 2);
            let mut labels: Vec<f64> = ds.train.iter().map(|s| s.label).collect();
            labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // both G0 rows are {self: 1, other: 2/3}
            assert_eq!(labels, [2.0 / 3.0, 1.0]);
        }
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let g = synth_apc(200, 1).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 30, n_val: 10, n_test: 20, pairs_per_query: 10, seed: 4 };
        let a = build_dataset(&g, &p, &split).unwrap();
        let b = build_dataset(&g, &p, &split).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<NodeId> =
            a.train_queries.iter().chain(&a.val_queries).chain(&a.test_queries).copied().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 60);
        assert_eq!(a.train.len(), 300);
        for q in &a.train_queries {
            let s: Vec<_> = a.train.iter().filter(|x| x.query == *q).collect();
            let mut t: Vec<NodeId> = s.iter().map(|x| x.target).collect();
            t.sort();
            t.dedup();
            assert_eq!(t.len(), 10);
            let row = crate::pathsim::pathsim_row(&g, &p, *q).unwrap();
            let support = row.len();
            let nonzero = s.iter().filter(|x| x.label > 0.0).count();
            assert!(nonzero >= support.min(5));
        }
        let c = build_dataset(&g, &p, &SplitSpec { seed: 5, ..split.clone() }).unwrap();
        assert_ne!(a.train_queries, c.train_queries);
        assert!(build_dataset(&g, &p, &SplitSpec { n_train: 80, ..split }).is_err());
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let g = synth_apc(100, 2).unwrap();
        let p = MetaPath::parse("A-P-C-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 10, n_val: 5, n_test: 5, pairs_per_query: 6, seed: 1 };
        let ds = build_dataset(&g, &p, &split).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(&g, dir.path()).unwrap();
        let (g2, ds2) = Dataset::load(dir.path()).unwrap();
        assert_eq!(g2.num_nodes(), g.num_nodes());
        assert_eq!(ds, ds2);
    }

    #[test]
    fn zero_lr_keeps_loss() {
        let g = synth_apc(60, 3).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 4, n_val: 2, n_test: 0, pairs_per_query: 4, seed: 1 };
        let mut ds = build_dataset(&g, &p, &split).unwrap();
        for s in ds.train.iter_mut().chain(ds.val.iter_mut()) {
            s.label = 0.25;
        }
        let cfg = TrainConfig {
            epochs: 3,
            lr_max: 1e-300,
            lr_min: 1e-300,
            adam: AdamWConfig { weight_decay: 0.0, ..AdamWConfig::default() },
            model: ModelConfig { d: 4, ..ModelConfig::default() },
            ..TrainConfig::default()
        };
        let out = train(&g, &ds, &cfg).unwrap();
        let first = out.log[0].train_loss;
        assert!(out.log.iter().all(|e| (e.train_loss - first).abs() < 1e-12));
    }

    #[test]
    fn best_checkpoint_has_lowest_val_loss_and_is_deterministic() {
        let g = synth_apc(100, 5).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 10, n_val: 5, n_test: 0, pairs_per_query: 6, seed: 2 };
        let ds = build_dataset(&g, &p, &split).unwrap();
        let cfg = TrainConfig { epochs: 4, lr_max: 1e-2, model: ModelConfig { d: 6, ..ModelConfig::default() }, ..TrainConfig::default() };
        let a = train(&g, &ds, &cfg).unwrap();
        let b = train(&g, &ds, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best, b.best);
        assert!(a.log.iter().all(|e| a.best_loss <= e.val_loss.unwrap()));
        let again = mean_loss(&g, &a.best, &ds.val, 1).unwrap();
        assert_eq!(again, a.best_loss);
        assert_eq!(a.log.last().unwrap().steps, 40);
    }

    #[test]
    fn train_fraction_uses_a_prefix() {
        let g = synth_apc(100, 5).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 10, n_val: 2, n_test: 0, pairs_per_query: 4, seed: 2 };
        let ds = build_dataset(&g, &p, &split).unwrap();
        let cfg = TrainConfig { epochs: 1, train_fraction: 0.25, model: ModelConfig { d: 4, ..ModelConfig::default() }, ..TrainConfig::default() };
        let out = train(&g, &ds, &cfg).unwrap();
        assert_eq!(out.train_queries_used, 3);
        assert_eq!(out.log[0].steps, 3);
        assert!(train(&g, &ds, &TrainConfig { train_fraction: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn divergence_reports_last_good() {
        let g = synth_apc(60, 3).unwrap();
        let p = MetaPath::parse("A-P-A", g.schema()).unwrap();
        let split = SplitSpec { n_train: 3, n_val: 1, n_test: 0, pairs_per_query: 3, seed: 1 };
        let mut ds = build_dataset(&g, &p, &split).unwrap();
        ds.train[0].label = f64::INFINITY;
        let cfg = TrainConfig { epochs: 2, model: ModelConfig { d: 4, ..ModelConfig::default() }, ..TrainConfig::default() };
        match train(&g, &ds, &cfg) {
            Err(Error::Diverged { epoch, last_good, .. }) => {
                assert_eq!(epoch, 1);
                assert!(last_good.is_some());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
