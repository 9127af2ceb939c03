//! Encoder-decoder approximator of PathSim rows.
//!
//! Every node carries `T` slot embeddings. Each encoder layer projects slot
//! states with a per-node-type matrix, builds one message per incident edge
//! and slot from `[source ‖ edge type embedding ‖ target]`, pools the
//! messages element-wise into `T` new slot messages, and mixes them with the
//! previous state. The decoder is a two-layer ReLU MLP over the concatenated
//! final slots.

mod checkpoint;
mod forward;

pub use checkpoint::{CheckpointFile, CHECKPOINT_FORMAT_VERSION};
pub use forward::{
    build_forward, decode, encode, encoder_layer, forward_all, forward_many, init_features, Forward, NodeStates,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{HinGraph, NetworkSchema};
use crate::tensor::{PoolKind, Tensor};

/// Neighborhood aggregation used in the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    /// Element-wise top-T selection.
    TopT,
    /// Top-T selection of whole message vectors (ranked by component sum).
    #[serde(rename = "topt-vector")]
    TopTVector,
    Mean,
    Max,
    Sum,
}

impl Aggregator {
    pub fn pool_kind(self) -> PoolKind {
        match self {
            Aggregator::TopT => PoolKind::TopT,
            Aggregator::TopTVector => PoolKind::TopTVector,
            Aggregator::Mean => PoolKind::Mean,
            Aggregator::Max => PoolKind::Max,
            Aggregator::Sum => PoolKind::Sum,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topt" | "top-t" | "top_t" => Ok(Aggregator::TopT),
            "topt-vector" | "top-t-vector" | "topt_vector" => Ok(Aggregator::TopTVector),
            "mean" => Ok(Aggregator::Mean),
            "max" => Ok(Aggregator::Max),
            "sum" => Ok(Aggregator::Sum),
            _ => Err(Error::InvalidArgument(format!("unknown aggregator `{s}` (topt|topt-vector|mean|max|sum)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden width.
    pub d: usize,
    /// Slot count requested for top-T pooling.
    pub slots: usize,
    /// Encoder layers.
    pub layers: usize,
    pub aggregator: Aggregator,
    pub use_node_type: bool,
    pub use_edge_type: bool,
    /// Drop pooling candidates that repeat an earlier slot's message on the
    /// same edge (both endpoint states identical), so equal slots count as
    /// one path instance.
    pub distinct_slots: bool,
    pub bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            slots: 2,
            layers: 2,
            aggregator: Aggregator::TopT,
            use_node_type: true,
            use_edge_type: true,
            distinct_slots: true,
            bias: false,
        }
    }
}

impl ModelConfig {
    /// Slots actually carried: mean/max/sum emit a single vector.
    pub fn effective_slots(&self) -> usize {
        if matches!(self.aggregator, Aggregator::TopT | Aggregator::TopTVector) {
            self.slots
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidArgument("hidden width d must be at least 2".into()));
        }
        if self.slots < 1 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if self.layers < 1 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        Ok(())
    }
}

/// Positions of each weight inside [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    /// One entry per node type, or a single shared entry.
    pub node_proj: Vec<usize>,
    /// One entry per edge type; empty without edge-type features.
    pub edge_emb: Vec<usize>,
    pub message: usize,
    pub update: usize,
    pub dec_hidden: usize,
    pub dec_out: usize,
    /// message, update, decoder hidden, decoder out
    pub bias: Option<[usize; 4]>,
}

/// All trainable weights plus the type vocabulary they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
    pub schema_fingerprint: String,
    /// Meta-path the weights were trained for, in display form.
    pub metapath: Option<String>,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    pub(crate) layout: Layout,
}

fn layout_and_shapes(config: &ModelConfig, node_types: &[String], edge_types: &[String]) -> (Layout, Vec<(String, usize, usize)>) {
    let d = config.d;
    let t = config.effective_slots();
    let mut shapes = Vec::new();
    let mut add = |name: String, r: usize, c: usize| {
        shapes.push((name, r, c));
        shapes.len() - 1
    };
    let node_proj = if config.use_node_type {
        node_types.iter().map(|n| add(format!("node_proj.{n}"), d, d)).collect()
    } else {
        vec![add("node_proj".into(), d, d)]
    };
    let edge_emb = if config.use_edge_type {
        edge_types.iter().map(|n| add(format!("edge_emb.{n}"), 1, d)).collect()
    } else {
        Vec::new()
    };
    let msg_width = if config.use_edge_type { 3 * d } else { 2 * d };
    let message = add("message".into(), d, msg_width);
    let update = add("update".into(), d, 2 * d);
    let dec_hidden = add("decoder_hidden".into(), d, d * t);
    let dec_out = add("decoder_out".into(), 1, d);
    let bias = config.bias.then(|| {
        [
            add("message_bias".into(), 1, d),
            add("update_bias".into(), 1, d),
            add("decoder_hidden_bias".into(), 1, d),
            add("decoder_out_bias".into(), 1, 1),
        ]
    });
    (Layout { node_proj, edge_emb, message, update, dec_hidden, dec_out, bias }, shapes)
}

impl ModelParams {
    /// Fresh weights: matrices uniform in `±sqrt(6 / (fan_in + fan_out))`,
    /// edge embeddings uniform in `±0.1`, biases zero.
    pub fn init(schema: &NetworkSchema, config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let node_types = schema.node_type_names().to_vec();
        let edge_types: Vec<String> = schema.edge_types().iter().map(|e| e.name.clone()).collect();
        let (layout, shapes) = layout_and_shapes(&config, &node_types, &edge_types);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(shapes.len());
        let mut tensors = Vec::with_capacity(shapes.len());
        for (name, r, c) in shapes {
            let limit = if name.starts_with("edge_emb") {
                0.1
            } else if name.ends_with("_bias") {
                0.0
            } else {
                (6.0 / (r + c) as f64).sqrt()
            };
            let data = (0..r * c)
                .map(|_| if limit == 0.0 { 0.0 } else { rng.gen_range(-limit..limit) })
                .collect();
            names.push(name);
            tensors.push(Tensor::from_vec(r, c, data)?);
        }
        Ok(ModelParams {
            config,
            node_types,
            edge_types,
            schema_fingerprint: schema.fingerprint(),
            metapath: None,
            names,
            tensors,
            layout,
        })
    }

    /// Rebuilds from named tensors (checkpoint loading).
    pub fn from_named(
        config: ModelConfig,
        node_types: Vec<String>,
        edge_types: Vec<String>,
        schema_fingerprint: String,
        metapath: Option<String>,
        mut named: std::collections::BTreeMap<String, Tensor>,
    ) -> Result<Self> {
        config.validate()?;
        let (layout, shapes) = layout_and_shapes(&config, &node_types, &edge_types);
        let mut names = Vec::with_capacity(shapes.len());
        let mut tensors = Vec::with_capacity(shapes.len());
        for (name, r, c) in shapes {
            let t = named
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing weight `{name}`")))?;
            if t.shape() != (r, c) {
                return Err(Error::Checkpoint(format!("weight `{name}` has shape {:?}, expected ({r}, {c})", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::Checkpoint(format!("weight `{name}` contains non-finite values")));
            }
            names.push(name);
            tensors.push(t);
        }
        if let Some(extra) = named.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected weight `{extra}`")));
        }
        Ok(ModelParams { config, node_types, edge_types, schema_fingerprint, metapath, names, tensors, layout })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Graph type ids mapped to parameter slots by type name.
    pub(crate) fn bind(&self, g: &HinGraph) -> Result<TypeBinding> {
        let schema = g.schema();
        let mut node = Vec::with_capacity(schema.num_node_types());
        for name in schema.node_type_names() {
            let pos = self
                .node_types
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::TypeMismatch(format!("node type `{name}` unknown to the model")))?;
            node.push(if self.config.use_node_type { self.layout.node_proj[pos] } else { self.layout.node_proj[0] });
        }
        let mut edge = Vec::with_capacity(schema.num_edge_types());
        for def in schema.edge_types() {
            let pos = self
                .edge_types
                .iter()
                .position(|n| *n == def.name)
                .ok_or_else(|| Error::TypeMismatch(format!("edge type `{}` unknown to the model", def.name)))?;
            edge.push(self.layout.edge_emb.get(pos).copied());
        }
        Ok(TypeBinding { node, edge })
    }
}

/// Parameter index for each graph node type and (optionally) edge type.
#[derive(Debug, Clone)]
pub(crate) struct TypeBinding {
    pub node: Vec<usize>,
    pub edge: Vec<Option<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> NetworkSchema {
        NetworkSchema::new(&["A", "P", "C"], &[("AP", "A", "P"), ("PC", "P", "C")]).unwrap()
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig { d: 4, slots: 3, ..ModelConfig::default() };
        let p = ModelParams::init(&schema(), cfg.clone(), 1).unwrap();
        assert_eq!(p.get("node_proj.A").unwrap().shape(), (4, 4));
        assert_eq!(p.get("edge_emb.PC").unwrap().shape(), (1, 4));
        assert_eq!(p.get("message").unwrap().shape(), (4, 12));
        assert_eq!(p.get("update").unwrap().shape(), (4, 8));
        assert_eq!(p.get("decoder_hidden").unwrap().shape(), (4, 12));
        assert_eq!(p.get("decoder_out").unwrap().shape(), (1, 4));
        assert!(p.get("edge_emb.PC").unwrap().data().iter().all(|v| v.abs() <= 0.1));

        let no_edge = ModelConfig { use_edge_type: false, use_node_type: false, ..cfg.clone() };
        let p = ModelParams::init(&schema(), no_edge, 1).unwrap();
        assert_eq!(p.get("message").unwrap().shape(), (4, 8));
        assert!(p.get("node_proj").is_some() && p.get("node_proj.A").is_none());
        assert!(p.get("edge_emb.AP").is_none());

        let mean = ModelConfig { aggregator: Aggregator::Mean, ..cfg };
        let p = ModelParams::init(&schema(), mean, 1).unwrap();
        assert_eq!(p.get("decoder_hidden").unwrap().shape(), (4, 4));
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(&schema(), ModelConfig::default(), 5).unwrap();
        let b = ModelParams::init(&schema(), ModelConfig::default(), 5).unwrap();
        let c = ModelParams::init(&schema(), ModelConfig::default(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            ModelConfig { d: 1, ..ModelConfig::default() },
            ModelConfig { slots: 0, ..ModelConfig::default() },
            ModelConfig { layers: 0, ..ModelConfig::default() },
        ] {
            assert!(ModelParams::init(&schema(), cfg, 0).is_err());
        }
    }
}
