use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::hin::NetworkSchema;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// On-disk model: config, type vocabulary and named weights as nested
/// lists. serde_json writes shortest round-trip floats, so save/load is
/// bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format_version: u32,
    pub schema_fingerprint: String,
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
    #[serde(default)]
    pub metapath: Option<String>,
    pub config: ModelConfig,
    pub weights: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ModelParams {
    pub fn to_checkpoint(&self) -> CheckpointFile {
        CheckpointFile {
            format_version: CHECKPOINT_FORMAT_VERSION,
            schema_fingerprint: self.schema_fingerprint.clone(),
            node_types: self.node_types.clone(),
            edge_types: self.edge_types.clone(),
            metapath: self.metapath.clone(),
            config: self.config.clone(),
            weights: self.names().iter().cloned().zip(self.tensors().iter().map(Tensor::to_rows)).collect(),
        }
    }

    pub fn from_checkpoint(ck: CheckpointFile) -> Result<Self> {
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format {} (expected {CHECKPOINT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        let mut named = BTreeMap::new();
        for (name, rows) in ck.weights {
            let t = if rows.is_empty() {
                Tensor::zeros(0, 0)
            } else {
                Tensor::from_rows(&rows).map_err(|e| Error::Checkpoint(format!("weight `{name}`: {e}")))?
            };
            named.insert(name, t);
        }
        ModelParams::from_named(ck.config, ck.node_types, ck.edge_types, ck.schema_fingerprint, ck.metapath, named)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(ck)
    }

    /// Rejects a schema whose fingerprint differs from the training one
    /// unless `allow_mismatch`; in that case type names must still cover
    /// the new schema (checked when binding to a graph).
    pub fn check_schema(&self, schema: &NetworkSchema, allow_mismatch: bool) -> Result<()> {
        if self.schema_fingerprint == schema.fingerprint() || allow_mismatch {
            return Ok(());
        }
        Err(Error::Schema(format!(
            "checkpoint was trained on schema {} but the graph has schema {}",
            &self.schema_fingerprint[..12.min(self.schema_fingerprint.len())],
            &schema.fingerprint()[..12]
        )))
    }
}
