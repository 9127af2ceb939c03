//! Meta-path similarity search over heterogeneous information networks.
//!
//! The crate has two halves. The exact half ([`hin`], [`pathsim`]) loads typed
//! graphs and computes PathSim scores from sparse path-count products. The
//! learned half ([`tensor`], [`model`], [`train`]) trains an encoder-decoder
//! network that approximates PathSim rows from graph structure alone, so a
//! trained model can score queries (and graphs) it never saw. [`eval`] holds
//! RMSE / nDCG harnesses that compare the two.

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod hin;
pub mod model;
pub mod pathsim;
pub mod tensor;
pub mod train;
pub mod util;

pub use error::{Error, ErrorKind, Result};
pub use hin::{EdgeTypeId, HinGraph, MetaPath, NetworkSchema, NodeId, NodeTypeId};
pub use model::{Aggregator, ModelConfig, ModelParams};
pub use pathsim::{PathSimEngine, RankedList, SparseCountMatrix};
