//! Two-stage subspace-constrained precoding for multi-cell massive MIMO.
//!
//! The outer precoder `F_n` of each user cluster is chosen from channel
//! statistics by solving a chance-constrained QoS problem; the inner
//! precoder is per-slot zero forcing inside that subspace.

pub mod container;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod linalg;
pub mod optimizer;
pub mod precoding;
pub mod rng;
pub mod scenario;

pub use container::Container;
pub use error::{Error, Result};
pub use optimizer::{BcaResult, QoSProblem};
pub use precoding::{PowerAllocation, SubspaceControl};
pub use scenario::{ChannelDraw, Scenario, ScenarioConfig, SpatialCovariance, TopologyGraph};
