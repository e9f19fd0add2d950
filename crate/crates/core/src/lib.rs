//! Progressive patch-based point set upsampling.
//!
//! A cascade of 2× upsampling units, each made of densely connected
//! feature extraction over feature-space neighborhoods, feature expansion
//! by code assignment, and a bilateral inter-level skip connection. The
//! cascade is trained end to end on local patches with a progressive
//! schedule that activates one unit at a time.
//!
//! Everything runs on a small in-crate reverse-mode differentiation engine
//! ([`diffcore`]) so the whole pipeline is self-contained.

pub mod dataset;
pub mod diffcore;
pub mod error;
pub mod geom;
pub mod lossmetrics;
pub mod net;
pub mod trainer;

pub use dataset::{ParametricCurve, TrainingExample};
pub use diffcore::{AdamConfig, AdamState, Tape, Tensor, Var};
pub use error::{Error, Result};
pub use geom::{NeighborIndex, PatchPair, PatchTransform, PointSet};
pub use lossmetrics::{LossConfig, MetricsReport};
pub use net::{NetConfig, NetworkParams};
pub use trainer::{StageSpec, TrainConfig, TrainLog};
