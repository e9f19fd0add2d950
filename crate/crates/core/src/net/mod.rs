//! The upsampling cascade: per-unit dense feature extraction over
//! feature-space neighborhoods, feature expansion by ±1 code assignment,
//! bilateral inter-level skip connections, and the multi-level pipelines
//! for inference and training.

mod cascade;
mod checkpoint;
mod config;
mod params;
mod unit;

pub use cascade::{cascade_infer, cascade_train_forward, TrainForward};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{Activation, NetConfig};
pub use params::{init_network, DenseBlockParams, Linear, NetworkParams, UnitParams};
pub use unit::{
    dense_block_forward, expand_features, extract_features, unit_forward, Context, UnitVars,
};
