//! Synthetic closed-curve data, multi-resolution training examples, and
//! point-set files.

mod curve;
mod example;
mod io;
mod manifest;

pub use curve::{
    generate_curve, CurveKind, CurveSpec, Harmonic, ParametricCurve, ARC_TABLE_SEGMENTS,
};
pub use example::{build_example, TrainingExample};
pub use io::{format_points, parse_points, read_points, write_points};
pub use manifest::{generate_dataset, DatasetManifest, GenerateOptions, ManifestEntry, Split};
