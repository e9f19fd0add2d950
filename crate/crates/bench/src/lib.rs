//! Shared fixtures for the criterion benchmarks in `benches/`.

use pu3_core::dataset::{build_example, generate_curve, CurveKind};
use pu3_core::net::{init_network, NetConfig};
use pu3_core::{NetworkParams, PointSet, TrainingExample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points drawn uniformly from `[-1, 1]^dim`.
pub fn random_points(n: usize, dim: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointSet::new(dim, coords).expect("finite coordinates")
}

/// Freshly initialized planar network with `levels` units.
pub fn planar_network(levels: usize) -> NetworkParams {
    let cfg = NetConfig {
        levels,
        dim: 2,
        ..NetConfig::default()
    };
    init_network(&cfg, 0).expect("default config is valid")
}

/// One synthetic curve example per curve kind.
pub fn curve_examples(n0: usize, levels: usize) -> Vec<TrainingExample> {
    CurveKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let (curve, _) = generate_curve(kind, i as u64).expect("generator converges");
            build_example(&curve, n0, levels).expect("enough samples")
        })
        .collect()
}
