use rand::Rng;

use super::{farthest_point_sample, knn, PointSet};
use crate::error::{Error, Result};

/// Maps a patch to its unit-cube frame: `(p − centroid) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTransform {
    pub centroid: Vec<f64>,
    pub scale: f64,
}

impl PatchTransform {
    pub fn identity(dim: usize) -> Self {
        PatchTransform {
            centroid: vec![0.0; dim],
            scale: 1.0,
        }
    }

    pub fn apply(&self, points: &PointSet) -> PointSet {
        let mut out = points.clone();
        out.map_points(|p| {
            for (v, c) in p.iter_mut().zip(&self.centroid) {
                *v = (*v - c) / self.scale;
            }
        });
        out
    }

    pub fn invert(&self, points: &PointSet) -> PointSet {
        let mut out = points.clone();
        out.map_points(|p| {
            for (v, c) in p.iter_mut().zip(&self.centroid) {
                *v = *v * self.scale + c;
            }
        });
        out
    }

    /// Offset row for `x * (1/scale) + offset` (global → normalized).
    pub(crate) fn forward_offset(&self) -> Vec<f64> {
        self.centroid.iter().map(|c| -c / self.scale).collect()
    }
}

/// Centers on the centroid and divides by the largest axis extent. A patch
/// whose points all coincide gets scale 1.
pub fn normalize_patch(points: &PointSet) -> (PointSet, PatchTransform) {
    let centroid = points.centroid();
    let (lo, hi) = points.bounds();
    let extent = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    let scale = if extent > 0.0 { extent } else { 1.0 };
    let t = PatchTransform { centroid, scale };
    (t.apply(points), t)
}

pub fn denormalize(points: &PointSet, t: &PatchTransform) -> PointSet {
    t.invert(points)
}

/// Number of reference points matched to a level-`level` input patch of
/// `n` points when training toward `target`: `2^(target − level + 1) · n`.
pub fn reference_patch_size(n: usize, target: usize, level: usize) -> usize {
    n << (target + 1 - level)
}

/// Normalized training input patch and its matching reference patch.
#[derive(Debug, Clone)]
pub struct PatchPair {
    pub input_patch: PointSet,
    pub reference_patch: PointSet,
    pub transform: PatchTransform,
    pub level: usize,
    /// Global-frame query point both patches are gathered around.
    pub query_point: Vec<f64>,
    pub input_indices: Vec<usize>,
    pub reference_indices: Vec<usize>,
}

/// Draws a query uniformly from `p_prev`, takes its `n` nearest points as
/// the input patch and its `2^(target − level + 1) · n` nearest points in
/// `q_prev` as the reference, both normalized by the input's transform.
pub fn extract_training_patches<R: Rng + ?Sized>(
    p_prev: &PointSet,
    q_prev: &PointSet,
    n: usize,
    target: usize,
    level: usize,
    rng: &mut R,
) -> Result<PatchPair> {
    if level == 0 || level > target {
        return Err(Error::Config(format!("level {level} outside 1..={target}")));
    }
    let ref_k = reference_patch_size(n, target, level);
    if p_prev.len() < n {
        return Err(Error::InsufficientPoints {
            needed: n,
            available: p_prev.len(),
        });
    }
    if q_prev.len() < ref_k {
        return Err(Error::InsufficientPoints {
            needed: ref_k,
            available: q_prev.len(),
        });
    }
    let qi = rng.random_range(0..p_prev.len());
    let query = p_prev.select(&[qi]);
    let input_indices = knn(&query, p_prev, n)?.as_flat().to_vec();
    let reference_indices = knn(&query, q_prev, ref_k)?.as_flat().to_vec();
    let (input_patch, transform) = normalize_patch(&p_prev.select(&input_indices));
    let reference_patch = transform.apply(&q_prev.select(&reference_indices));
    Ok(PatchPair {
        input_patch,
        reference_patch,
        transform,
        level,
        query_point: query.point(0).to_vec(),
        input_indices,
        reference_indices,
    })
}

/// One inference patch: a normalized `n`-point neighborhood of a seed point.
#[derive(Debug, Clone)]
pub struct InferencePatch {
    pub points: PointSet,
    pub transform: PatchTransform,
    pub query_index: usize,
    pub query_point: Vec<f64>,
    pub indices: Vec<usize>,
}

/// Covers `points` with overlapping `n`-point patches seeded by farthest
/// point sampling from index 0.
///
/// Starts from `H = ceil(coverage_factor · |P| / n)` seeds and adds seeds
/// until every point belongs to at least one patch.
pub fn extract_inference_patches(
    points: &PointSet,
    n: usize,
    coverage_factor: f64,
) -> Result<Vec<InferencePatch>> {
    let total = points.len();
    if n == 0 || total < n {
        return Err(Error::InsufficientPoints {
            needed: n.max(1),
            available: total,
        });
    }
    if !(coverage_factor > 0.0 && coverage_factor.is_finite()) {
        return Err(Error::Config(format!("coverage factor {coverage_factor}")));
    }
    let mut h = ((coverage_factor * total as f64 / n as f64).ceil() as usize).clamp(1, total);
    loop {
        let queries = farthest_point_sample(points, h, 0)?;
        let neigh = knn(&points.select(&queries), points, n)?;
        let mut covered = vec![false; total];
        neigh.as_flat().iter().for_each(|&i| covered[i] = true);
        if covered.iter().all(|&c| c) || h >= total {
            return Ok(queries
                .iter()
                .enumerate()
                .map(|(r, &q)| {
                    let indices = neigh.row(r).to_vec();
                    let (patch, transform) = normalize_patch(&points.select(&indices));
                    InferencePatch {
                        points: patch,
                        transform,
                        query_index: q,
                        query_point: points.point(q).to_vec(),
                        indices,
                    }
                })
                .collect());
        }
        h += 1;
    }
}

/// Concatenates global-frame partial outputs and keeps `target_count`
/// of them by farthest point sampling from the first point.
pub fn merge_and_resample(partials: &[PointSet], target_count: usize) -> Result<PointSet> {
    let all = PointSet::concat(partials)?;
    let picks = farthest_point_sample(&all, target_count, 0)?;
    Ok(all.select(&picks))
}
