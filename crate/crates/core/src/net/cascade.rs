use rand::Rng;

use super::{unit_forward, Context, NetworkParams, UnitVars};
use crate::dataset::TrainingExample;
use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geom::{
    extract_inference_patches, extract_training_patches, knn, merge_and_resample, sq_dist,
    InferencePatch, PointSet,
};

/// Upsamples `p0` by `2^levels` with units `1..=levels`, patch by patch.
///
/// Each level covers the current set with `min(n, |P|)`-point patches,
/// runs the unit on every patch in its normalized frame, maps the outputs
/// back and resamples the union to exactly twice the input size. Features
/// of every input point are kept from the patch whose seed lies nearest to
/// it; the next level reads them through the skip connection, using the
/// previous-level neighborhood of its own patch seed.
pub fn cascade_infer(
    p0: &PointSet,
    params: &NetworkParams,
    levels: usize,
    n: usize,
    coverage_factor: f64,
) -> Result<PointSet> {
    let cfg = params.config();
    if levels > params.units() {
        return Err(Error::Config(format!(
            "{levels} levels requested but the network has {}",
            params.units()
        )));
    }
    if p0.dim() != cfg.dim {
        return Err(Error::shape(format!(
            "input dimension {} but network expects {}",
            p0.dim(),
            cfg.dim
        )));
    }
    let width = cfg.feature_width();
    let mut current = p0.clone();
    let mut context: Option<(PointSet, Tensor)> = None;
    for level in 1..=levels {
        let patch_n = n.min(current.len());
        let patches = extract_inference_patches(&current, patch_n, coverage_factor)?;
        let mut partials = Vec::with_capacity(patches.len());
        let mut best = vec![f64::INFINITY; current.len()];
        let mut level_feats = vec![0.0; current.len() * width];
        for patch in &patches {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape, level, false);
            let unit = UnitVars::new(params, &vars, level - 1);
            let x = tape.constant(patch.points.to_tensor());
            let ctx = match &context {
                Some((pts, feats)) => {
                    let k = patch_n.min(pts.len());
                    let query = PointSet::new(cfg.dim, patch.query_point.clone())?;
                    let idx = knn(&query, pts, k)?;
                    let rows: Vec<f64> = idx
                        .as_flat()
                        .iter()
                        .flat_map(|&i| feats.row(i).iter().copied())
                        .collect();
                    Some(Context {
                        points: patch.transform.apply(&pts.select(idx.as_flat())),
                        feats: tape.constant(Tensor::new([k, width], rows)?),
                    })
                }
                None => None,
            };
            let (out, feats) = unit_forward(&mut tape, x, ctx.as_ref(), unit)?;
            partials.push(to_global(&current, patch, tape.tensor(out))?);
            let feats = tape.tensor(feats);
            for (r, &g) in patch.indices.iter().enumerate() {
                let d = sq_dist(current.point(g), &patch.query_point);
                if d < best[g] {
                    best[g] = d;
                    level_feats[g * width..(g + 1) * width].copy_from_slice(feats.row(r));
                }
            }
        }
        let next = merge_and_resample(&partials, 2 * current.len())?;
        context = Some((current, Tensor::new([best.len(), width], level_feats)?));
        current = next;
    }
    Ok(current)
}

/// Maps a unit output back to the global frame. Row `r` is input row
/// `r mod n` plus a residual, and only the residual is rescaled, so a zero
/// residual reproduces the input coordinates exactly.
fn to_global(current: &PointSet, patch: &InferencePatch, out: &Tensor) -> Result<PointSet> {
    let n = patch.indices.len();
    let scale = patch.transform.scale;
    let mut coords = Vec::with_capacity(out.numel());
    for r in 0..out.rows() {
        let base = current.point(patch.indices[r % n]);
        let local = patch.points.point(r % n);
        for ((b, l), o) in base.iter().zip(local).zip(out.row(r)) {
            coords.push(b + (o - l) * scale);
        }
    }
    PointSet::new(current.dim(), coords)
}

/// Tape-recorded cascade for one training sample.
pub struct TrainForward {
    pub tape: Tape,
    /// Parameter variables indexed like [`NetworkParams::tensors`].
    pub vars: Vec<Option<Var>>,
    /// Final-level output `[2n, d]` in its patch frame.
    pub prediction: Var,
    /// Final-level reference in the same frame.
    pub reference: PointSet,
    /// Output and reference of every level below the target, each in its
    /// own patch frame.
    pub intermediate: Vec<(Var, PointSet)>,
    /// Global-frame seed of the final-level patch.
    pub query_point: Vec<f64>,
}

/// Runs units `1..=target` on one example and records everything needed
/// for a gradient step.
///
/// The reference chain starts from `T_target`. At each level a patch is
/// drawn from the previous output (the raw input at level 1) and its
/// reference from the previous reference patch; the previous output stays
/// differentiable through the gather and normalization, while the patch
/// transform itself is held constant. The skip connection feeds the
/// previous unit's input patch and features into the next unit.
pub fn cascade_train_forward<R: Rng + ?Sized>(
    example: &TrainingExample,
    params: &NetworkParams,
    target: usize,
    n: usize,
    rng: &mut R,
) -> Result<TrainForward> {
    if target == 0 || target > params.units() || target > example.levels() {
        return Err(Error::Config(format!(
            "target level {target} outside 1..={}",
            params.units().min(example.levels())
        )));
    }
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, target, true);
    let mut prev_out = tape.constant(example.input.to_tensor());
    let mut q_prev = example.reference(target)?.clone();
    let mut prev_ctx: Option<(PointSet, Var)> = None;
    let mut intermediate = Vec::new();
    for level in 1..=target {
        let p_prev = PointSet::from_tensor(tape.tensor(prev_out))?;
        let pair = extract_training_patches(&p_prev, &q_prev, n, target, level, rng)?;
        let t = &pair.transform;
        let gathered = tape.gather_rows(prev_out, &pair.input_indices, &[n])?;
        let patch = tape.affine(gathered, 1.0 / t.scale, &t.forward_offset())?;
        let ctx = prev_ctx.take().map(|(pts, feats)| Context {
            points: t.apply(&pts),
            feats,
        });
        let unit = UnitVars::new(params, &vars, level - 1);
        let (out, feats) = unit_forward(&mut tape, patch, ctx.as_ref(), unit)?;
        if level == target {
            return Ok(TrainForward {
                tape,
                vars,
                prediction: out,
                reference: pair.reference_patch,
                intermediate,
                query_point: pair.query_point,
            });
        }
        let level_ref = example.reference(level)?;
        let query = PointSet::new(p_prev.dim(), pair.query_point.clone())?;
        let near = knn(&query, level_ref, (2 * n).min(level_ref.len()))?;
        intermediate.push((out, t.apply(&level_ref.select(near.as_flat()))));
        prev_ctx = Some((t.invert(&pair.input_patch), feats));
        prev_out = tape.affine(out, t.scale, &t.centroid)?;
        q_prev = t.invert(&pair.reference_patch);
    }
    unreachable!("the loop returns at the target level")
}
