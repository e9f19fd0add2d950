use super::{knn, mean_nn_distance, sq_dist, NeighborIndex, PointSet, Rows};
use crate::diffcore::{CustomBackward, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Mean closest-neighbor distance, falling back to 1 for a single row or a
/// fully coincident set.
pub fn width_parameter<R: Rows + ?Sized>(rows: &R) -> f64 {
    match mean_nn_distance(rows) {
        Ok(w) if w > 0.0 && w.is_finite() => w,
        _ => 1.0,
    }
}

struct Interp {
    neighbors: NeighborIndex,
    /// Normalized joint weights, one per (query, neighbor).
    weights: Vec<f64>,
    h: f64,
}

fn forward(
    query_pts: &PointSet,
    query_feats: &Tensor,
    src_pts: &PointSet,
    src_feats: &Tensor,
    k: usize,
    widths: Option<(f64, f64)>,
) -> Result<(Tensor, Interp)> {
    if query_feats.shape().len() != 2 || src_feats.shape().len() != 2 {
        return Err(Error::shape("interpolation features must be matrices"));
    }
    if query_feats.rows() != query_pts.len() || src_feats.rows() != src_pts.len() {
        return Err(Error::shape(format!(
            "feature rows ({}, {}) vs point counts ({}, {})",
            query_feats.rows(),
            src_feats.rows(),
            query_pts.len(),
            src_pts.len()
        )));
    }
    if query_feats.cols() != src_feats.cols() || query_pts.dim() != src_pts.dim() {
        return Err(Error::shape("query and source widths differ"));
    }
    let neighbors = knn(query_pts, src_pts, k)?;
    let (r, h) = widths.unwrap_or_else(|| (width_parameter(src_pts), width_parameter(src_feats)));
    let c = src_feats.cols();
    let n = query_pts.len();
    let mut out = vec![0.0; n * c];
    let mut weights = vec![0.0; n * k];
    let mut logw = vec![0.0; k];
    for i in 0..n {
        let (p, f) = (query_pts.point(i), query_feats.row(i));
        for (slot, &j) in logw.iter_mut().zip(neighbors.row(i)) {
            *slot =
                -sq_dist(p, src_pts.point(j)) / (r * r) - sq_dist(f, src_feats.row(j)) / (h * h);
        }
        // Shift by the max log-weight so far-apart features can't underflow
        // every weight to zero.
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = &mut weights[i * k..(i + 1) * k];
        for (wj, lj) in w.iter_mut().zip(&logw) {
            *wj = (lj - top).exp();
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let o = &mut out[i * c..(i + 1) * c];
        for (&wj, &j) in w.iter().zip(neighbors.row(i)) {
            for (ov, gv) in o.iter_mut().zip(src_feats.row(j)) {
                *ov += wj * gv;
            }
        }
    }
    Ok((
        Tensor::new(vec![n, c], out)?,
        Interp {
            neighbors,
            weights,
            h,
        },
    ))
}

impl CustomBackward for Interp {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let (qf, sf) = (inputs[0], inputs[1]);
        let c = sf.cols();
        let k = self.neighbors.k();
        let mut gq = vec![0.0; qf.numel()];
        let mut gs = vec![0.0; sf.numel()];
        let two_over_h2 = 2.0 / (self.h * self.h);
        for i in 0..self.neighbors.rows() {
            let gi = &grad_out[i * c..(i + 1) * c];
            let oi = output.row(i);
            let fi = qf.row(i);
            for (&a, &j) in self.weights[i * k..(i + 1) * k]
                .iter()
                .zip(self.neighbors.row(i))
            {
                let gj = sf.row(j);
                let along: f64 = gi
                    .iter()
                    .zip(gj)
                    .zip(oi)
                    .map(|((g, s), o)| g * (s - o))
                    .sum();
                let s = a * along * two_over_h2;
                let gsj = &mut gs[j * c..(j + 1) * c];
                let gqi = &mut gq[i * c..(i + 1) * c];
                for ch in 0..c {
                    let diff = fi[ch] - gj[ch];
                    gsj[ch] += a * gi[ch] + s * diff;
                    gqi[ch] -= s * diff;
                }
            }
        }
        vec![Some(gq), Some(gs)]
    }
}

/// Joint spatial/feature weighted average of the `k` spatially nearest
/// source features for each query:
///
/// `f̃_i = Σ θ(p_i, p_j) ψ(f_i, f_j) f_j / Σ θ ψ` with
/// `θ = exp(−(‖p_i − p_j‖ / r)²)` and `ψ = exp(−(‖f_i − f_j‖ / h)²)`,
/// where `r` and `h` are mean closest-neighbor distances of the source
/// points and source features.
pub fn bilateral_interpolate(
    query_pts: &PointSet,
    query_feats: &Tensor,
    src_pts: &PointSet,
    src_feats: &Tensor,
    k: usize,
) -> Result<Tensor> {
    forward(query_pts, query_feats, src_pts, src_feats, k, None).map(|(t, _)| t)
}

/// [`bilateral_interpolate`] recorded on a tape, differentiable in both
/// feature inputs. Positions and the widths `r`, `h` are constants.
pub fn bilateral_interpolate_var(
    tape: &mut Tape,
    query_pts: &PointSet,
    query_feats: Var,
    src_pts: &PointSet,
    src_feats: Var,
    k: usize,
) -> Result<Var> {
    interpolate_on_tape(tape, query_pts, query_feats, src_pts, src_feats, k, None)
}

/// Like [`bilateral_interpolate_var`] with caller-supplied widths `(r, h)`.
pub fn bilateral_interpolate_var_with_widths(
    tape: &mut Tape,
    query_pts: &PointSet,
    query_feats: Var,
    src_pts: &PointSet,
    src_feats: Var,
    k: usize,
    widths: (f64, f64),
) -> Result<Var> {
    interpolate_on_tape(
        tape,
        query_pts,
        query_feats,
        src_pts,
        src_feats,
        k,
        Some(widths),
    )
}

fn interpolate_on_tape(
    tape: &mut Tape,
    query_pts: &PointSet,
    query_feats: Var,
    src_pts: &PointSet,
    src_feats: Var,
    k: usize,
    widths: Option<(f64, f64)>,
) -> Result<Var> {
    let (out, ctx) = forward(
        query_pts,
        tape.tensor(query_feats),
        src_pts,
        tape.tensor(src_feats),
        k,
        widths,
    )?;
    Ok(tape.custom(&[query_feats, src_feats], out, Box::new(ctx)))
}
