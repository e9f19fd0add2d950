//! Training loss and evaluation metrics.
//!
//! Chamfer-type quantities use squared nearest-neighbor distances, Hausdorff
//! and point-to-curve use plain Euclidean distances.

use crate::dataset::ParametricCurve;
use crate::diffcore::{CustomBackward, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geom::{mean_nn_distance, nearest, PointSet};

mod stress;

pub use stress::{perturb, run_sweep, spearman, sweep_csv, Perturbation, SweepCase, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Outlier threshold in units of the reference's squared mean
    /// nearest-neighbor spacing. `f64::INFINITY` disables the filter.
    pub delta_multiplier: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            delta_multiplier: 5.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_multiplier > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "delta multiplier must be positive, got {}",
                self.delta_multiplier
            )))
        }
    }

    /// Squared-distance threshold δ for a reference patch.
    pub fn delta(&self, reference: &PointSet) -> f64 {
        if self.delta_multiplier.is_infinite() {
            return f64::INFINITY;
        }
        match mean_nn_distance(reference) {
            Ok(s) => self.delta_multiplier * s * s,
            Err(_) => f64::INFINITY,
        }
    }
}

fn check_pair(p: &PointSet, q: &PointSet) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::shape(format!(
            "metric between {}-d and {}-d point sets",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Symmetric mean of squared nearest-neighbor distances.
pub fn chamfer(p: &PointSet, q: &PointSet) -> Result<f64> {
    modified_chamfer_with_threshold(p, q, f64::INFINITY)
}

/// Chamfer distance where any squared nearest-neighbor distance above
/// `delta` contributes zero; the normalizers stay `1/|P|` and `1/|Q|`.
pub fn modified_chamfer_with_threshold(p: &PointSet, q: &PointSet, delta: f64) -> Result<f64> {
    check_pair(p, q)?;
    let xi = |d: f64| if d <= delta { d } else { 0.0 };
    let fwd: f64 = nearest(p, q).iter().map(|&(_, d)| xi(d)).sum();
    let bwd: f64 = nearest(q, p).iter().map(|&(_, d)| xi(d)).sum();
    Ok(fwd / p.len() as f64 + bwd / q.len() as f64)
}

pub fn modified_chamfer(p: &PointSet, q: &PointSet, cfg: &LossConfig) -> Result<f64> {
    modified_chamfer_with_threshold(p, q, cfg.delta(q))
}

struct ChamferGrad {
    reference: PointSet,
    /// Per prediction point: matched reference index, if kept.
    forward: Vec<Option<usize>>,
    /// Per reference point: matched prediction index, if kept.
    backward: Vec<Option<usize>>,
}

impl CustomBackward for ChamferGrad {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad_out: &[f64]) -> Vec<Option<Vec<f64>>> {
        let p = inputs[0];
        let d = p.cols();
        let g = grad_out[0];
        let np = self.forward.len() as f64;
        let nq = self.backward.len() as f64;
        let mut gp = vec![0.0; p.numel()];
        for (i, m) in self.forward.iter().enumerate() {
            if let Some(j) = m {
                let q = self.reference.point(*j);
                for a in 0..d {
                    gp[i * d + a] += g * 2.0 * (p.row(i)[a] - q[a]) / np;
                }
            }
        }
        for (j, m) in self.backward.iter().enumerate() {
            if let Some(i) = m {
                let q = self.reference.point(j);
                for a in 0..d {
                    gp[i * d + a] += g * 2.0 * (p.row(*i)[a] - q[a]) / nq;
                }
            }
        }
        vec![Some(gp)]
    }
}

/// Modified Chamfer loss recorded on a tape, differentiable in the
/// prediction `p` (an `n × d` tensor). The reference is constant.
pub fn modified_chamfer_var(
    tape: &mut Tape,
    p: Var,
    reference: &PointSet,
    cfg: &LossConfig,
) -> Result<Var> {
    let pred = PointSet::from_tensor(tape.tensor(p))?;
    check_pair(&pred, reference)?;
    let delta = cfg.delta(reference);
    let keep = |(j, d): (usize, f64)| (d <= delta).then_some(j);
    let fwd = nearest(&pred, reference);
    let bwd = nearest(reference, &pred);
    let value = fwd
        .iter()
        .filter(|x| x.1 <= delta)
        .map(|x| x.1)
        .sum::<f64>()
        / pred.len() as f64
        + bwd
            .iter()
            .filter(|x| x.1 <= delta)
            .map(|x| x.1)
            .sum::<f64>()
            / reference.len() as f64;
    let ctx = ChamferGrad {
        reference: reference.clone(),
        forward: fwd.into_iter().map(keep).collect(),
        backward: bwd.into_iter().map(keep).collect(),
    };
    Ok(tape.custom(&[p], Tensor::scalar(value), Box::new(ctx)))
}

/// Symmetric Hausdorff distance (unsquared).
pub fn hausdorff(p: &PointSet, q: &PointSet) -> Result<f64> {
    check_pair(p, q)?;
    let one_sided = |a: &PointSet, b: &PointSet| {
        nearest(a, b)
            .iter()
            .map(|&(_, d)| d)
            .fold(0.0f64, f64::max)
            .sqrt()
    };
    Ok(one_sided(p, q).max(one_sided(q, p)))
}

/// Mean distance from each point to a dense arc-length-uniform sampling of
/// `curve`. The sampling error is at most `arc_length / oracle_samples`.
pub fn point_to_curve(p: &PointSet, curve: &ParametricCurve, oracle_samples: usize) -> Result<f64> {
    if p.dim() != 2 {
        return Err(Error::shape(format!(
            "point-to-curve distance needs 2-d points, got {}-d",
            p.dim()
        )));
    }
    if oracle_samples < 1000 {
        return Err(Error::Config(format!(
            "point-to-curve needs at least 1000 oracle samples, got {oracle_samples}"
        )));
    }
    let dense = curve.sample_uniform(oracle_samples)?;
    let total: f64 = nearest(p, &dense).iter().map(|&(_, d)| d.sqrt()).sum();
    Ok(total / p.len() as f64)
}

/// Evaluation summary of a prediction against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub point_to_curve: Option<f64>,
    /// Distance from each predicted point to its nearest reference point.
    pub nn_distances: Vec<f64>,
}

impl MetricsReport {
    pub fn compute(
        prediction: &PointSet,
        reference: &PointSet,
        curve: Option<&ParametricCurve>,
    ) -> Result<Self> {
        let point_to_curve = match curve {
            Some(c) => Some(point_to_curve(prediction, c, 10_000)?),
            None => None,
        };
        let report = MetricsReport {
            chamfer: chamfer(prediction, reference)?,
            hausdorff: hausdorff(prediction, reference)?,
            point_to_curve,
            nn_distances: nearest(prediction, reference)
                .iter()
                .map(|&(_, d)| d.sqrt())
                .collect(),
        };
        let all = [
            report.chamfer,
            report.hausdorff,
            report.point_to_curve.unwrap_or(0.0),
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("metric value".into()));
        }
        Ok(report)
    }

    /// Flat `key = value` record.
    pub fn to_record(&self) -> String {
        let mut s = String::from(
            "# chamfer: mean squared NN distance, both directions; hausdorff: unsquared\n",
        );
        s += &format!("chamfer = {:e}\n", self.chamfer);
        s += &format!("hausdorff = {:e}\n", self.hausdorff);
        if let Some(v) = self.point_to_curve {
            s += &format!("point_to_curve = {v:e}\n");
        }
        s += &format!("points = {}\n", self.nn_distances.len());
        s
    }
}
