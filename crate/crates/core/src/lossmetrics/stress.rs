use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{chamfer, hausdorff, point_to_curve};
use crate::dataset::ParametricCurve;
use crate::error::{Error, Result};
use crate::geom::PointSet;

/// Input degradation applied before upsampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Gaussian jitter with standard deviation `level × bbox diagonal`.
    Noise(f64),
    /// Removes `round(fraction · n)` points chosen uniformly.
    Drop(f64),
}

impl Perturbation {
    pub fn kind(&self) -> &'static str {
        match self {
            Perturbation::Noise(_) => "noise",
            Perturbation::Drop(_) => "drop",
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            Perturbation::Noise(v) | Perturbation::Drop(v) => v,
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), self.level())
    }
}

pub fn perturb(points: &PointSet, p: Perturbation, rng: &mut ChaCha8Rng) -> Result<PointSet> {
    match p {
        Perturbation::Noise(level) => {
            if !(level >= 0.0 && level.is_finite()) {
                return Err(Error::Config(format!("noise level {level}")));
            }
            let sigma = level * points.bbox_diagonal();
            if sigma == 0.0 {
                return Ok(points.clone());
            }
            let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
            let mut out = points.clone();
            out.map_points(|q| q.iter_mut().for_each(|v| *v += normal.sample(rng)));
            Ok(out)
        }
        Perturbation::Drop(fraction) => {
            if !(0.0..1.0).contains(&fraction) {
                return Err(Error::Config(format!(
                    "drop fraction {fraction} outside [0, 1)"
                )));
            }
            let n = points.len();
            let keep = n - (fraction * n as f64).round() as usize;
            let mut idx = sample(rng, n, keep).into_vec();
            idx.sort_unstable();
            Ok(points.select(&idx))
        }
    }
}

/// One shape of a stress sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepCase<'a> {
    pub input: &'a PointSet,
    pub reference: &'a PointSet,
    pub curve: Option<&'a ParametricCurve>,
}

/// Metrics averaged over all cases at one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub perturbation: Perturbation,
    pub chamfer: f64,
    pub hausdorff: f64,
    pub point_to_curve: Option<f64>,
    pub cases: usize,
}

/// Perturbs every case's input, upsamples it and averages the metrics
/// against the clean reference. Each setting restarts the random stream
/// from `seed`, so noise levels share the same underlying draws.
pub fn run_sweep<F>(
    cases: &[SweepCase<'_>],
    settings: &[Perturbation],
    seed: u64,
    mut upsample: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(&PointSet) -> Result<PointSet>,
{
    if cases.is_empty() {
        return Err(Error::Config("sweep needs at least one case".into()));
    }
    let with_curve = cases.iter().all(|c| c.curve.is_some());
    settings
        .iter()
        .map(|&setting| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut cd, mut hd, mut pc) = (0.0, 0.0, 0.0);
            for case in cases {
                let input = perturb(case.input, setting, &mut rng)?;
                let out = upsample(&input)?;
                cd += chamfer(&out, case.reference)?;
                hd += hausdorff(&out, case.reference)?;
                if let (true, Some(curve)) = (with_curve, case.curve) {
                    pc += point_to_curve(&out, curve, 10_000)?;
                }
            }
            let n = cases.len() as f64;
            let row = SweepRow {
                perturbation: setting,
                chamfer: cd / n,
                hausdorff: hd / n,
                point_to_curve: with_curve.then_some(pc / n),
                cases: cases.len(),
            };
            if !(row.chamfer.is_finite() && row.hausdorff.is_finite() && pc.is_finite()) {
                return Err(Error::NonFinite(format!("metrics at {setting}")));
            }
            Ok(row)
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("perturbation,level,chamfer,hausdorff,point_to_curve,cases\n");
    for r in rows {
        let pc = r.point_to_curve.map_or(String::new(), |v| format!("{v:e}"));
        s += &format!(
            "{},{},{:e},{:e},{pc},{}\n",
            r.perturbation.kind(),
            r.perturbation.level(),
            r.chamfer,
            r.hausdorff,
            r.cases
        );
    }
    s
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `NaN` when
/// either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_curve, CurveKind};

    fn circle(n: usize) -> PointSet {
        let coords = (0..n)
            .flat_map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        PointSet::new(2, coords).unwrap()
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        // Monotone but nonlinear still ranks perfectly.
        assert_eq!(spearman(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 8.0, 27.0]), 1.0);
        // Ranks [1, 2, 3, 4] vs [1, 3, 2, 4]: 1 − 6·2/(4·15) = 0.8.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
    }

    #[test]
    fn drop_keeps_order_and_count() {
        let p = circle(40);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = perturb(&p, Perturbation::Drop(0.25), &mut rng).unwrap();
        assert_eq!(out.len(), 30);
        let mut last = None;
        for q in out.iter() {
            let i = (0..40).find(|&i| p.point(i) == q).unwrap();
            assert!(last.is_none_or(|l| i > l));
            last = Some(i);
        }
        assert_eq!(perturb(&p, Perturbation::Drop(0.0), &mut rng).unwrap(), p);
        assert!(perturb(&p, Perturbation::Drop(1.0), &mut rng).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = circle(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb(&p, Perturbation::Noise(0.0), &mut rng).unwrap(), p);
        assert!(perturb(&p, Perturbation::Noise(-1.0), &mut rng).is_err());
    }

    #[test]
    fn identity_sweep_on_exact_input() {
        let (curve, _) = generate_curve(CurveKind::Circle, 0).unwrap();
        let p = curve.sample_uniform(64).unwrap();
        let cases = [SweepCase {
            input: &p,
            reference: &p,
            curve: Some(&curve),
        }];
        let settings: Vec<Perturbation> = [0.0, 0.005, 0.01, 0.02]
            .iter()
            .map(|&v| Perturbation::Noise(v))
            .collect();
        let rows = run_sweep(&cases, &settings, 1, |x| Ok(x.clone())).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].chamfer, 0.0);
        assert_eq!(rows[0].hausdorff, 0.0);
        assert!(rows[0].point_to_curve.unwrap() < 1e-3);
        let levels: Vec<f64> = rows.iter().map(|r| r.perturbation.level()).collect();
        let cds: Vec<f64> = rows.iter().map(|r| r.chamfer).collect();
        assert_eq!(spearman(&levels, &cds), 1.0);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().starts_with("noise,0,0e0,0e0,"));
    }
}
