use super::ParametricCurve;
use crate::error::{Error, Result};
use crate::geom::PointSet;

/// Sparse input with references at every level: `|T_ℓ| = 2^ℓ · |P₀|`.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub input: PointSet,
    /// `references[ℓ − 1]` holds `T_ℓ`.
    pub references: Vec<PointSet>,
    pub curve: Option<ParametricCurve>,
    pub noise_free: bool,
}

impl TrainingExample {
    /// Checks the power-of-two reference progression.
    pub fn new(
        input: PointSet,
        references: Vec<PointSet>,
        curve: Option<ParametricCurve>,
    ) -> Result<Self> {
        for (l, r) in references.iter().enumerate() {
            let want = input.len() << (l + 1);
            if r.len() != want {
                return Err(Error::shape(format!(
                    "reference level {} has {} points, expected {want}",
                    l + 1,
                    r.len()
                )));
            }
            if r.dim() != input.dim() {
                return Err(Error::shape("reference dimension differs from input"));
            }
        }
        Ok(TrainingExample {
            input,
            references,
            curve,
            noise_free: true,
        })
    }

    pub fn levels(&self) -> usize {
        self.references.len()
    }

    /// `T_level`, 1-based.
    pub fn reference(&self, level: usize) -> Result<&PointSet> {
        level
            .checked_sub(1)
            .and_then(|i| self.references.get(i))
            .ok_or_else(|| {
                Error::Config(format!(
                    "example has references up to level {}, level {level} requested",
                    self.levels()
                ))
            })
    }
}

/// `P₀` and each `T_ℓ` sampled independently, uniformly in arc length.
pub fn build_example(curve: &ParametricCurve, n0: usize, levels: usize) -> Result<TrainingExample> {
    if levels == 0 {
        return Err(Error::Config("an example needs at least one level".into()));
    }
    let input = curve.sample_uniform(n0)?;
    let references = (1..=levels)
        .map(|l| curve.sample_uniform(n0 << l))
        .collect::<Result<Vec<_>>>()?;
    TrainingExample::new(input, references, Some(curve.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_curve, CurveKind};
    use crate::lossmetrics::{chamfer, point_to_curve};

    #[test]
    fn sizes_double_per_level() {
        let (c, _) = generate_curve(CurveKind::Fourier, 0).unwrap();
        let ex = build_example(&c, 50, 3).unwrap();
        let sizes: Vec<usize> = std::iter::once(ex.input.len())
            .chain(ex.references.iter().map(PointSet::len))
            .collect();
        assert_eq!(sizes, vec![50, 100, 200, 400]);
        assert!(ex.reference(4).is_err());
        assert!(ex.reference(0).is_err());
    }

    #[test]
    fn all_samples_lie_on_the_curve() {
        let (c, _) = generate_curve(CurveKind::RoundedPolygon, 5).unwrap();
        let ex = build_example(&c, 40, 2).unwrap();
        let bound = c.arc_length() / 4096.0;
        assert!(chamfer(&ex.input, &ex.references[0]).unwrap() > 0.0);
        assert!(point_to_curve(&ex.input, &c, 4096).unwrap() < bound);
        for r in &ex.references {
            assert!(point_to_curve(r, &c, 4096).unwrap() < bound);
        }
    }

    #[test]
    fn rejects_bad_progression() {
        let p = PointSet::new(2, vec![0.0; 6]).unwrap();
        let r = PointSet::new(2, vec![0.0; 10]).unwrap();
        assert!(TrainingExample::new(p, vec![r], None).is_err());
    }
}
