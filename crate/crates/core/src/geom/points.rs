use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Ordered set of `n ≥ 1` finite points in 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Row-major coordinates, `dim` values per point.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::shape(format!(
                "point dimension {dim} (expected 2 or 3)"
            )));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "{} coordinates do not form a nonempty set of {dim}-d points",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "point {} has a non-finite coordinate",
                i / dim
            )));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::shape("points of mixed dimension"));
        }
        PointSet::new(dim, points.concat())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        PointSet {
            dim: self.dim,
            coords,
        }
    }

    /// Concatenation in argument order; all sets must share `dim`.
    pub fn concat(sets: &[PointSet]) -> Result<PointSet> {
        let first = sets
            .first()
            .ok_or_else(|| Error::shape("concat of zero point sets"))?;
        if sets.iter().any(|s| s.dim != first.dim) {
            return Err(Error::shape(
                "concat of point sets with different dimension",
            ));
        }
        Ok(PointSet {
            dim: first.dim,
            coords: sets.iter().flat_map(|s| s.coords.iter().copied()).collect(),
        })
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for (ci, v) in c.iter_mut().zip(p) {
                *ci += v;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Per-axis (min, max).
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.iter() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        super::sq_dist(&lo, &hi).sqrt()
    }

    /// Applies `f` to every point, in place.
    pub fn map_points(&mut self, mut f: impl FnMut(&mut [f64])) {
        for p in self.coords.chunks_mut(self.dim) {
            f(p);
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.len(), self.dim], self.coords.clone())
            .expect("point set is a well-formed n×d matrix")
    }

    /// Reads an `n × d` tensor back as points.
    pub fn from_tensor(t: &Tensor) -> Result<PointSet> {
        if t.shape().len() != 2 {
            return Err(Error::shape(format!(
                "points from tensor of shape {:?}",
                t.shape()
            )));
        }
        PointSet::new(t.cols(), t.data().to_vec())
    }
}
