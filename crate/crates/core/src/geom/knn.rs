use std::cmp::Ordering;

use super::{sq_dist, PointSet};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Anything that can be viewed as a row-major matrix of coordinates.
pub trait Rows {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn row_at(&self, i: usize) -> &[f64];
}

impl Rows for PointSet {
    fn n_rows(&self) -> usize {
        self.len()
    }
    fn n_cols(&self) -> usize {
        self.dim()
    }
    fn row_at(&self, i: usize) -> &[f64] {
        self.point(i)
    }
}

impl Rows for Tensor {
    fn n_rows(&self) -> usize {
        self.rows()
    }
    fn n_cols(&self) -> usize {
        self.cols()
    }
    fn row_at(&self, i: usize) -> &[f64] {
        self.row(i)
    }
}

/// `n × k` neighbor lists; each row is sorted by nondecreasing distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    k: usize,
    indices: Vec<usize>,
}

impl NeighborIndex {
    pub fn new(k: usize, indices: Vec<usize>) -> Result<Self> {
        if k == 0 || !indices.len().is_multiple_of(k) {
            return Err(Error::shape(format!(
                "{} indices in rows of {k}",
                indices.len()
            )));
        }
        Ok(NeighborIndex { k, indices })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn as_flat(&self) -> &[usize] {
        &self.indices
    }
}

fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact brute-force k nearest neighbors under Euclidean distance.
///
/// Ties go to the lower source index, so a query that is itself a source
/// row finds itself first.
pub fn knn<R: Rows + ?Sized>(query: &R, source: &R, k: usize) -> Result<NeighborIndex> {
    let n = source.n_rows();
    if k == 0 || k > n {
        return Err(Error::InsufficientPoints {
            needed: k.max(1),
            available: n,
        });
    }
    if query.n_cols() != source.n_cols() {
        return Err(Error::shape(format!(
            "knn between {}- and {}-column rows",
            query.n_cols(),
            source.n_cols()
        )));
    }
    let mut indices = Vec::with_capacity(query.n_rows() * k);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..query.n_rows() {
        let q = query.row_at(i);
        scratch.clear();
        scratch.extend((0..n).map(|j| (sq_dist(q, source.row_at(j)), j)));
        if k < n {
            scratch.select_nth_unstable_by(k - 1, by_dist_then_index);
        }
        let head = &mut scratch[..k];
        head.sort_unstable_by(by_dist_then_index);
        indices.extend(head.iter().map(|&(_, j)| j));
    }
    NeighborIndex::new(k, indices)
}

/// For every row of `from`, the index of its nearest row in `to` and the
/// squared distance. Ties go to the lower index.
pub fn nearest<R: Rows + ?Sized>(from: &R, to: &R) -> Vec<(usize, f64)> {
    (0..from.n_rows())
        .map(|i| {
            let p = from.row_at(i);
            let mut best = (0, f64::INFINITY);
            for j in 0..to.n_rows() {
                let d = sq_dist(p, to.row_at(j));
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

/// Mean distance from each row to its nearest other row.
pub fn mean_nn_distance<R: Rows + ?Sized>(points: &R) -> Result<f64> {
    let n = points.n_rows();
    if n < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            available: n,
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        let p = points.row_at(i);
        let mut best = f64::INFINITY;
        for j in 0..n {
            if j != i {
                best = best.min(sq_dist(p, points.row_at(j)));
            }
        }
        total += best.sqrt();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(2, xs.iter().flat_map(|&x| [x, 0.0]).collect()).unwrap()
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointSet {
        PointSet::new(
            dim,
            (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    /// Full sort of true (unsquared) distances.
    fn oracle(query: &PointSet, source: &PointSet, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for q in query.iter() {
            let mut all: Vec<(f64, usize)> = source
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let d: f64 = q.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum();
                    (d.sqrt(), j)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            out.extend(all[..k].iter().map(|x| x.1));
        }
        out
    }

    #[test]
    fn self_is_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_set(&mut rng, 30, 3);
        let idx = knn(&p, &p, 1).unwrap();
        assert_eq!(idx.as_flat(), (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn small_line_example() {
        let src = line(&[0.0, 1.0, 3.0]);
        let q = line(&[0.9]);
        assert_eq!(knn(&q, &src, 2).unwrap().row(0), &[1, 0]);
    }

    #[test]
    fn matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_set(&mut rng, 100, 2);
        assert_eq!(knn(&p, &p, 8).unwrap().as_flat(), oracle(&p, &p, 8));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let src = line(&[-1.0, 1.0, 1.0, -1.0]);
        let q = line(&[0.0]);
        assert_eq!(knn(&q, &src, 4).unwrap().row(0), &[0, 1, 2, 3]);
    }

    #[test]
    fn errors() {
        let p = line(&[0.0, 1.0]);
        assert!(matches!(
            knn(&p, &p, 3),
            Err(Error::InsufficientPoints { .. })
        ));
        let q = PointSet::new(3, vec![0.0; 3]).unwrap();
        assert!(matches!(knn(&q, &p, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn mean_nn_examples() {
        assert!((mean_nn_distance(&line(&[0.0, 1.0, 3.0])).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let grid = PointSet::from_points(
            &(0..4)
                .flat_map(|i| (0..4).map(move |j| vec![0.5 * i as f64, 0.5 * j as f64]))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((mean_nn_distance(&grid).unwrap() - 0.5).abs() < 1e-15);
        // Coincident pair contributes zero: (0 + 0 + 5) / 3.
        assert!((mean_nn_distance(&line(&[0.0, 0.0, 5.0])).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(mean_nn_distance(&line(&[1.0])).is_err());
    }
}
