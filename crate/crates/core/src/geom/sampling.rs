use super::{sq_dist, PointSet};
use crate::error::{Error, Result};

/// Greedy max-min farthest point sampling.
///
/// The first pick is `start`; each later pick maximizes the distance to the
/// already selected set, ties going to the lower index. Once only
/// duplicates remain, unselected duplicates are still picked before any
/// index repeats (no index is ever returned twice).
pub fn farthest_point_sample(points: &PointSet, m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::InsufficientPoints {
            needed: m.max(1),
            available: n,
        });
    }
    if start >= n {
        return Err(Error::IndexOutOfRange {
            index: start,
            len: n,
        });
    }
    let mut picked = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut cur = start;
    loop {
        picked.push(cur);
        taken[cur] = true;
        if picked.len() == m {
            break;
        }
        let c = points.point(cur);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let d = sq_dist(c, points.point(j));
            if d < min_d[j] {
                min_d[j] = d;
            }
            if best.is_none_or(|(_, bd)| min_d[j] > bd) {
                best = Some((j, min_d[j]));
            }
        }
        cur = best.expect("m <= n leaves an unselected point").0;
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct greedy re-implementation over a full distance matrix.
    fn oracle(p: &PointSet, m: usize, start: usize) -> Vec<usize> {
        let n = p.len();
        let dist: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        p.point(i)
                            .iter()
                            .zip(p.point(j))
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let mut sel = vec![start];
        while sel.len() < m {
            let mut best = (usize::MAX, -1.0);
            for j in (0..n).filter(|j| !sel.contains(j)) {
                let d = sel
                    .iter()
                    .map(|&s| dist[s][j])
                    .fold(f64::INFINITY, f64::min);
                if d > best.1 {
                    best = (j, d);
                }
            }
            sel.push(best.0);
        }
        sel
    }

    #[test]
    fn single_pick_is_start() {
        let p = PointSet::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(farthest_point_sample(&p, 1, 2).unwrap(), vec![2]);
    }

    #[test]
    fn opposite_corner() {
        let p = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(farthest_point_sample(&p, 2, 0).unwrap(), vec![0, 3]);
    }

    #[test]
    fn matches_greedy_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PointSet::new(3, (0..150).map(|_| rng.random::<f64>()).collect()).unwrap();
        assert_eq!(farthest_point_sample(&p, 10, 0).unwrap(), oracle(&p, 10, 0));
    }

    #[test]
    fn duplicates_are_taken_last() {
        let p = PointSet::new(2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let picks = farthest_point_sample(&p, 4, 0).unwrap();
        assert_eq!(&picks[..2], &[0, 2]);
        let mut sorted = picks.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_is_an_error() {
        let p = PointSet::new(2, vec![0.0, 0.0]).unwrap();
        assert!(farthest_point_sample(&p, 2, 0).is_err());
        assert!(farthest_point_sample(&p, 1, 1).is_err());
    }
}
