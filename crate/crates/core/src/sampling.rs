//! Farthest point sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::PointCloud;

/// Indices chosen by greedy max-min sampling, in selection order.
///
/// The first index is drawn uniformly using `seed`; each following index
/// maximizes the distance to the already chosen set (ties go to the smaller
/// index). Returns `min(count, n)` indices.
pub fn farthest_point_indices(cloud: &PointCloud, count: usize, seed: u64) -> Vec<usize> {
    let points = cloud.points();
    let n = points.len();
    let count = count.min(n);
    if count == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);
    farthest_point_indices_from(cloud, count, first)
}

/// Farthest point sampling starting from a fixed index.
pub fn farthest_point_indices_from(cloud: &PointCloud, count: usize, first: usize) -> Vec<usize> {
    let points = cloud.points();
    let n = points.len();
    let count = count.min(n);
    let mut chosen = Vec::with_capacity(count);
    if count == 0 {
        return chosen;
    }
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = first;
    loop {
        chosen.push(current);
        if chosen.len() == count {
            break;
        }
        min_d2[current] = f64::NEG_INFINITY;
        let anchor = points[current];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            if min_d2[i] == f64::NEG_INFINITY {
                continue;
            }
            let d2 = (p - anchor).norm_squared();
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if min_d2[i] > best.0 {
                best = (min_d2[i], i);
            }
        }
        current = best.1;
    }
    chosen
}

/// Farthest point subsample of `cloud` (normals carried along).
pub fn farthest_point_sample(cloud: &PointCloud, count: usize, seed: u64) -> PointCloud {
    cloud.select(&farthest_point_indices(cloud, count, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn line(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect())
    }

    #[test]
    fn whole_cloud_in_fps_order() {
        let c = line(11);
        let mut idx = farthest_point_indices(&c, 11, 3);
        assert_eq!(idx.len(), 11);
        let first = idx[0];
        assert_eq!(idx, farthest_point_indices_from(&c, 100, first));
        idx.sort();
        assert_eq!(idx, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn single_point_is_seeded_choice() {
        let c = line(11);
        let a = farthest_point_indices(&c, 1, 99);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(a, vec![rng.gen_range(0..11)]);
    }

    #[test]
    fn second_pick_is_an_extreme() {
        let c = line(11);
        let idx = farthest_point_indices_from(&c, 2, 5);
        // Exhaustive max-min check over every candidate second point.
        let best = (0..11).map(|i| (i as f64 - 5.0).abs()).fold(0.0, f64::max);
        assert_eq!((idx[1] as f64 - 5.0).abs(), best);
        assert!(idx[1] == 0 || idx[1] == 10);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = PointCloud::new(
            (0..200)
                .map(|i| {
                    let t = i as f64 * 0.37;
                    Vector3::new(t.sin(), t.cos(), (t * 0.3).sin())
                })
                .collect(),
        );
        assert_eq!(
            farthest_point_indices(&c, 50, 1),
            farthest_point_indices(&c, 50, 1)
        );
    }
}
