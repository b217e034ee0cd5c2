use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point, RigidTransform};

/// Closed-form minimizer of `Σ w ‖R x + t − y‖²` over rigid motions.
///
/// Weighted centroids and cross-covariance, then an SVD with the sign of the
/// last singular direction chosen so that `det R = +1`. Pairs with zero
/// weight contribute nothing; fewer than three positively weighted pairs is
/// an error.
pub fn weighted_procrustes(pairs: &[(Point, Point)], weights: &[f64]) -> Result<RigidTransform> {
    assert_eq!(pairs.len(), weights.len(), "one weight per pair");
    let active = weights.iter().filter(|&&w| w > 0.0).count();
    if active < 3 {
        return Err(Error::RankDeficient(active));
    }
    let mut total = 0.0;
    let mut mean_x = Vector3::zeros();
    let mut mean_y = Vector3::zeros();
    for (&(x, y), &w) in pairs.iter().zip(weights) {
        if w > 0.0 {
            total += w;
            mean_x += x * w;
            mean_y += y * w;
        }
    }
    mean_x /= total;
    mean_y /= total;
    let mut cov = Matrix3::zeros();
    for (&(x, y), &w) in pairs.iter().zip(weights) {
        if w > 0.0 {
            cov += (x - mean_x) * (y - mean_y).transpose() * w;
        }
    }
    let svd = cov.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let mut correction = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        correction[(2, 2)] = -1.0;
    }
    let rotation = v * correction * u.transpose();
    Ok(RigidTransform::new(rotation, mean_y - rotation * mean_x))
}

/// Unweighted [`weighted_procrustes`].
pub fn procrustes(pairs: &[(Point, Point)]) -> Result<RigidTransform> {
    weighted_procrustes(pairs, &vec![1.0; pairs.len()])
}

/// `Σ w ‖R x + t − y‖²`.
pub fn weighted_squared_error(
    transform: &RigidTransform,
    pairs: &[(Point, Point)],
    weights: &[f64],
) -> f64 {
    pairs
        .iter()
        .zip(weights)
        .map(|((x, y), w)| w * (transform.apply(x) - y).norm_squared())
        .sum()
}
