//! Neighborhood statistics and normal estimation.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};
use crate::spatial::KdTree;

/// `k` nearest neighbors of every point (self excluded), as original indices.
pub fn neighbor_table(cloud: &PointCloud, index: &KdTree, k: usize) -> Vec<Vec<usize>> {
    cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .knn_excluding(p, k, Some(i))
                .into_iter()
                .map(|n| n.index)
                .collect()
        })
        .collect()
}

/// Mean over all points of the mean distance to their `k` nearest neighbors.
pub fn knn_stats(cloud: &PointCloud, k: usize) -> Result<f64> {
    knn_stats_with(cloud, &KdTree::new(cloud), k)
}

pub fn knn_stats_with(cloud: &PointCloud, index: &KdTree, k: usize) -> Result<f64> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::TooFewPoints { points: n, k });
    }
    let total: f64 = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let ns = index.knn_excluding(p, k, Some(i));
            ns.iter().map(|nb| nb.distance).sum::<f64>() / k as f64
        })
        .sum();
    Ok(total / n as f64)
}

pub const NORMAL_NEIGHBORS: usize = 10;

/// PCA normals over the `NORMAL_NEIGHBORS` nearest neighbors, each oriented
/// away from the cloud centroid.
pub fn estimate_normals(cloud: &PointCloud) -> Result<Vec<Point>> {
    cloud.ensure_non_empty()?;
    let index = KdTree::new(cloud);
    let centroid = cloud.centroid().unwrap_or_default();
    let normals = cloud
        .points()
        .iter()
        .map(|p| {
            let ns = index.knn(p, NORMAL_NEIGHBORS + 1);
            let pts: Vec<Point> = ns.iter().map(|n| cloud.points()[n.index]).collect();
            let mean = pts.iter().fold(Point::zeros(), |a, q| a + q) / pts.len() as f64;
            let cov = pts.iter().fold(Matrix3::zeros(), |a, q| {
                let d = q - mean;
                a + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let mut normal: Point = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            if normal.norm() == 0.0 {
                normal = Point::z();
            }
            normal.normalize_mut();
            if normal.dot(&(p - centroid)) < 0.0 {
                normal = -normal;
            }
            normal
        })
        .collect();
    Ok(normals)
}
