//! Point clouds, rigid transforms and their se(3) coordinates.

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Ordered list of 3D points with optional per-point unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Point>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<Point>, normals: Vec<Point>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::NormalsMismatch {
                points: points.len(),
                normals: normals.len(),
            });
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let norm = n.norm();
                if norm > 0.0 {
                    n / norm
                } else {
                    n
                }
            })
            .collect();
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Point]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Apply `transform` to every point (and rotate normals).
    pub fn transformed(&self, transform: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| transform.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| transform.rotation * n).collect()),
        }
    }

    /// Subset of the cloud in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
        }
    }

    pub fn points_mut(&mut self) -> &mut [Point] {
        &mut self.points
    }

    pub fn set_normals(&mut self, normals: Option<Vec<Point>>) -> Result<()> {
        if let Some(ns) = &normals {
            if ns.len() != self.points.len() {
                return Err(Error::NormalsMismatch {
                    points: self.points.len(),
                    normals: ns.len(),
                });
            }
        }
        self.normals = normals;
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty cloud.
    pub fn aabb(&self) -> Option<(Point, Point)> {
        aabb_of(self.points.iter())
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Point::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }
}

impl From<Vec<Point>> for PointCloud {
    fn from(points: Vec<Point>) -> Self {
        Self::new(points)
    }
}

pub(crate) fn aabb_of<'a>(mut points: impl Iterator<Item = &'a Point>) -> Option<(Point, Point)> {
    let first = points.next()?;
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

/// Rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Se3Params::new(axis.normalize() * angle, Vector3::zeros()).exp()
    }

    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// Project the rotation back onto SO(3) to shed accumulated roundoff.
    pub fn renormalized(&self) -> Self {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        Self::new(q.to_rotation_matrix().into_inner(), self.translation)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Orthonormality and determinant residuals within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.abs().max() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    pub fn log(&self) -> Result<Se3Params> {
        Se3Params::log(self)
    }
}

/// se(3) coordinates: axis-angle `omega` and translational part `v`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Se3Params {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

const SMALL_ANGLE: f64 = 1e-4;

#[inline]
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

impl Se3Params {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    /// Coordinates packed as `[omega, v]`.
    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
        )
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.v.x,
            self.v.y,
            self.v.z,
        )
    }

    /// Exponential map: Rodrigues rotation and left-Jacobian translation.
    pub fn exp(&self) -> RigidTransform {
        let theta2 = self.omega.norm_squared();
        let theta = theta2.sqrt();
        let w = hat(&self.omega);
        let w2 = w * w;
        let (a, b, c) = if theta < SMALL_ANGLE {
            (
                1.0 - theta2 / 6.0,
                0.5 - theta2 / 24.0,
                1.0 / 6.0 - theta2 / 120.0,
            )
        } else {
            let (s, co) = theta.sin_cos();
            (
                s / theta,
                (1.0 - co) / theta2,
                (theta - s) / (theta2 * theta),
            )
        };
        let rotation = Matrix3::identity() + w * a + w2 * b;
        let left_jacobian = Matrix3::identity() + w * b + w2 * c;
        RigidTransform::new(rotation, left_jacobian * self.v)
    }

    /// Logarithm map; fails when the rotation angle is within 1e-6 of pi.
    pub fn log(t: &RigidTransform) -> Result<Self> {
        let q = UnitQuaternion::from_matrix(&t.rotation);
        let (mut w, mut xyz) = (q.w, q.imag());
        if w < 0.0 {
            w = -w;
            xyz = -xyz;
        }
        let n = xyz.norm();
        let theta = 2.0 * n.atan2(w);
        if theta > std::f64::consts::PI - 1e-6 {
            return Err(Error::DegenerateRotation { angle: theta });
        }
        let omega = if n < 1e-12 {
            xyz * (2.0 / w)
        } else {
            xyz * (theta / n)
        };
        let wh = hat(&omega);
        let theta2 = theta * theta;
        let coeff = if theta < 1e-2 {
            1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
        } else {
            let half = 0.5 * theta;
            (1.0 - half / half.tan()) / theta2
        };
        let inv_left_jacobian = Matrix3::identity() - wh * 0.5 + wh * wh * coeff;
        Ok(Self::new(omega, inv_left_jacobian * t.translation))
    }
}

/// Sphere enclosing both clouds of a registration problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingSphere {
    pub center: Point,
    pub radius: f64,
}

impl BoundingSphere {
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        (p - self.center).norm() <= self.radius + tol
    }
}

pub const SPHERE_INFLATION: f64 = 1.05;
pub const MIN_SPHERE_RADIUS: f64 = 1e-12;

/// AABB-centered sphere covering the union of both clouds, inflated by 5%.
pub fn bounding_sphere(a: &PointCloud, b: &PointCloud) -> Result<BoundingSphere> {
    a.ensure_non_empty()?;
    b.ensure_non_empty()?;
    bounding_sphere_of(a.points().iter().chain(b.points()))
}

pub(crate) fn bounding_sphere_of<'a>(
    points: impl Iterator<Item = &'a Point> + Clone,
) -> Result<BoundingSphere> {
    let (lo, hi) = aabb_of(points.clone()).ok_or(Error::EmptyCloud)?;
    let center = (lo + hi) * 0.5;
    let radius = points.map(|p| (p - center).norm()).fold(0.0, f64::max);
    Ok(BoundingSphere {
        center,
        radius: (radius * SPHERE_INFLATION).max(MIN_SPHERE_RADIUS),
    })
}

/// Median of the Euclidean distances between paired points.
pub fn median_pair_distance(pairs: &[(Point, Point)]) -> Result<f64> {
    let distances: Vec<f64> = pairs.iter().map(|(a, b)| (a - b).norm()).collect();
    median(distances)
}

/// Median with the even-count convention of averaging the two middle values.
pub fn median(mut values: Vec<f64>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median of an empty list"));
    }
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}
