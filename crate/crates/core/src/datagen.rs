//! Synthetic benchmark pairs: unit scaling, partial-view crops, random
//! ground-truth motions and optional corruption.

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, RigidTransform};
use crate::lines::sphere_point_at;
use crate::sampling::{farthest_point_indices, farthest_point_sample};

/// Affine record of [`unit_scale`]: `scaled = (p − center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub center: Point,
    pub scale: f64,
}

impl ScaleRecord {
    pub fn forward(&self, p: &Point) -> Point {
        (p - self.center) / self.scale
    }

    pub fn inverse(&self, p: &Point) -> Point {
        p * self.scale + self.center
    }
}

/// Center the bounding box at the origin and fit it into `[-1, 1]³`.
pub fn unit_scale(cloud: &PointCloud) -> Result<(PointCloud, ScaleRecord)> {
    let (lo, hi) = cloud.aabb().ok_or(Error::EmptyCloud)?;
    let scale = (hi - lo).max() / 2.0;
    if !(scale > 0.0) {
        return Err(Error::DegenerateCloud("zero extent"));
    }
    let record = ScaleRecord {
        center: (lo + hi) / 2.0,
        scale,
    };
    let mut out = cloud.clone();
    for p in out.points_mut() {
        *p = record.forward(p);
    }
    Ok((out, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropKind {
    #[default]
    None,
    /// Source and target keep opposite sides along a random direction.
    HalfSpace,
    /// Source and target keep opposite angular sectors around a random axis.
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSpec {
    pub rotation_max_deg: f64,
    pub translation_range: f64,
    pub crop: CropKind,
    /// Fraction of each cropped cloud shared with the other, in `[0, 1]`.
    pub overlap: f64,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub points: usize,
    pub seed: u64,
}

impl Default for PairSpec {
    fn default() -> Self {
        Self {
            rotation_max_deg: 45.0,
            translation_range: 0.2,
            crop: CropKind::None,
            overlap: 1.0,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            points: 1024,
            seed: 0,
        }
    }
}

impl PairSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.rotation_max_deg >= 0.0) || !(self.translation_range >= 0.0) {
            return bad("rotation and translation ranges must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        if self.points == 0 {
            return bad("points must be positive");
        }
        Ok(())
    }
}

/// ZYX Euler rotation `Rz(yaw) · Ry(pitch) · Rx(roll)`, angles in radians.
pub fn euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sz, cz) = yaw.sin_cos();
    let (sy, cy) = pitch.sin_cos();
    let (sx, cx) = roll.sin_cos();
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    rz * ry * rx
}

/// Ground-truth motion: three Euler angles in `[0, rotation_max_deg]` and
/// translation components in `[-translation_range, translation_range]`.
pub fn random_transform<R: Rng + ?Sized>(spec: &PairSpec, rng: &mut R) -> RigidTransform {
    let max = spec.rotation_max_deg.to_radians();
    let yaw = rng.gen_range(0.0..=max);
    let pitch = rng.gen_range(0.0..=max);
    let roll = rng.gen_range(0.0..=max);
    let r = spec.translation_range;
    let t = Vector3::new(
        rng.gen_range(-r..=r),
        rng.gen_range(-r..=r),
        rng.gen_range(-r..=r),
    );
    RigidTransform::new(euler_zyx(yaw, pitch, roll), t)
}

/// A generated registration problem: `gt` maps `source` onto `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPair {
    pub source: PointCloud,
    pub target: PointCloud,
    pub gt: RigidTransform,
    pub spec: PairSpec,
    /// Crop direction in the scaled base frame.
    pub crop_direction: Point,
    /// Source indices replaced by uniform outliers, ascending.
    pub outlier_indices: Vec<usize>,
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let unit = crate::geometry::BoundingSphere {
        center: Point::zeros(),
        radius: 1.0,
    };
    sphere_point_at(
        &unit,
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(0.0..std::f64::consts::TAU),
    )
}

/// Source and target index sets for a crop of `cloud` along `direction`.
///
/// Each side keeps a fraction `1 / (2 − overlap)` of the points ranked by a
/// directional score, so that `overlap` of each side is shared.
fn crop_indices(
    cloud: &PointCloud,
    crop: CropKind,
    overlap: f64,
    direction: &Point,
) -> (Vec<usize>, Vec<usize>) {
    let n = cloud.len();
    let all: Vec<usize> = (0..n).collect();
    let scores: Vec<f64> = match crop {
        CropKind::None => return (all.clone(), all),
        CropKind::HalfSpace => cloud.points().iter().map(|p| p.dot(direction)).collect(),
        CropKind::Cone => {
            let c = cloud.centroid().unwrap_or_default();
            cloud
                .points()
                .iter()
                .map(|p| {
                    let d = p - c;
                    let norm = d.norm();
                    if norm > 0.0 {
                        (d.dot(direction) / norm).clamp(-1.0, 1.0).acos()
                    } else {
                        std::f64::consts::FRAC_PI_2
                    }
                })
                .collect()
        }
    };
    let keep = ((n as f64) / (2.0 - overlap)).round() as usize;
    let mut order = all;
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut low: Vec<usize> = order[..keep].to_vec();
    let mut high: Vec<usize> = order[n - keep..].to_vec();
    low.sort_unstable();
    high.sort_unstable();
    (low, high)
}

/// Build a pair from `base`: scale, crop, subsample, move and corrupt.
pub fn make_pair(base: &PointCloud, spec: &PairSpec) -> Result<BenchmarkPair> {
    spec.validate()?;
    if base.len() < spec.points {
        return Err(Error::TooFewPoints {
            points: base.len(),
            k: spec.points,
        });
    }
    let (scaled, _) = unit_scale(base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gt = random_transform(spec, &mut rng);
    let crop_direction = random_unit(&mut rng);
    let fps_seed: u64 = rng.gen();

    let (source_idx, target_idx) = crop_indices(&scaled, spec.crop, spec.overlap, &crop_direction);
    let kept = source_idx.len().min(target_idx.len());
    if 2 * kept < spec.points {
        return Err(Error::OverlapInfeasible {
            kept,
            requested: spec.points,
        });
    }
    let source_view = farthest_point_sample(&scaled.select(&source_idx), spec.points, fps_seed);
    let target = farthest_point_sample(&scaled.select(&target_idx), spec.points, fps_seed);

    let mut source = source_view.transformed(&gt.inverse());
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for p in source.points_mut() {
            *p += Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        }
    }
    let outliers = (spec.outlier_fraction * source.len() as f64).round() as usize;
    let mut outlier_indices = sample_indices(&mut rng, source.len(), outliers).into_vec();
    outlier_indices.sort_unstable();
    for &i in &outlier_indices {
        source.points_mut()[i] = Vector3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
    }

    Ok(BenchmarkPair {
        source,
        target,
        gt,
        spec: spec.clone(),
        crop_direction,
        outlier_indices,
    })
}

struct Ellipsoid {
    center: Point,
    radii: Vector3<f64>,
    rotation: Matrix3<f64>,
}

impl Ellipsoid {
    fn new(center: [f64; 3], radii: [f64; 3], tilt_deg: [f64; 3]) -> Self {
        Self {
            center: Vector3::from(center),
            radii: Vector3::from(radii),
            rotation: euler_zyx(
                tilt_deg[2].to_radians(),
                tilt_deg[1].to_radians(),
                tilt_deg[0].to_radians(),
            ),
        }
    }

    fn contains_strictly(&self, p: &Point) -> bool {
        let local = self.rotation.transpose() * (p - self.center);
        local.component_div(&self.radii).norm_squared() < 1.0 - 1e-9
    }

    /// Approximate surface area (Knud Thomsen).
    fn area(&self) -> f64 {
        let q = 1.6075;
        let (a, b, c) = (
            self.radii.x.powf(q),
            self.radii.y.powf(q),
            self.radii.z.powf(q),
        );
        4.0 * std::f64::consts::PI * ((a * b + a * c + b * c) / 3.0).powf(1.0 / q)
    }

    fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (a, b, c) = (self.radii.x, self.radii.y, self.radii.z);
        let bound = (b * c).max(a * c).max(a * b);
        loop {
            let n = random_unit(rng);
            let density = Vector3::new(b * c * n.x, a * c * n.y, a * b * n.z).norm();
            if rng.gen_range(0.0..bound) <= density {
                return self.center + self.rotation * n.component_mul(&self.radii);
            }
        }
    }
}

/// Dense surface samples of an asymmetric figure built from ellipsoids
/// (torso, head, limbs, and a few bumps), with hidden interior samples
/// removed. Roughly human-sized proportions, z up.
pub fn mannequin(samples: usize, seed: u64) -> PointCloud {
    let parts = [
        Ellipsoid::new([0.0, 0.0, 0.0], [0.34, 0.2, 0.55], [0.0, 0.0, 0.0]),
        Ellipsoid::new([0.0, 0.02, 0.78], [0.14, 0.16, 0.19], [0.0, 0.0, 10.0]),
        Ellipsoid::new([0.0, 0.17, 0.78], [0.03, 0.06, 0.04], [0.0, 0.0, 0.0]),
        Ellipsoid::new([0.52, 0.0, 0.62], [0.08, 0.08, 0.38], [0.0, 40.0, 0.0]),
        Ellipsoid::new([-0.42, 0.08, 0.05], [0.08, 0.08, 0.4], [15.0, -12.0, 0.0]),
        Ellipsoid::new([0.17, 0.0, -0.95], [0.11, 0.11, 0.52], [0.0, -5.0, 0.0]),
        Ellipsoid::new([-0.2, 0.12, -0.9], [0.11, 0.11, 0.52], [-18.0, 6.0, 0.0]),
        Ellipsoid::new([0.08, -0.22, 0.18], [0.2, 0.1, 0.26], [0.0, 0.0, 0.0]),
        Ellipsoid::new([0.2, 0.2, -1.45], [0.08, 0.16, 0.05], [0.0, 0.0, 0.0]),
    ];
    let areas: Vec<f64> = parts.iter().map(Ellipsoid::area).collect();
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let mut pick = rng.gen_range(0.0..total);
        let mut part = 0;
        while pick >= areas[part] && part + 1 < parts.len() {
            pick -= areas[part];
            part += 1;
        }
        let p = parts[part].sample_surface(&mut rng);
        if !parts
            .iter()
            .enumerate()
            .any(|(j, e)| j != part && e.contains_strictly(&p))
        {
            points.push(p);
        }
    }
    PointCloud::new(points)
}

/// Unit-scaled farthest-point subsample of [`mannequin`].
pub fn mannequin_base(points: usize, seed: u64) -> PointCloud {
    let dense = mannequin(points.max(1) * 16, seed);
    let picked = farthest_point_indices(&dense, points, seed);
    unit_scale(&dense.select(&picked))
        .map(|(c, _)| c)
        .unwrap_or(dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_cases() {
        let c = PointCloud::new(vec![
            Vector3::new(-1.0, 0.2, 0.1),
            Vector3::new(1.0, 0.4, 0.3),
        ]);
        let (s, rec) = unit_scale(&c).unwrap();
        assert_eq!(rec.scale, 1.0);
        assert!((s.points()[0] - Vector3::new(-1.0, -0.1, -0.1)).norm() < 1e-15);

        let cube = PointCloud::new(vec![
            Vector3::zeros(),
            Vector3::repeat(10.0),
            Vector3::new(10.0, 0.0, 5.0),
        ]);
        let (s, rec) = unit_scale(&cube).unwrap();
        assert_eq!(s.points()[0], Vector3::repeat(-1.0));
        assert_eq!(s.points()[1], Vector3::repeat(1.0));
        assert_eq!(s.points()[2], Vector3::new(1.0, -1.0, 0.0));
        assert!((rec.inverse(&s.points()[2]) - cube.points()[2]).norm() < 1e-12);

        let single = PointCloud::new(vec![Vector3::x()]);
        assert!(unit_scale(&single).is_err());
    }

    #[test]
    fn zero_ranges_give_identity() {
        let spec = PairSpec {
            rotation_max_deg: 0.0,
            translation_range: 0.0,
            ..Default::default()
        };
        let t = random_transform(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(t, RigidTransform::identity());
    }

    #[test]
    fn euler_matches_axis_products() {
        let a = 45f64.to_radians();
        let r = euler_zyx(a, a, a);
        let z = RigidTransform::from_axis_angle(&Vector3::z(), a).rotation;
        let y = RigidTransform::from_axis_angle(&Vector3::y(), a).rotation;
        let x = RigidTransform::from_axis_angle(&Vector3::x(), a).rotation;
        assert!((r - z * y * x).abs().max() < 1e-15);
        // Composite angle from the closed-form trace of the product.
        let (s, c) = a.sin_cos();
        let trace = c * c + (s * s * s + c * c) + c * c;
        let expected = ((trace - 1.0) / 2.0).acos().to_degrees();
        assert!((crate::eval::rotation_angle(&r) - expected).abs() < 1e-9);
    }

    #[test]
    fn uncropped_pair_reproduces_target() {
        let base = mannequin_base(300, 4);
        let spec = PairSpec {
            points: 200,
            seed: 9,
            ..Default::default()
        };
        let pair = make_pair(&base, &spec).unwrap();
        assert_eq!(pair.source.len(), 200);
        for (s, t) in pair.source.points().iter().zip(pair.target.points()) {
            assert!((pair.gt.apply(s) - t).norm() < 1e-12);
        }
        assert_eq!(make_pair(&base, &spec).unwrap(), pair);
    }

    #[test]
    fn outlier_count_is_exact() {
        let base = mannequin_base(1000, 2);
        let spec = PairSpec {
            points: 1000,
            outlier_fraction: 0.1,
            seed: 3,
            ..Default::default()
        };
        let pair = make_pair(&base, &spec).unwrap();
        assert_eq!(pair.outlier_indices.len(), 100);
    }

    #[test]
    fn half_space_overlap_ratio() {
        let base = mannequin_base(1024, 1);
        for seed in 0..5 {
            let spec = PairSpec {
                crop: CropKind::HalfSpace,
                overlap: 0.7,
                seed,
                ..Default::default()
            };
            let pair = make_pair(&base, &spec).unwrap();
            let dir = pair.crop_direction;
            let threshold = pair
                .target
                .points()
                .iter()
                .map(|p| p.dot(&dir))
                .fold(f64::INFINITY, f64::min);
            let moved = pair.source.transformed(&pair.gt);
            let close = moved
                .points()
                .iter()
                .filter(|p| p.dot(&dir) >= threshold)
                .count();
            let ratio = close as f64 / moved.len() as f64;
            assert!((0.6..=0.8).contains(&ratio), "seed {seed}: ratio {ratio}");
        }
    }

    #[test]
    fn infeasible_when_base_too_small() {
        let base = mannequin_base(100, 1);
        let spec = PairSpec {
            points: 200,
            ..Default::default()
        };
        assert!(make_pair(&base, &spec).is_err());
    }
}
