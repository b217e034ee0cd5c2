//! Random straight lines through the bounding sphere.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingSphere, Point, PointCloud, RigidTransform};

/// A line materialized as a segment between two endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub a: Point,
    pub b: Point,
}

impl Chord {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn direction(&self) -> Point {
        (self.b - self.a) / self.length()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self::new(t.apply(&self.a), t.apply(&self.b))
    }

    /// Distance from `p` to the infinite line through the chord.
    pub fn line_distance(&self, p: &Point) -> f64 {
        let dir = self.direction();
        let rel = p - self.a;
        (rel - dir * rel.dot(&dir)).norm()
    }
}

/// Line sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Two independent uniform points on the bounding sphere.
    #[default]
    SphereChord,
    /// Uniform point in the sphere's bounding box plus a uniform direction.
    BoxPointDirection,
    /// One perturbed point from each cloud, joined and extended to the sphere.
    CloudPairPerturbed,
}

/// Default perturbation radius for [`SamplerKind::CloudPairPerturbed`], as a
/// fraction of the sphere radius.
pub const DEFAULT_PAIR_PERTURBATION: f64 = 0.05;

const MAX_RETRIES: usize = 100;

/// Point on the sphere at parameters `u ∈ [-1, 1]`, `alpha ∈ [0, 2π)`.
pub fn sphere_point_at(sphere: &BoundingSphere, u: f64, alpha: f64) -> Point {
    let ring = (1.0 - u * u).max(0.0).sqrt();
    sphere.center
        + Point::new(
            sphere.radius * ring * alpha.cos(),
            sphere.radius * ring * alpha.sin(),
            sphere.radius * u,
        )
}

/// Uniform point on the sphere, drawn by sampling `u` and `alpha` uniformly.
pub fn sample_sphere_point<R: Rng + ?Sized>(sphere: &BoundingSphere, rng: &mut R) -> Point {
    let u = rng.gen_range(-1.0..=1.0);
    let alpha = rng.gen_range(0.0..TAU);
    sphere_point_at(sphere, u, alpha)
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let unit = BoundingSphere {
        center: Point::zeros(),
        radius: 1.0,
    };
    sample_sphere_point(&unit, rng)
}

fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    loop {
        let p = Point::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if p.norm_squared() <= 1.0 {
            return p * radius;
        }
    }
}

/// Where the line through `p` along unit `dir` crosses the sphere, if it does.
fn clip_to_sphere(sphere: &BoundingSphere, p: &Point, dir: &Point) -> Option<Chord> {
    let rel = p - sphere.center;
    let b = rel.dot(dir);
    let c = rel.norm_squared() - sphere.radius * sphere.radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(Chord::new(p + dir * (-b - root), p + dir * (-b + root)))
}

/// Options for [`sample_chords`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordSampler {
    pub kind: SamplerKind,
    /// Perturbation ball radius for `CloudPairPerturbed`, relative to the sphere radius.
    pub pair_perturbation: f64,
}

impl Default for ChordSampler {
    fn default() -> Self {
        Self {
            kind: SamplerKind::SphereChord,
            pair_perturbation: DEFAULT_PAIR_PERTURBATION,
        }
    }
}

impl From<SamplerKind> for ChordSampler {
    fn from(kind: SamplerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }
}

/// Draw `count` chords. `clouds` is only consulted by `CloudPairPerturbed`.
pub fn sample_chords<R: Rng + ?Sized>(
    sphere: &BoundingSphere,
    count: usize,
    sampler: ChordSampler,
    clouds: (&PointCloud, &PointCloud),
    rng: &mut R,
) -> Result<Vec<Chord>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "chord count must be at least 1".into(),
        ));
    }
    if sampler.kind == SamplerKind::CloudPairPerturbed
        && (clouds.0.is_empty() || clouds.1.is_empty())
    {
        return Err(Error::EmptyCloud);
    }
    let min_length = 1e-9 * sphere.radius;
    (0..count)
        .map(|_| {
            for _ in 0..MAX_RETRIES {
                let chord = match sampler.kind {
                    SamplerKind::SphereChord => Some(Chord::new(
                        sample_sphere_point(sphere, rng),
                        sample_sphere_point(sphere, rng),
                    )),
                    SamplerKind::BoxPointDirection => {
                        let r = sphere.radius;
                        let p = sphere.center
                            + Point::new(
                                rng.gen_range(-r..=r),
                                rng.gen_range(-r..=r),
                                rng.gen_range(-r..=r),
                            );
                        let dir = unit_direction(rng);
                        // Far enough to cover the sphere from any box corner.
                        let reach = (1.0 + 3f64.sqrt()) * r;
                        Some(Chord::new(p - dir * reach, p + dir * reach))
                    }
                    SamplerKind::CloudPairPerturbed => {
                        let spread = sampler.pair_perturbation * sphere.radius;
                        let (s, t) = clouds;
                        let p =
                            s.points()[rng.gen_range(0..s.len())] + uniform_in_ball(rng, spread);
                        let q =
                            t.points()[rng.gen_range(0..t.len())] + uniform_in_ball(rng, spread);
                        let d = q - p;
                        let len = d.norm();
                        if len > min_length {
                            clip_to_sphere(sphere, &p, &(d / len))
                        } else {
                            None
                        }
                    }
                };
                if let Some(chord) = chord {
                    if chord.length() > min_length {
                        return Ok(chord);
                    }
                }
            }
            Err(Error::DegenerateChord(MAX_RETRIES))
        })
        .collect()
}
