//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here works in world coordinates with linear scans: no kd-tree,
//! no neighbor table, no body-frame tricks.

#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use raylign::intersection::{CombinationWeights, IntersectionMode, IntersectionParams};
use raylign::{Chord, PointCloud, RigidTransform};

pub type P = Vector3<f64>;

pub fn random_unit<R: Rng>(rng: &mut R) -> P {
    loop {
        let v = P::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_transform<R: Rng>(rng: &mut R, max_angle: f64, max_shift: f64) -> RigidTransform {
    let axis = random_unit(rng);
    let angle = rng.gen_range(0.0..max_angle);
    let mut t = RigidTransform::from_axis_angle(&axis, angle);
    t.translation = P::new(
        rng.gen_range(-max_shift..=max_shift),
        rng.gen_range(-max_shift..=max_shift),
        rng.gen_range(-max_shift..=max_shift),
    );
    t
}

/// Points scattered near a random plane through the origin, which gives
/// chords something surface-like to cross.
pub fn sheet_cloud<R: Rng>(rng: &mut R, n: usize, thickness: f64) -> PointCloud {
    let normal = random_unit(rng);
    let u = normal.cross(&random_unit(rng)).normalize();
    let v = normal.cross(&u);
    PointCloud::new(
        (0..n)
            .map(|_| {
                u * rng.gen_range(-1.0..1.0)
                    + v * rng.gen_range(-1.0..1.0)
                    + normal * rng.gen_range(-thickness..=thickness)
            })
            .collect(),
    )
}

pub fn line_distance(chord: &Chord, p: &P) -> f64 {
    let d = (chord.b - chord.a) / (chord.b - chord.a).norm();
    let rel = p - chord.a;
    (rel - d * rel.dot(&d)).norm()
}

pub fn param(chord: &Chord, p: &P) -> f64 {
    let d = (chord.b - chord.a) / (chord.b - chord.a).norm();
    (p - chord.a).dot(&d)
}

pub fn brute_candidates(chord: &Chord, points: &[P], delta: f64) -> Vec<usize> {
    let len = (chord.b - chord.a).norm();
    (0..points.len())
        .filter(|&i| {
            let s = param(chord, &points[i]);
            line_distance(chord, &points[i]) <= delta && (0.0..=len).contains(&s)
        })
        .collect()
}

/// The `k` nearest other points of `i`, nearest first, ties to smaller index.
pub fn brute_knn(points: &[P], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| ((points[j] - points[i]).norm_squared(), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Soft intersections of `chord` with world-frame `points`.
pub fn brute_intersections(chord: &Chord, points: &[P], params: &IntersectionParams) -> Vec<P> {
    let cands = brute_candidates(chord, points, params.delta);
    let mut out: Vec<P> = Vec::new();
    for &c in &cands {
        if params.mode == IntersectionMode::AllCandidates {
            out.push(points[c]);
            continue;
        }
        let nn = brute_knn(points, c, params.k);
        if nn.len() < params.k || !nn.iter().all(|j| cands.contains(j)) {
            continue;
        }
        let mut group = vec![c];
        group.extend(nn);
        let weights: Vec<f64> = group
            .iter()
            .map(|&j| {
                let d = line_distance(chord, &points[j]);
                match params.weights {
                    CombinationWeights::LineDistance => d,
                    CombinationWeights::InverseLineDistance => 1.0 / (d + 1e-12 * params.delta),
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let point = if total > 0.0 {
            group
                .iter()
                .zip(&weights)
                .map(|(&j, &w)| points[j] * w)
                .sum::<P>()
                / total
        } else {
            group.iter().map(|&j| points[j]).sum::<P>() / group.len() as f64
        };
        out.push(point);
    }
    out
}

pub fn nearest(p: &P, set: &[P]) -> P {
    let mut best = (f64::INFINITY, set[0]);
    for q in set {
        let d = (p - q).norm_squared();
        if d < best.0 {
            best = (d, *q);
        }
    }
    best.1
}

pub struct OracleLoss {
    pub value: f64,
    pub lines_used: usize,
    pub d_med: f64,
}

/// The line metric evaluated directly: transform the source, intersect each
/// chord with both clouds, match along the line, Welsch-penalize.
pub fn brute_line_loss(
    transform: &RigidTransform,
    source: &[P],
    target: &[P],
    chords: &[Chord],
    nu0: f64,
    params: &IntersectionParams,
) -> Option<OracleLoss> {
    let moved: Vec<P> = source
        .iter()
        .map(|p| transform.rotation * p + transform.translation)
        .collect();
    // (line weight, matched distances) per surviving chord
    let mut lines: Vec<(f64, Vec<f64>)> = Vec::new();
    for chord in chords {
        let s = brute_intersections(chord, &moved, params);
        let t = brute_intersections(chord, target, params);
        if s.is_empty() || t.is_empty() {
            continue;
        }
        let w = (-((s.len() as f64 - t.len() as f64) / 2.0).abs()).exp();
        let mut dists: Vec<f64> = s.iter().map(|x| (x - nearest(x, &t)).norm()).collect();
        dists.extend(t.iter().map(|y| (y - nearest(y, &s)).norm()));
        lines.push((w, dists));
    }
    if lines.is_empty() {
        return None;
    }
    let mut all: Vec<f64> = lines.iter().flat_map(|l| l.1.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let m = all.len();
    let d_med = if m % 2 == 1 {
        all[m / 2]
    } else {
        0.5 * (all[m / 2 - 1] + all[m / 2])
    };
    let nu = (nu0 * d_med).max(1e-12);
    let psi = |x: f64| 1.0 - (-x * x / (2.0 * nu * nu)).exp();
    let total: f64 = lines
        .iter()
        .map(|(w, d)| w * d.iter().map(|&x| psi(x)).sum::<f64>())
        .sum();
    Some(OracleLoss {
        value: total / lines.len() as f64,
        lines_used: lines.len(),
        d_med,
    })
}

/// Bidirectional closest-point sum normalized by `m + n`.
pub fn brute_chamfer(transform: &RigidTransform, source: &[P], target: &[P]) -> f64 {
    let moved: Vec<P> = source
        .iter()
        .map(|p| transform.rotation * p + transform.translation)
        .collect();
    let mut total = 0.0;
    for x in &moved {
        total += (x - nearest(x, target)).norm_squared();
    }
    for y in target {
        total += (y - nearest(y, &moved)).norm_squared();
    }
    total / (moved.len() + target.len()) as f64
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
