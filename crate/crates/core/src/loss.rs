//! Alignment objectives: the line-intersection metric and Chamfer baselines.
//!
//! Every objective is evaluated in two stages. The combinatorial stage
//! (chord intersections, closest-point matches, per-line weights and the
//! Welsch scale) runs at the current transform and is then frozen into a
//! [`FrozenObjective`]: a weighted sum of pair penalties whose source side
//! is a fixed body-frame point moved by the transform. Values and gradients
//! are taken from the frozen objective, so the analytic gradient is exact for
//! the per-iteration surrogate.

use nalgebra::{Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{median, Point, RigidTransform, Se3Params};
use crate::intersection::{intersect, IndexedCloud, IntersectionParams, IntersectionSet};
use crate::lines::Chord;

pub const DEFAULT_NU0: f64 = 0.5;
pub const NU_FLOOR: f64 = 1e-12;

/// Welsch's function `1 - exp(-x² / 2ν²)`.
#[inline]
pub fn welsch(x: f64, nu: f64) -> f64 {
    -(-(x * x) / (2.0 * nu * nu)).exp_m1()
}

/// Derivative of [`welsch`] with respect to `x`.
#[inline]
pub fn welsch_derivative(x: f64, nu: f64) -> f64 {
    x / (nu * nu) * (-(x * x) / (2.0 * nu * nu)).exp()
}

/// Welsch scale: user factor `nu0` and the effective `nu = nu0 · d_med`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelschParams {
    pub nu0: f64,
    pub nu: f64,
}

impl WelschParams {
    pub fn from_median(nu0: f64, d_med: f64) -> Self {
        Self {
            nu0,
            nu: (nu0 * d_med).max(NU_FLOOR),
        }
    }
}

/// Per-pair penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    SquaredL2,
    Welsch { nu: f64 },
}

impl Penalty {
    #[inline]
    fn eval(&self, d2: f64) -> f64 {
        match *self {
            Penalty::SquaredL2 => d2,
            Penalty::Welsch { nu } => -(-d2 / (2.0 * nu * nu)).exp_m1(),
        }
    }

    /// Derivative of the penalty with respect to the residual vector, as a
    /// multiple of the residual.
    #[inline]
    fn residual_scale(&self, d2: f64) -> f64 {
        match *self {
            Penalty::SquaredL2 => 2.0,
            Penalty::Welsch { nu } => (-d2 / (2.0 * nu * nu)).exp() / (nu * nu),
        }
    }
}

/// One matched pair with a fixed body-frame source point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    /// Source-side point before the transform is applied.
    pub body: Point,
    pub target: Point,
    pub weight: f64,
}

/// Objective with all combinatorial choices fixed.
#[derive(Debug, Clone)]
pub struct FrozenObjective {
    pub terms: Vec<PairTerm>,
    pub penalty: Penalty,
    /// Global normalization applied to the weighted sum.
    pub scale: f64,
}

/// A smooth function of the transform, differentiated with respect to a left
/// perturbation `exp(xi) · T` at `xi = 0`.
pub trait Objective {
    fn value(&self, transform: &RigidTransform) -> f64;
    fn value_and_gradient(&self, transform: &RigidTransform) -> (f64, Vector6<f64>);
}

impl Objective for FrozenObjective {
    fn value(&self, transform: &RigidTransform) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|t| {
                t.weight
                    * self
                        .penalty
                        .eval((transform.apply(&t.body) - t.target).norm_squared())
            })
            .sum();
        sum * self.scale
    }

    fn value_and_gradient(&self, transform: &RigidTransform) -> (f64, Vector6<f64>) {
        let mut value = 0.0;
        let mut grad_w = Vector3::zeros();
        let mut grad_v = Vector3::zeros();
        for t in &self.terms {
            let q = transform.apply(&t.body);
            let r = q - t.target;
            let d2 = r.norm_squared();
            value += t.weight * self.penalty.eval(d2);
            let g = r * (t.weight * self.penalty.residual_scale(d2));
            // d(exp(w)q)/dw = -[q]x, so the pullback of g is q x g.
            grad_w += q.cross(&g);
            grad_v += g;
        }
        let grad = Vector6::new(grad_w.x, grad_w.y, grad_w.z, grad_v.x, grad_v.y, grad_v.z);
        (value * self.scale, grad * self.scale)
    }
}

/// Result of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    /// Gradient with respect to `[omega, v]` of a left perturbation.
    pub gradient: Vector6<f64>,
    pub lines_used: usize,
    pub lines_skipped: usize,
    pub d_med: f64,
    pub nu: f64,
}

/// One chord that hit both clouds.
#[derive(Debug, Clone)]
pub struct LineTerm {
    pub chord: Chord,
    /// `exp(-|(|S| - |T|) / 2|)`.
    pub weight: f64,
    /// Source intersections in the source body frame.
    pub source: IntersectionSet,
    /// Target intersections.
    pub target: IntersectionSet,
    /// Source intersections moved by the current transform.
    pub source_world: Vec<Point>,
    /// Matched `(source item, target item)` pairs: source-to-target matches
    /// first, then target-to-source.
    pub pairs: Vec<(usize, usize)>,
}

/// Per-line count weight.
pub fn line_weight(source_count: usize, target_count: usize) -> f64 {
    let diff = source_count as f64 - target_count as f64;
    (-(diff / 2.0).abs()).exp()
}

fn nearest_index<'a>(p: &Point, candidates: impl Iterator<Item = &'a Point>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, q) in candidates.enumerate() {
        let d2 = (p - q).norm_squared();
        if d2 < best.0 {
            best = (d2, j);
        }
    }
    best.1
}

/// Intersect one chord with both clouds and match along it. `None` when
/// either intersection set is empty.
pub fn line_term(
    transform: &RigidTransform,
    inverse: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    chord: &Chord,
    params: &IntersectionParams,
) -> Option<LineTerm> {
    let target_set = intersect(chord, target, params);
    if target_set.is_empty() {
        return None;
    }
    let source_set = intersect(&chord.transformed(inverse), source, params);
    if source_set.is_empty() {
        return None;
    }
    let source_world: Vec<Point> = source_set.points().map(|p| transform.apply(p)).collect();
    let mut pairs = Vec::with_capacity(source_set.len() + target_set.len());
    for (i, x) in source_world.iter().enumerate() {
        pairs.push((i, nearest_index(x, target_set.points())));
    }
    for (j, y) in target_set.points().enumerate() {
        pairs.push((nearest_index(y, source_world.iter()), j));
    }
    Some(LineTerm {
        chord: *chord,
        weight: line_weight(source_set.len(), target_set.len()),
        source: source_set,
        target: target_set,
        source_world,
        pairs,
    })
}

/// Line terms for every chord, in chord order (`None` for skipped chords).
pub fn line_terms(
    transform: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    chords: &[Chord],
    params: &IntersectionParams,
) -> Vec<Option<LineTerm>> {
    let inverse = transform.inverse();
    chords
        .par_iter()
        .map(|c| line_term(transform, &inverse, source, target, c, params))
        .collect()
}

/// Frozen line-intersection loss plus its report at the freezing transform.
#[derive(Debug, Clone)]
pub struct FrozenLineLoss {
    pub objective: FrozenObjective,
    pub report: LossReport,
    pub lines: Vec<LineTerm>,
}

/// Evaluate the line metric at `transform` and freeze it.
///
/// `source` is indexed in its own frame; chords live in the target frame.
pub fn freeze_line_loss(
    transform: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    chords: &[Chord],
    nu0: f64,
    params: &IntersectionParams,
) -> Result<FrozenLineLoss> {
    params.validate()?;
    if source.points().is_empty() || target.points().is_empty() {
        return Err(Error::EmptyCloud);
    }
    if chords.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one chord is required".into(),
        ));
    }
    let lines: Vec<LineTerm> = line_terms(transform, source, target, chords, params)
        .into_iter()
        .flatten()
        .collect();
    if lines.is_empty() {
        return Err(Error::NoIntersections);
    }
    let mut distances = Vec::new();
    let mut terms = Vec::new();
    for line in &lines {
        for &(i, j) in &line.pairs {
            let y = line.target.items[j].point;
            distances.push((line.source_world[i] - y).norm());
            terms.push(PairTerm {
                body: line.source.items[i].point,
                target: y,
                weight: line.weight,
            });
        }
    }
    let d_med = median(distances)?;
    let welsch = WelschParams::from_median(nu0, d_med);
    let objective = FrozenObjective {
        terms,
        penalty: Penalty::Welsch { nu: welsch.nu },
        scale: 1.0 / lines.len() as f64,
    };
    let (value, gradient) = objective.value_and_gradient(transform);
    let report = LossReport {
        value,
        gradient,
        lines_used: lines.len(),
        lines_skipped: chords.len() - lines.len(),
        d_med,
        nu: welsch.nu,
    };
    Ok(FrozenLineLoss {
        objective,
        report,
        lines,
    })
}

/// The line-intersection loss and its gradient at `transform`.
pub fn line_loss(
    transform: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    chords: &[Chord],
    nu0: f64,
    params: &IntersectionParams,
) -> Result<LossReport> {
    freeze_line_loss(transform, source, target, chords, nu0, params).map(|f| f.report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChamferMetric {
    SquaredL2,
    Welsch,
}

/// Frozen bidirectional closest-point objective at `transform`.
pub fn freeze_chamfer(
    transform: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    metric: ChamferMetric,
    nu0: f64,
) -> Result<(FrozenObjective, LossReport)> {
    let (src, tgt) = (source.points(), target.points());
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let inverse = transform.inverse();
    let mut terms = Vec::with_capacity(src.len() + tgt.len());
    let forward: Vec<PairTerm> = src
        .par_iter()
        .map(|x| {
            let q = transform.apply(x);
            let nn = target.tree().nearest(&q).expect("non-empty target");
            PairTerm {
                body: *x,
                target: tgt[nn.index],
                weight: 1.0,
            }
        })
        .collect();
    let backward: Vec<PairTerm> = tgt
        .par_iter()
        .map(|y| {
            let nn = source
                .tree()
                .nearest(&inverse.apply(y))
                .expect("non-empty source");
            PairTerm {
                body: src[nn.index],
                target: *y,
                weight: 1.0,
            }
        })
        .collect();
    terms.extend(forward);
    terms.extend(backward);
    let distances: Vec<f64> = terms
        .iter()
        .map(|t| (transform.apply(&t.body) - t.target).norm())
        .collect();
    let d_med = median(distances)?;
    let (penalty, nu) = match metric {
        ChamferMetric::SquaredL2 => (Penalty::SquaredL2, 0.0),
        ChamferMetric::Welsch => {
            let nu = WelschParams::from_median(nu0, d_med).nu;
            (Penalty::Welsch { nu }, nu)
        }
    };
    let objective = FrozenObjective {
        terms,
        penalty,
        scale: 1.0 / (src.len() + tgt.len()) as f64,
    };
    let (value, gradient) = objective.value_and_gradient(transform);
    let report = LossReport {
        value,
        gradient,
        lines_used: 0,
        lines_skipped: 0,
        d_med,
        nu,
    };
    Ok((objective, report))
}

/// Chamfer objective (`SquaredL2`) or its Welsch variant, normalized by `m + n`.
pub fn chamfer_loss(
    transform: &RigidTransform,
    source: &IndexedCloud,
    target: &IndexedCloud,
    metric: ChamferMetric,
    nu0: f64,
) -> Result<LossReport> {
    freeze_chamfer(transform, source, target, metric, nu0).map(|(_, r)| r)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences over the six se(3) coordinates.
pub fn gradient_check<O: Objective + ?Sized>(
    objective: &O,
    transform: &RigidTransform,
    step: f64,
) -> f64 {
    let (_, analytic) = objective.value_and_gradient(transform);
    let numeric = numeric_gradient(objective, transform, step);
    (0..6)
        .map(|k| (analytic[k] - numeric[k]).abs() / numeric[k].abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Central-difference gradient under left perturbations.
pub fn numeric_gradient<O: Objective + ?Sized>(
    objective: &O,
    transform: &RigidTransform,
    step: f64,
) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    for k in 0..6 {
        let mut e = Vector6::zeros();
        e[k] = step;
        let plus = Se3Params::from_vector(&e).exp().compose(transform);
        let minus = Se3Params::from_vector(&(-e)).exp().compose(transform);
        out[k] = (objective.value(&plus) - objective.value(&minus)) / (2.0 * step);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::intersection::default_params;
    use std::f64::consts::E;

    #[test]
    fn welsch_values() {
        assert_eq!(welsch(0.0, 0.3), 0.0);
        assert!((welsch(0.3, 0.3) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((welsch(1.7, 1.7) - 0.393_469_340_287_366_6).abs() < 1e-12);
        assert!(welsch(30.0, 0.3) > 0.9999);
        assert!(welsch(1e6, 0.3) <= 1.0);
    }

    #[test]
    fn welsch_derivative_matches_difference() {
        let nu = 0.7;
        for x in [0.0, 0.1, 0.5, 1.3, 3.0] {
            let h = 1e-6;
            let fd = (welsch(x + h, nu) - welsch(x - h, nu)) / (2.0 * h);
            assert!((fd - welsch_derivative(x, nu)).abs() < 1e-8);
        }
    }

    #[test]
    fn count_weight() {
        assert!((line_weight(3, 1) - 1.0 / E).abs() < 1e-15);
        assert_eq!(line_weight(4, 4), 1.0);
        assert_eq!(line_weight(1, 3), line_weight(3, 1));
    }

    #[test]
    fn chamfer_single_pair() {
        let s = IndexedCloud::new(PointCloud::new(vec![Vector3::zeros()]), 1);
        let t = IndexedCloud::new(PointCloud::new(vec![Vector3::x()]), 1);
        let r = chamfer_loss(
            &RigidTransform::identity(),
            &s,
            &t,
            ChamferMetric::SquaredL2,
            0.5,
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        // Moving the source toward +x decreases the loss.
        assert!(r.gradient[3] < 0.0);
    }

    fn blob(n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 * 0.61;
                    let u = i as f64 * 0.23;
                    Vector3::new(t.sin() * u.cos(), t.cos() * u.cos(), u.sin() * 0.7)
                })
                .collect(),
        )
    }

    #[test]
    fn identical_clouds_give_zero() {
        let cloud = blob(300);
        let params = default_params(&cloud).unwrap();
        let s = IndexedCloud::new(cloud.clone(), 2);
        let t = IndexedCloud::new(cloud.clone(), 2);
        let sphere = crate::geometry::bounding_sphere(&cloud, &cloud).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let chords = crate::lines::sample_chords(
            &sphere,
            2000,
            Default::default(),
            (&cloud, &cloud),
            &mut rng,
        )
        .unwrap();
        let f =
            freeze_line_loss(&RigidTransform::identity(), &s, &t, &chords, 0.5, &params).unwrap();
        assert_eq!(f.report.value, 0.0);
        assert!(f.report.gradient.norm() < 1e-9);
        assert_eq!(f.report.lines_used + f.report.lines_skipped, 2000);
        assert!(f.lines.iter().all(|l| l.weight == 1.0));
    }

    #[test]
    fn all_chords_missing_is_an_error() {
        let cloud = blob(100);
        let params = default_params(&cloud).unwrap();
        let s = IndexedCloud::new(cloud.clone(), 2);
        let far = vec![Chord::new(
            Vector3::new(50.0, 50.0, 50.0),
            Vector3::new(51.0, 50.0, 50.0),
        )];
        assert!(matches!(
            line_loss(&RigidTransform::identity(), &s, &s, &far, 0.5, &params),
            Err(Error::NoIntersections)
        ));
    }
}
