//! Registration drivers.
//!
//! * [`solve_first_order`]: Adam on se(3) with a left-multiplicative update,
//!   for the line metric and both Chamfer baselines.
//! * [`solve_svd_surrogate`]: iteratively reweighted closed-form updates on
//!   the line-intersection correspondences.
//! * [`solve_icp`]: classic point-to-point ICP.

mod adam;
mod procrustes;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use procrustes::{procrustes, weighted_procrustes, weighted_squared_error};

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_sphere, BoundingSphere, Point, PointCloud, RigidTransform, Se3Params,
};
use crate::intersection::{
    params_with_k, CombinationWeights, IndexedCloud, IntersectionMode, IntersectionParams,
};
use crate::lines::{sample_chords, Chord, ChordSampler, SamplerKind, DEFAULT_PAIR_PERTURBATION};
use crate::loss::{
    freeze_chamfer, freeze_line_loss, welsch, ChamferMetric, FrozenLineLoss, Objective, DEFAULT_NU0,
};

/// Consecutive chord batches without any usable line before giving up.
pub const MAX_RESAMPLE_FAILURES: usize = 5;

/// Objective minimized by [`solve_first_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    LineLoss,
    Chamfer,
    ChamferWelsch,
}

/// Correspondence weight in the SVD surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateWeight {
    /// `exp(-d² / 2ν²) · w_l`, the majorizer weight of Welsch's function.
    #[default]
    Irls,
    /// `ψ_ν(d) · w_l`.
    WelschValue,
}

/// Which iterate a solver returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterateSelection {
    /// The iterate with the lowest recorded loss.
    Best,
    /// The iterate after the final step.
    #[default]
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub lines_per_iteration: usize,
    /// Stop when the norm of the se(3) step falls below this.
    pub convergence_tol: f64,
    /// Draw fresh chords every iteration; otherwise reuse the first batch.
    pub resample_lines: bool,
    /// Recompute the bounding sphere every iteration; otherwise keep the initial one.
    pub recompute_sphere: bool,
    pub seed: u64,
    pub nu0: f64,
    pub sampler: SamplerKind,
    /// Perturbation radius of the cloud-pair sampler relative to the sphere radius.
    pub pair_perturbation: f64,
    pub intersection_mode: IntersectionMode,
    pub combination_weights: CombinationWeights,
    pub neighbors: usize,
    /// Explicit cylinder radius; derived from the target's neighbor spacing when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub surrogate_weight: SurrogateWeight,
    pub selection: IterateSelection,
    /// Learning-rate schedule of the first-order solver.
    pub schedule: LearningRateSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            lines_per_iteration: 15000,
            convergence_tol: 1e-6,
            resample_lines: true,
            recompute_sphere: true,
            seed: 0,
            nu0: DEFAULT_NU0,
            sampler: SamplerKind::SphereChord,
            pair_perturbation: DEFAULT_PAIR_PERTURBATION,
            intersection_mode: IntersectionMode::ConvexCombination,
            combination_weights: CombinationWeights::LineDistance,
            neighbors: 2,
            delta: None,
            surrogate_weight: SurrogateWeight::Irls,
            selection: IterateSelection::Last,
            schedule: LearningRateSchedule::Cosine { floor: 0.0 },
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.lines_per_iteration < 1 {
            return bad("lines_per_iteration must be at least 1");
        }
        if !(self.nu0 > 0.0) {
            return bad("nu0 must be positive");
        }
        if self.neighbors < 1 {
            return bad("neighbors must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return bad("delta must be positive");
            }
        }
        Ok(())
    }

    /// Intersection parameters for a registration against `target`.
    pub fn intersection_params(&self, target: &PointCloud) -> Result<IntersectionParams> {
        let mut params = match self.delta {
            Some(delta) => IntersectionParams {
                delta,
                k: self.neighbors,
                mode: IntersectionMode::ConvexCombination,
                weights: CombinationWeights::LineDistance,
            },
            None => params_with_k(target, self.neighbors)?,
        };
        params.mode = self.intersection_mode;
        params.weights = self.combination_weights;
        Ok(params)
    }

    fn chord_sampler(&self) -> ChordSampler {
        ChordSampler {
            kind: self.sampler,
            pair_perturbation: self.pair_perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub d_med: f64,
    /// Iterate at which `loss` was evaluated.
    pub transform: RigidTransform,
    /// se(3) coordinates of `transform` (NaN when its angle is too close to π).
    pub params: Se3Params,
    /// Seconds since the solve started.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    fn push(
        &mut self,
        iteration: usize,
        loss: f64,
        d_med: f64,
        transform: RigidTransform,
        start: &Instant,
    ) {
        let params = transform.log().unwrap_or(Se3Params::new(
            Point::repeat(f64::NAN),
            Point::repeat(f64::NAN),
        ));
        self.records.push(TraceRecord {
            iteration,
            loss,
            d_med,
            transform,
            params,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn select_best(&self) -> RigidTransform {
        self.select(IterateSelection::Best)
            .map(|r| r.transform)
            .unwrap_or_default()
    }

    fn select(&self, selection: IterateSelection) -> Option<&TraceRecord> {
        match selection {
            IterateSelection::Last => self.records.last(),
            IterateSelection::Best => {
                self.records
                    .iter()
                    .fold(None, |best: Option<&TraceRecord>, r| match best {
                        Some(b) if b.loss <= r.loss => Some(b),
                        _ => Some(r),
                    })
            }
        }
    }
}

/// Result of a registration.
#[derive(Debug, Clone)]
pub struct Solution {
    pub transform: RigidTransform,
    pub trace: SolveTrace,
    /// Whether the step-size criterion fired before the iteration cap.
    pub converged: bool,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Learning-rate schedule for [`solve_first_order`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LearningRateSchedule {
    #[default]
    Constant,
    /// Cosine annealing from the base rate down to `floor` times it at the
    /// iteration cap.
    Cosine { floor: f64 },
}

impl LearningRateSchedule {
    pub fn rate(&self, base: f64, iteration: usize, max_iterations: usize) -> f64 {
        match *self {
            LearningRateSchedule::Constant => base,
            LearningRateSchedule::Cosine { floor } => {
                let progress = iteration as f64 / max_iterations.max(1) as f64;
                let c = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                base * (floor + (1.0 - floor) * c)
            }
        }
    }
}

/// Chord source shared by the line-based solvers.
struct ChordStream {
    rng: ChaCha8Rng,
    frozen: Option<Vec<Chord>>,
    fixed_sphere: Option<BoundingSphere>,
}

impl ChordStream {
    fn new(
        config: &SolverConfig,
        source: &PointCloud,
        target: &PointCloud,
        initial: &RigidTransform,
    ) -> Result<Self> {
        let fixed_sphere = if config.recompute_sphere {
            None
        } else {
            Some(bounding_sphere(&source.transformed(initial), target)?)
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            frozen: None,
            fixed_sphere,
        })
    }

    fn chords(
        &mut self,
        config: &SolverConfig,
        source: &PointCloud,
        target: &PointCloud,
        transform: &RigidTransform,
        force_new: bool,
    ) -> Result<Vec<Chord>> {
        if !config.resample_lines && !force_new {
            if let Some(chords) = &self.frozen {
                return Ok(chords.clone());
            }
        }
        let moved = source.transformed(transform);
        let sphere = match self.fixed_sphere {
            Some(s) => s,
            None => bounding_sphere(&moved, target)?,
        };
        let chords = sample_chords(
            &sphere,
            config.lines_per_iteration,
            config.chord_sampler(),
            (&moved, target),
            &mut self.rng,
        )?;
        if !config.resample_lines {
            self.frozen = Some(chords.clone());
        }
        Ok(chords)
    }

    /// Frozen line loss at `transform`, drawing new chords after a batch with
    /// no usable line.
    #[allow(clippy::too_many_arguments)]
    fn line_loss(
        &mut self,
        config: &SolverConfig,
        source: &IndexedCloud,
        target: &IndexedCloud,
        params: &IntersectionParams,
        transform: &RigidTransform,
    ) -> Result<FrozenLineLoss> {
        let mut failures = 0;
        loop {
            let chords = self.chords(
                config,
                source.cloud(),
                target.cloud(),
                transform,
                failures > 0,
            )?;
            match freeze_line_loss(transform, source, target, &chords, config.nu0, params) {
                Err(Error::NoIntersections) => {
                    failures += 1;
                    if failures >= MAX_RESAMPLE_FAILURES {
                        return Err(Error::NoIntersections);
                    }
                }
                other => return other,
            }
        }
    }
}

fn check_inputs(source: &PointCloud, target: &PointCloud, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    source.ensure_non_empty()?;
    target.ensure_non_empty()
}

/// `current` is the pose after the final step, which no trace record holds.
fn finish(
    trace: SolveTrace,
    selection: IterateSelection,
    converged: bool,
    current: RigidTransform,
) -> Solution {
    let transform = match selection {
        IterateSelection::Last => current,
        IterateSelection::Best => trace.select(selection).map_or(current, |r| r.transform),
    };
    Solution {
        transform,
        trace,
        converged,
    }
}

/// First-order descent on se(3): `T ← exp(Δ) · T` with Adam steps `Δ`.
pub fn solve_first_order(
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    objective: ObjectiveKind,
    config: &SolverConfig,
) -> Result<Solution> {
    check_inputs(source, target, config)?;
    let start = Instant::now();
    let source_idx = IndexedCloud::new(source.clone(), config.neighbors);
    let target_idx = IndexedCloud::new(target.clone(), config.neighbors);
    let params = match objective {
        ObjectiveKind::LineLoss => Some(config.intersection_params(target)?),
        _ => None,
    };
    let mut stream = ChordStream::new(config, source, target, initial)?;
    let mut adam = Adam::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut transform = *initial;
    let mut trace = SolveTrace::default();
    let mut converged = false;

    for iteration in 0..config.max_iterations {
        let (value, gradient, d_med) = match objective {
            ObjectiveKind::LineLoss => {
                let params = params.as_ref().expect("line params");
                let frozen =
                    stream.line_loss(config, &source_idx, &target_idx, params, &transform)?;
                (
                    frozen.report.value,
                    frozen.report.gradient,
                    frozen.report.d_med,
                )
            }
            ObjectiveKind::Chamfer | ObjectiveKind::ChamferWelsch => {
                let metric = if objective == ObjectiveKind::Chamfer {
                    ChamferMetric::SquaredL2
                } else {
                    ChamferMetric::Welsch
                };
                let (frozen, report) =
                    freeze_chamfer(&transform, &source_idx, &target_idx, metric, config.nu0)?;
                let (value, gradient) = frozen.value_and_gradient(&transform);
                (value, gradient, report.d_med)
            }
        };
        trace.push(iteration, value, d_med, transform, &start);
        adam.set_learning_rate(config.schedule.rate(
            config.learning_rate,
            iteration,
            config.max_iterations,
        ));
        let step = adam.step(&gradient);
        transform = Se3Params::from_vector(&step)
            .exp()
            .compose(&transform)
            .renormalized();
        if step.norm() < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(finish(trace, config.selection, converged, transform))
}

/// Closed-form reweighted iterations on the line-intersection correspondences.
pub fn solve_svd_surrogate(
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    config: &SolverConfig,
) -> Result<Solution> {
    check_inputs(source, target, config)?;
    let start = Instant::now();
    let source_idx = IndexedCloud::new(source.clone(), config.neighbors);
    let target_idx = IndexedCloud::new(target.clone(), config.neighbors);
    let params = config.intersection_params(target)?;
    let mut stream = ChordStream::new(config, source, target, initial)?;
    let mut transform = *initial;
    let mut trace = SolveTrace::default();
    let mut converged = false;

    for iteration in 0..config.max_iterations {
        let frozen = stream.line_loss(config, &source_idx, &target_idx, &params, &transform)?;
        trace.push(
            iteration,
            frozen.report.value,
            frozen.report.d_med,
            transform,
            &start,
        );
        let nu = frozen.report.nu;
        let mut pairs = Vec::with_capacity(frozen.objective.terms.len());
        let mut weights = Vec::with_capacity(frozen.objective.terms.len());
        for term in &frozen.objective.terms {
            let q = transform.apply(&term.body);
            let d = (q - term.target).norm();
            let w = match config.surrogate_weight {
                SurrogateWeight::Irls => (-(d * d) / (2.0 * nu * nu)).exp(),
                SurrogateWeight::WelschValue => welsch(d, nu),
            };
            pairs.push((q, term.target));
            weights.push(w * term.weight);
        }
        let update = weighted_procrustes(&pairs, &weights)?;
        transform = update.compose(&transform).renormalized();
        if step_norm(&update) < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(finish(trace, config.selection, converged, transform))
}

/// Point-to-point ICP with closest-point matching and closed-form updates.
pub fn solve_icp(
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    config: &SolverConfig,
) -> Result<Solution> {
    check_inputs(source, target, config)?;
    let start = Instant::now();
    let tree = crate::spatial::KdTree::new(target);
    let mut transform = *initial;
    let mut trace = SolveTrace::default();
    let mut converged = false;

    for iteration in 0..config.max_iterations {
        let pairs: Vec<(Point, Point)> = source
            .points()
            .iter()
            .map(|x| {
                let q = transform.apply(x);
                let nn = tree.nearest(&q).expect("non-empty target");
                (q, target.points()[nn.index])
            })
            .collect();
        let mse = pairs
            .iter()
            .map(|(q, y)| (q - y).norm_squared())
            .sum::<f64>()
            / pairs.len() as f64;
        trace.push(iteration, mse, f64::NAN, transform, &start);
        let update = procrustes(&pairs)?;
        transform = update.compose(&transform).renormalized();
        if step_norm(&update) < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(finish(trace, config.selection, converged, transform))
}

fn step_norm(update: &RigidTransform) -> f64 {
    update
        .log()
        .map(|xi| xi.to_vector().norm())
        .unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn helix(n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    Vector3::new(t.cos(), t.sin(), 0.05 * t + 0.2 * (3.0 * t).sin())
                })
                .collect(),
        )
    }

    #[test]
    fn invalid_configs_rejected() {
        let c = helix(10);
        let cfg = SolverConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(solve_icp(&c, &c, &RigidTransform::identity(), &cfg).is_err());
        let cfg = SolverConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(solve_icp(&c, &c, &RigidTransform::identity(), &cfg).is_err());
    }

    #[test]
    fn icp_identical_clouds_stop_after_one_iteration() {
        let c = helix(200);
        let sol = solve_icp(
            &c,
            &c,
            &RigidTransform::identity(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.iterations(), 1);
        assert!(sol.converged);
        assert!(
            (sol.transform.rotation - nalgebra::Matrix3::identity())
                .abs()
                .max()
                < 1e-12
        );
        assert!(sol.transform.translation.norm() < 1e-12);
    }

    #[test]
    fn icp_recovers_small_displacement() {
        let target = helix(300);
        let gt = Se3Params::new(
            Vector3::new(0.02, -0.03, 0.04),
            Vector3::new(0.03, 0.01, -0.02),
        )
        .exp();
        let source = target.transformed(&gt.inverse());
        let sol = solve_icp(
            &source,
            &target,
            &RigidTransform::identity(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((sol.transform.rotation - gt.rotation).abs().max() < 1e-6);
        assert!((sol.transform.translation - gt.translation).norm() < 1e-6);
        for w in sol.trace.records.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-15);
        }
    }

    #[test]
    fn iterate_selection() {
        let mut trace = SolveTrace::default();
        let start = Instant::now();
        for (i, loss) in [3.0, 1.0, 2.0].into_iter().enumerate() {
            let t = RigidTransform::from_translation(Vector3::new(i as f64, 0.0, 0.0));
            trace.push(i, loss, 0.0, t, &start);
        }
        let current = RigidTransform::from_translation(Vector3::new(7.0, 0.0, 0.0));
        let s = finish(trace.clone(), IterateSelection::Best, false, current);
        assert_eq!(s.transform.translation.x, 1.0);
        let s = finish(trace, IterateSelection::Last, false, current);
        assert_eq!(s.transform.translation.x, 7.0);
    }
}
