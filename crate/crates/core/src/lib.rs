//! Rigid point-cloud registration driven by a random-line intersection metric.
//!
//! Random chords through the joint bounding sphere of two clouds are
//! intersected with each surface; the per-line point sets are matched by
//! nearest neighbour under a Welsch penalty and the resulting loss is
//! minimized over SE(3).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod intersection;
pub mod io;
pub mod lines;
pub mod loss;
pub mod sampling;
pub mod solvers;
pub mod spatial;
pub mod stats;

pub use error::{Error, Result};
pub use eval::{
    aggregate, alpha_recall, evaluate, rotation_angle, Aggregate, EvalReport, RecallCurve,
    RecallMetric,
};
pub use geometry::{bounding_sphere, BoundingSphere, Point, PointCloud, RigidTransform, Se3Params};
pub use intersection::{
    intersect, IndexedCloud, Intersection, IntersectionMode, IntersectionParams, IntersectionSet,
};
pub use lines::{sample_chords, Chord, ChordSampler, SamplerKind};
pub use loss::{
    chamfer_loss, freeze_line_loss, line_loss, welsch, ChamferMetric, LossReport, Objective,
};
pub use solvers::{
    solve_first_order, solve_icp, solve_svd_surrogate, weighted_procrustes, ObjectiveKind,
    Solution, SolveTrace, SolverConfig,
};
pub use spatial::KdTree;
