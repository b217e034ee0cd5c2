//! Registration accuracy metrics and recall curves.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{median, PointCloud, RigidTransform};

/// Angle of a rotation matrix in degrees, `arccos((tr A − 1) / 2)`.
///
/// Evaluated as `atan2(sin, cos)` with the sine taken from the skew part, so
/// that near-identity rotations keep full precision; the cosine is clamped
/// to `[-1, 1]`.
pub fn rotation_angle(a: &Matrix3<f64>) -> f64 {
    let cos = ((a.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = nalgebra::Vector3::new(
        a[(2, 1)] - a[(1, 2)],
        a[(0, 2)] - a[(2, 0)],
        a[(1, 0)] - a[(0, 1)],
    );
    let sin = (skew.norm() / 2.0).min(1.0);
    sin.atan2(cos).to_degrees()
}

/// Accuracy of one estimated transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pair_id: String,
    pub err_r_deg: f64,
    pub err_t_l1: f64,
    pub err_t_l2: f64,
    pub err_pw_l1: f64,
    pub err_pw_l2: f64,
}

/// Rotation, translation and mean pointwise errors of `est` against `gt`
/// over the points of `source`.
pub fn evaluate(
    gt: &RigidTransform,
    est: &RigidTransform,
    source: &PointCloud,
) -> Result<EvalReport> {
    source.ensure_non_empty()?;
    let dt = gt.translation - est.translation;
    let (mut pw_l1, mut pw_l2) = (0.0, 0.0);
    for x in source.points() {
        let d = gt.apply(x) - est.apply(x);
        pw_l1 += d.abs().sum();
        pw_l2 += d.norm();
    }
    let n = source.len() as f64;
    Ok(EvalReport {
        pair_id: String::new(),
        err_r_deg: rotation_angle(&(gt.rotation.transpose() * est.rotation)),
        err_t_l1: dt.abs().sum(),
        err_t_l2: dt.norm(),
        err_pw_l1: pw_l1 / n,
        err_pw_l2: pw_l2 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecallMetric {
    #[default]
    PwL2,
    PwL1,
    RotationDeg,
    TranslationL2,
}

impl RecallMetric {
    pub fn of(&self, r: &EvalReport) -> f64 {
        match self {
            RecallMetric::PwL2 => r.err_pw_l2,
            RecallMetric::PwL1 => r.err_pw_l1,
            RecallMetric::RotationDeg => r.err_r_deg,
            RecallMetric::TranslationL2 => r.err_t_l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub alphas: Vec<f64>,
    pub recalls: Vec<f64>,
}

/// Fraction of reports whose metric is strictly below each alpha.
pub fn alpha_recall(
    reports: &[EvalReport],
    alphas: &[f64],
    metric: RecallMetric,
) -> Result<RecallCurve> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("alpha recall needs at least one report"));
    }
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let n = reports.len() as f64;
    let recalls = alphas
        .iter()
        .map(|&a| reports.iter().filter(|r| metric.of(r) < a).count() as f64 / n)
        .collect();
    Ok(RecallCurve { alphas, recalls })
}

/// Means and medians of each error over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: [f64; 5],
    pub median: [f64; 5],
}

pub const METRIC_NAMES: [&str; 5] = [
    "err_r_deg",
    "err_t_l1",
    "err_t_l2",
    "err_pw_l1",
    "err_pw_l2",
];

fn metrics(r: &EvalReport) -> [f64; 5] {
    [
        r.err_r_deg,
        r.err_t_l1,
        r.err_t_l2,
        r.err_pw_l1,
        r.err_pw_l2,
    ]
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("aggregate needs at least one report"));
    }
    let mut mean = [0.0; 5];
    let mut med = [0.0; 5];
    for k in 0..5 {
        let values: Vec<f64> = reports.iter().map(|r| metrics(r)[k]).collect();
        mean[k] = values.iter().sum::<f64>() / values.len() as f64;
        med[k] = median(values)?;
    }
    Ok(Aggregate {
        count: reports.len(),
        mean,
        median: med,
    })
}
