//! CSV reports written by the commands, and a reader for them.

use std::path::Path;

use raylign::solvers::SolveTrace;
use raylign::{Aggregate, EvalReport, RecallCurve};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
}

/// One method run on one pair. Metrics are empty when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub method: String,
    pub nu0: f64,
    pub pair_id: String,
    pub status: Status,
    pub err_r_deg: Option<f64>,
    pub err_t_l1: Option<f64>,
    pub err_t_l2: Option<f64>,
    pub err_pw_l1: Option<f64>,
    pub err_pw_l2: Option<f64>,
    pub final_loss: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
    pub message: String,
}

impl PairRow {
    pub fn report(&self) -> Option<EvalReport> {
        Some(EvalReport {
            pair_id: self.pair_id.clone(),
            err_r_deg: self.err_r_deg?,
            err_t_l1: self.err_t_l1?,
            err_t_l2: self.err_t_l2?,
            err_pw_l1: self.err_pw_l1?,
            err_pw_l2: self.err_pw_l2?,
        })
    }
}

/// Means and medians over the successful pairs of one method and `ν₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub nu0: f64,
    pub pairs: usize,
    pub failed: usize,
    pub mean_err_r_deg: Option<f64>,
    pub mean_err_t_l1: Option<f64>,
    pub mean_err_t_l2: Option<f64>,
    pub mean_err_pw_l1: Option<f64>,
    pub mean_err_pw_l2: Option<f64>,
    pub median_err_r_deg: Option<f64>,
    pub median_err_t_l1: Option<f64>,
    pub median_err_t_l2: Option<f64>,
    pub median_err_pw_l1: Option<f64>,
    pub median_err_pw_l2: Option<f64>,
}

impl SummaryRow {
    pub fn new(
        method: &str,
        nu0: f64,
        pairs: usize,
        failed: usize,
        agg: Option<&Aggregate>,
    ) -> Self {
        let m = |k: usize| agg.map(|a| a.mean[k]);
        let d = |k: usize| agg.map(|a| a.median[k]);
        Self {
            method: method.to_string(),
            nu0,
            pairs,
            failed,
            mean_err_r_deg: m(0),
            mean_err_t_l1: m(1),
            mean_err_t_l2: m(2),
            mean_err_pw_l1: m(3),
            mean_err_pw_l2: m(4),
            median_err_r_deg: d(0),
            median_err_t_l1: d(1),
            median_err_t_l2: d(2),
            median_err_pw_l1: d(3),
            median_err_pw_l2: d(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub nu0: f64,
    pub alpha: f64,
    pub recall: f64,
}

impl RecallRow {
    pub fn from_curve(nu0: f64, curve: &RecallCurve) -> Vec<Self> {
        curve
            .alphas
            .iter()
            .zip(&curve.recalls)
            .map(|(&alpha, &recall)| Self { nu0, alpha, recall })
            .collect()
    }
}

/// One solver iteration: loss, se(3) coordinates and the row-major 3×4 pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub d_med: f64,
    pub seconds: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub v_z: f64,
    pub r00: f64,
    pub r01: f64,
    pub r02: f64,
    pub t0: f64,
    pub r10: f64,
    pub r11: f64,
    pub r12: f64,
    pub t1: f64,
    pub r20: f64,
    pub r21: f64,
    pub r22: f64,
    pub t2: f64,
}

pub fn trace_rows(trace: &SolveTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| {
            let (w, v) = (r.params.omega, r.params.v);
            let m = r.transform.to_matrix();
            TraceRow {
                iteration: r.iteration,
                loss: r.loss,
                d_med: r.d_med,
                seconds: r.seconds,
                omega_x: w.x,
                omega_y: w.y,
                omega_z: w.z,
                v_x: v.x,
                v_y: v.y,
                v_z: v.z,
                r00: m[(0, 0)],
                r01: m[(0, 1)],
                r02: m[(0, 2)],
                t0: m[(0, 3)],
                r10: m[(1, 0)],
                r11: m[(1, 1)],
                r12: m[(1, 2)],
                t1: m[(1, 3)],
                r20: m[(2, 0)],
                r21: m[(2, 1)],
                r22: m[(2, 2)],
                t2: m[(2, 3)],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordRow {
    pub line: usize,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRow {
    pub line: usize,
    /// `source` or `target`.
    pub cloud: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Position along the chord.
    pub param: f64,
}

pub fn to_csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn from_csv_bytes<T: DeserializeOwned>(bytes: &[u8]) -> CliResult<Vec<T>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

/// Writes `rows` to `path` atomically.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    raylign::io::write_atomic(path, &to_csv_bytes(rows)?)?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    from_csv_bytes(&bytes)
}
