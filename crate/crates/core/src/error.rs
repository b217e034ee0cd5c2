use thiserror::Error;

/// Errors produced by the registration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error(
        "point cloud has {points} points, need more than {k} for k-nearest-neighbor statistics"
    )]
    TooFewPoints { points: usize, k: usize },
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(&'static str),
    #[error("normals length {normals} does not match points length {points}")]
    NormalsMismatch { points: usize, normals: usize },
    #[error("rotation angle {angle} is too close to pi for a stable logarithm")]
    DegenerateRotation { angle: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("failed to sample a non-degenerate chord after {0} retries")]
    DegenerateChord(usize),
    #[error("no chord intersected both clouds")]
    NoIntersections,
    #[error("need at least 3 correspondences, got {0}")]
    RankDeficient(usize),
    #[error("crop keeps {kept} points, fewer than half of the requested {requested}")]
    OverlapInfeasible { kept: usize, requested: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
