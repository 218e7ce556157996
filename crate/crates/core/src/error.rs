//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("landmark index {index} out of range ({count} landmarks)")]
    LandmarkIndexOutOfRange { index: usize, count: usize },

    #[error("observation marked NEW passed to an existing-landmark update")]
    NewLandmarkInUpdate,

    #[error("observation of an existing landmark passed to augment")]
    ExistingLandmarkInAugment,

    #[error("measurement update requires at least one iteration")]
    ZeroIterations,

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("image patch invalid: {reason}")]
    InvalidPatch { reason: String },

    #[error("orientation window contains no valid pixels")]
    EmptyWindow,

    #[error("orientation histogram has zero total weight")]
    ZeroHistogram,

    #[error("detections cover {found} camera(s); triangulation needs at least 2")]
    InsufficientCameras { found: usize },

    #[error("camera {0} referenced by a detection is not configured")]
    UnknownCamera(usize),

    #[error("static classification needs {needed} positions, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("frame index regression: stepped to {current} after {last}")]
    FrameRegression { last: u64, current: u64 },

    #[error("detection carries frame {found}, step expects frame {expected}")]
    FrameMismatch { expected: u64, found: u64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty ground truth")]
    EmptyGroundTruth,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
