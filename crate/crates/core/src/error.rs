// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors produced by the analysis toolkit.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum VassError {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data is malformed (non-finite values, inconsistent shapes).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Two vectors or matrices disagree in size.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A correlation was requested for a zero-variance input.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Raw valence and arousal directions are (nearly) parallel.
    #[error("degenerate axes: |cos| between raw directions is {cosine:.15}")]
    DegenerateAxes { cosine: f64 },

    /// A linear system could not be solved (collinear points etc).
    #[error("singular system: {0}")]
    Singular(String),

    /// Labels required by a fit have no rating.
    #[error("missing ratings for labels: {}", .0.join(", "))]
    MissingRatings(Vec<String>),

    /// A parse failure in a text file, with 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An identifier appears twice where it must be unique.
    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    /// Bad magic bytes at the start of a tensor dump.
    #[error("bad magic: not a VATD1 file")]
    BadMagic,

    /// Unsupported container or artifact version.
    #[error("unsupported version {found} (supported: {supported})")]
    UnsupportedVersion { found: String, supported: String },

    /// Payload checksum mismatch or truncated payload.
    #[error("checksum mismatch: {0}")]
    Checksum(String),

    /// Structural problem in a tensor dump header.
    #[error("malformed dump header: {0}")]
    Header(String),

    /// A named tensor or artifact is absent.
    #[error("not found: {0}")]
    NotFound(String),

    /// Clamp reference logits do not cover the generation length.
    #[error("clamp reference covers {available} steps, generation may need {needed}")]
    ClampReferenceTooShort { needed: usize, available: usize },

    /// An external scorer process misbehaved.
    #[error("scorer failure: {0}")]
    Scorer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, VassError>;
