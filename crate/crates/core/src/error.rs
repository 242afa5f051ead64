//! Crate-wide error type.
//!
//! Validation of bundled asset files reports structured variants so callers
//! (and tests) can distinguish a malformed file from degenerate geometry or a
//! numerical domain problem.

use thiserror::Error;

/// Errors produced by geometry, model loading, and solver entry points.
#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite value (NaN or infinity) reached a numeric entry point.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// The rotation handed to the log map is too close to a half-turn, where
    /// the axis is not recoverable to the accuracy this crate promises.
    #[error("rotation angle {angle} rad is within {margin} of pi; log map is ill-conditioned")]
    LogNearPi { angle: f64, margin: f64 },

    /// A rotation matrix failed the orthonormality / determinant check.
    #[error("matrix is not a rotation: {detail}")]
    NotARotation { detail: String },

    /// Input geometry does not carry enough shape to define the requested
    /// quantity (too few points, collinear cloud, zero-length axis, ...).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A vector or matrix argument has the wrong length for the model.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A hand description file violated its schema or internal consistency
    /// rules. See [`HandSpecError`] for the specific rule.
    #[error("invalid hand description: {0}")]
    HandSpec(#[from] HandSpecError),

    /// An object cloud file could not be parsed or fails cloud preconditions.
    #[error("invalid object cloud: {0}")]
    Cloud(String),

    /// Underlying I/O failure while reading an asset.
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A state or twist lies outside the bounds the model declares.
    #[error("value out of bounds: {0}")]
    OutOfBounds(String),

    /// A constrained solve failed partway; the count records how many outer
    /// iterations completed before the failure.
    #[error("solve failed after {outer} outer iterations: {source}")]
    Solver {
        outer: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Distinct validation failures for hand description files.
#[derive(Debug, Error, PartialEq)]
pub enum HandSpecError {
    /// JSON did not match the expected schema.
    #[error("schema violation: {0}")]
    Schema(String),

    /// The frame parent graph contains a cycle or a forward reference.
    #[error("frame {frame} has cyclic or forward parent reference {parent}")]
    CyclicParent { frame: usize, parent: usize },

    /// A joint references a frame that does not exist or is not articulable.
    #[error("joint {joint} references invalid frame {frame}: {reason}")]
    BadJointFrame {
        joint: usize,
        frame: usize,
        reason: &'static str,
    },

    /// A limit interval is empty or inverted.
    #[error("limits for {what} are not an increasing interval: [{lower}, {upper}]")]
    BadLimits {
        what: String,
        lower: f64,
        upper: f64,
    },

    /// An attached point references a missing frame or has a bad radius.
    #[error("point {point} invalid: {reason}")]
    BadPoint { point: usize, reason: String },

    /// A tube (two-point) collision volume is invalid, e.g. its threshold
    /// does not exceed the distance between its endpoints at the zero
    /// configuration, which would make the volume empty.
    #[error("link {link} invalid: {reason}")]
    BadLink { link: usize, reason: String },

    /// The fingertip subset is empty or references missing points.
    #[error("fingertip subset invalid: {0}")]
    BadFingertipSubset(String),

    /// A self-collision pair is malformed (same frame, missing index, ...).
    #[error("self-collision pair {index} invalid: {reason}")]
    BadSelfPair { index: usize, reason: String },

    /// Declared header counts disagree with the actual lists.
    #[error("header count mismatch: {0}")]
    HeaderCount(String),
}
