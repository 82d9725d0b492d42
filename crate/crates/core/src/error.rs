use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("clip has no frames")]
    EmptyClip,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("frame rate must be positive, got {0}")]
    NonPositiveFps(f64),
    #[error("data length {len} does not match shape {height}x{width}x3")]
    DataLength { len: usize, height: usize, width: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("sampling rate must be positive and samples finite")]
    InvalidTrace,

    #[error("missing directory {0}")]
    MissingDir(PathBuf),
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("landmark record {record} has {found} points, expected 68")]
    WrongPointCount { record: usize, found: usize },
    #[error("{landmarks} landmark records for {frames} frames")]
    FrameCountMismatch { landmarks: usize, frames: usize },
    #[error("ppg covers {ppg_s:.3} s but video spans {video_s:.3} s")]
    InsufficientCoverage { ppg_s: f64, video_s: f64 },
    #[error("clip has {len} frames, window needs {window}")]
    ClipTooShort { len: usize, window: usize },

    #[error("degenerate region {0}")]
    DegenerateRegion(&'static str),
    #[error("image is empty")]
    EmptyInput,

    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("patch size {0} must divide 64")]
    BadPatchSize(usize),
    #[error("blur kernel {0} must be odd and >= 3")]
    BadKernel(usize),
    #[error("frame {height}x{width} not divisible into {block}x{block} blocks")]
    BadDims { height: usize, width: usize, block: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampling rate {fs} Hz too low for band edge {hi} Hz")]
    FsTooLow { fs: f64, hi: f64 },
    #[error("signal of {len} samples too short (need more than {min})")]
    TooShort { len: usize, min: usize },
    #[error("channel mean is zero")]
    ZeroChannel,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("heart rate {0} bpm outside [30, 240]")]
    HrOutOfRange(f64),
    #[error("value range violation: {0}")]
    RangeViolation(String),

    #[error("format error: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ZeroChannel | Error::ZeroVariance | Error::InvalidTrace => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    /// Stable snake_case identifier for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyClip => "empty_clip",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonPositiveFps(_) => "non_positive_fps",
            Error::DataLength { .. } => "data_length",
            Error::InvalidPermutation(_) => "invalid_permutation",
            Error::InvalidTrace => "invalid_trace",
            Error::MissingDir(_) => "missing_dir",
            Error::Decode { .. } => "decode_failure",
            Error::WrongPointCount { .. } => "wrong_point_count",
            Error::FrameCountMismatch { .. } => "frame_count_mismatch",
            Error::InsufficientCoverage { .. } => "insufficient_coverage",
            Error::ClipTooShort { .. } => "clip_too_short",
            Error::DegenerateRegion(_) => "degenerate_region",
            Error::EmptyInput => "empty_input",
            Error::SizeMismatch(_) => "size_mismatch",
            Error::BadPatchSize(_) => "bad_patch_size",
            Error::BadKernel(_) => "bad_kernel",
            Error::BadDims { .. } => "bad_dims",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::FsTooLow { .. } => "fs_too_low",
            Error::TooShort { .. } => "too_short",
            Error::ZeroChannel => "zero_channel",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::ZeroVariance => "zero_variance",
            Error::HrOutOfRange(_) => "hr_out_of_range",
            Error::RangeViolation(_) => "range_violation",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
