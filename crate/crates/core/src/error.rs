use std::path::PathBuf;

use crate::classes::ClassId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("point file has {points} records but label file has {labels}")]
    MismatchedCounts { points: usize, labels: usize },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("point lies behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid class partition: {0}")]
    InvalidPartition(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid shape mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    SpecMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("class id {0} is not part of the partition")]
    UnknownClass(ClassId),
    #[error("downsample factor must be positive")]
    BadFactor,
    #[error("classes {a} and {b} share the color {rgb:?}")]
    PaletteCollision { a: String, b: String, rgb: [u8; 3] },
    #[error("pixel ({col}, {row}) has color {rgb:?} which is not in the palette")]
    UnknownColor {
        row: usize,
        col: usize,
        rgb: [u8; 3],
    },
    #[error("png error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("external inpainter failed: {0}")]
    ExternalFailed(String),
    #[error("inpainting left {remaining} cells unfilled")]
    IncompleteFill { remaining: usize },
    #[error("grid has no labeled cells to fill from")]
    NoKnownCells,
    #[error("start cell ({row}, {col}) is an obstacle")]
    StartBlocked { row: usize, col: usize },
    #[error("cell ({row}, {col}) is outside the {width}x{height} map")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("evaluation mask selects no scorable cells")]
    EmptyMask,
    #[error("no free cells available for sampling: {0}")]
    NoFreeCells(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

/// Broad failure category, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Pipeline,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::MismatchedCounts { .. }
            | Error::MalformedFile { .. }
            | Error::InvalidCalibration(_)
            | Error::InvalidPartition(_)
            | Error::InvalidConfig(_)
            | Error::PaletteCollision { .. }
            | Error::UnknownColor { .. }
            | Error::Image { .. }
            | Error::Serde(_) => ErrorCategory::Input,
            _ => ErrorCategory::Pipeline,
        }
    }
}
