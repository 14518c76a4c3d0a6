use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine, explainers and codecs can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("unknown layer name '{name}' (available: {})", available.join(", "))]
    UnknownLayerName { name: String, available: Vec<String> },

    #[error("invalid target class {target} (model has {classes} classes)")]
    InvalidTarget { target: usize, classes: usize },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported max value {0} (only 255 is supported)")]
    UnsupportedMaxVal(u32),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("row {row} has {found} fields, header has {expected}")]
    InconsistentArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("layer '{0}' has no spatial extent")]
    NonSpatialLayer(String),

    #[error("invalid grid {rows}x{cols} for a {height}x{width} image")]
    InvalidGrid {
        rows: usize,
        cols: usize,
        height: usize,
        width: usize,
    },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("predictor failure: {0}")]
    PredictorFailure(String),

    #[error("exact Shapley mode supports at most {max} features, got {got}")]
    TooManyFeaturesForExact { got: usize, max: usize },

    #[error("singular linear system")]
    SingularSystem,

    #[error("interaction design needs {needed} columns but only {samples} samples were requested")]
    DesignTooLarge { needed: usize, samples: usize },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("filter index {index} out of range for layer '{layer}' with {channels} channels")]
    FilterIndexOutOfRange {
        layer: String,
        index: usize,
        channels: usize,
    },

    #[error("target activation at layer '{0}' is identically zero")]
    ZeroTargetActivation(String),

    #[error("image shape {actual:?} does not match network input {expected:?}")]
    ImageShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("size mismatch: map is {map_h}x{map_w}, image is {image_h}x{image_w}")]
    SizeMismatch {
        map_h: usize,
        map_w: usize,
        image_h: usize,
        image_w: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
