use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is empty")]
    EmptyMesh,

    #[error("triangle {triangle} references node {node}, but the mesh has {n_nodes} nodes")]
    IndexOutOfRange {
        triangle: usize,
        node: usize,
        n_nodes: usize,
    },

    #[error("triangle {triangle} is degenerate or clockwise (signed area {area:e} m^2)")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("node {node} does not belong to any triangle")]
    OrphanNode { node: usize },

    #[error("nodes {a} and {b} are {distance:e} m apart (duplicate)")]
    DuplicateNodes { a: usize, b: usize, distance: f64 },

    #[error("nodes {a} and {b} coincide; edge length would be zero")]
    CoincidentNodes { a: usize, b: usize },

    #[error("node {node} at ({x}, {y}) lies outside the grid extent")]
    NodeOutsideGrid { node: usize, x: f64, y: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "CFL condition violated: dt {dt} yr * max speed {max_speed} m/yr / min edge {min_edge} m = {courant} > 0.5"
    )]
    Cfl {
        dt: f64,
        max_speed: f64,
        min_edge: f64,
        courant: f64,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("expected {expected} features, found {found}")]
    FeatureCount { expected: usize, found: usize },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{variable} = {value} lies outside its nominal range [{lo}, {hi}]")]
    OutOfBounds {
        variable: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("sample parameter value {0} is not listed in the split specification")]
    UnknownParam(f64),

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("normalization bounds of checkpoint ({checkpoint}) differ from dataset ({dataset})")]
    BoundsMismatch { checkpoint: String, dataset: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("scenario {id}: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Process exit code used by the command-line tool: 2 for data and
    /// artifact problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Cfl { .. }
            | Error::NonFiniteGradient { .. }
            | Error::NonFinite(_)
            | Error::Divergence { .. } => 3,
            Error::Scenario { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
