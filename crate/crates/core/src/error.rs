use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell set is empty")]
    EmptyCellSet,
    #[error("invalid tessellation: {0}")]
    InvalidTessellation(String),
    #[error("invalid geojson: {0}")]
    InvalidGeoJson(String),

    #[error("input has no data rows")]
    EmptyInput,
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("need at least 2 distinct users to split, found {0}")]
    TooFewUsers(usize),

    #[error("no samples to interpolate from")]
    NoSamples,
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("k = {k} exceeds the number of samples ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid interpolator parameter: {0}")]
    InvalidParameter(String),
    #[error("holdout test set is empty")]
    EmptyTest,

    #[error("percentile of an empty list")]
    EmptyValues,
    #[error("aggregation source has no points")]
    EmptySource,

    #[error(
        "graph has {components} connected components but only {n_clusters} clusters were requested"
    )]
    TooManyComponents {
        components: usize,
        n_clusters: usize,
    },
    #[error("no split satisfies floor = {floor} before reaching {n_clusters} clusters")]
    InfeasibleFloor { n_clusters: usize, floor: usize },
    #[error("cells `{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),

    #[error("clusterings are defined over different cell sets")]
    CellSetMismatch,
    #[error("field is constant; Moran's I is undefined")]
    ConstantField,
    #[error("need at least 2 cells, found {0}")]
    TooFewCells(usize),
    #[error("at least two clusterings are required")]
    TooFewClusterings,

    #[error("cell `{0}` has no values to resample")]
    EmptyCell(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config: {0}")]
    Config(String),
    #[error("slice `{slice}`: {source}")]
    Slice {
        slice: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
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
}
