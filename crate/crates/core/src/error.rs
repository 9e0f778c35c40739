use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed GeoJSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("duplicate region ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("feature `{feature}` has unsupported geometry type `{kind}`")]
    UnsupportedGeometry { feature: String, kind: String },

    #[error("invalid geometry in `{feature}`: {reason}")]
    InvalidGeometry { feature: String, reason: String },

    #[error("degenerate geometry in `{feature}`: total area {area:e} below threshold")]
    DegenerateGeometry { feature: String, area: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("index {index} out of range for {len} regions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("degenerate adaptive bandwidth at location {0}: k-th nearest distance is zero")]
    DegenerateBandwidth(usize),

    #[error("singular design: dependent columns {}", .0.join(", "))]
    SingularDesign(Vec<String>),

    #[error("singular local fit at location {index}{}", region_suffix(.region))]
    LocalSingularity {
        index: usize,
        region: Option<String>,
    },

    #[error("no feasible bandwidth: {0}")]
    NoFeasibleBandwidth(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("invalid k: {0}")]
    InvalidK(String),

    #[error("k = {k} exceeds the number of points ({n})")]
    InfeasibleK { k: usize, n: usize },

    #[error("agreement search bound exceeded: {0} clusters (max 8)")]
    SearchBound(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn region_suffix(region: &Option<String>) -> String {
    match region {
        Some(id) => format!(" (region `{id}`)"),
        None => String::new(),
    }
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// True for numerical failures (exit code 3); everything else is a
    /// configuration or validation failure (exit code 2).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numerical(),
            Error::DegenerateGeometry { .. }
            | Error::DegenerateBandwidth(_)
            | Error::SingularDesign(_)
            | Error::LocalSingularity { .. }
            | Error::NoFeasibleBandwidth(_)
            | Error::UndefinedStatistic(_) => true,
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
