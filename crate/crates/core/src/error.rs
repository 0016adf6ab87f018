use thiserror::Error;

pub type Result<T> = std::result::Result<T, DgpcError>;

#[derive(Debug, Error)]
pub enum DgpcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// A Gram-Schmidt pivot collapsed: the measure is (nearly) supported on a
    /// lower-dimensional set, or the moment table is inconsistent.
    #[error("degenerate measure{}: {detail}", at_time(*.time))]
    DegenerateMeasure { detail: String, time: Option<f64> },

    #[error("missing moment of order {order:?}{}", at_time(*.time))]
    MissingMoment { order: Vec<usize>, time: Option<f64> },

    #[error("non-finite coefficient{}: {detail}", at_time(*.time))]
    NonFinite { detail: String, time: Option<f64> },

    #[error("stationary density is not integrable: {0}")]
    NonIntegrable(String),

    #[error("unsupported initial law: {0}")]
    UnsupportedLaw(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn at_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl DgpcError {
    pub(crate) fn degenerate(detail: impl Into<String>) -> Self {
        DgpcError::DegenerateMeasure {
            detail: detail.into(),
            time: None,
        }
    }

    /// Attach the restart time at which a numerical failure occurred.
    pub fn at(self, t: f64) -> Self {
        match self {
            DgpcError::DegenerateMeasure { detail, .. } => DgpcError::DegenerateMeasure {
                detail,
                time: Some(t),
            },
            DgpcError::MissingMoment { order, .. } => DgpcError::MissingMoment {
                order,
                time: Some(t),
            },
            DgpcError::NonFinite { detail, .. } => DgpcError::NonFinite {
                detail,
                time: Some(t),
            },
            other => other,
        }
    }

    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            DgpcError::InvalidArgument(_) | DgpcError::BasisMismatch(_) => "argument",
            DgpcError::DegenerateMeasure { .. } => "degenerate-measure",
            DgpcError::MissingMoment { .. } => "missing-moment",
            DgpcError::NonFinite { .. } => "non-finite",
            DgpcError::NonIntegrable(_) => "non-integrable",
            DgpcError::UnsupportedLaw(_) | DgpcError::Config(_) => "config",
            DgpcError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" | "argument" => 2,
            "io" => 4,
            _ => 3,
        }
    }
}
