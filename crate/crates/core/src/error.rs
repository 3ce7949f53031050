use thiserror::Error;

/// Errors surfaced by the geometry kernels.
///
/// Numerical *violations* of a curvature hypothesis found while sampling are
/// data, not errors; they travel through residual reports. `Error` is reserved
/// for contract breaches: bad charts, degenerate inputs, empty domains and
/// monotone-limit failures that make a quantity undefined.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("invalid space description: {0}")]
    InvalidSpec(String),

    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,

    #[error("degenerate comparison vertex: a side adjacent to the vertex has length zero")]
    DegenerateVertex,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("curvature assumption violated: {0}")]
    CurvatureViolated(String),

    #[error("Busemann concavity violated: {0}")]
    BusemannViolated(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
