use thiserror::Error;

use crate::flow::Blowup;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    /// The integrated curvature is not close to a multiple of 2π, which
    /// almost always means the curve is under-resolved.
    #[error("turning number {raw} is not close to an integer (under-resolved curve?)")]
    NonClosedCurvature { raw: f64 },

    #[error("Fourier expansion of curvature is undefined for turning number 0")]
    UndefinedExpansion,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("support function does not define a locally convex curve: |a·η| = {0} >= 1")]
    NonConvexSupport(f64),

    #[error("initial data (0, 0) only admits the trivial solution k = 0")]
    TrivialSolution,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("curve file: {0}")]
    CurveFile(String),

    #[error("blowup detected at t = {}", .0.state.time)]
    Blowup(Box<Blowup>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
