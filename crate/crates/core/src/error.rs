use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("resolution {resolution} too coarse: {detail}")]
    ResolutionTooCoarse { resolution: f64, detail: String },

    #[error("invalid hole: {0}")]
    InvalidHole(String),

    #[error("invalid problem configuration: {0}")]
    InvalidConfig(String),

    #[error("q = {q} is not subcritical: p_* = p(N-1)/(N-p) = {critical} for p = {p}, N = {dim}")]
    SupercriticalExponent { p: f64, q: f64, dim: usize, critical: f64 },

    #[error("field is not admissible: {0}")]
    NotAdmissible(String),

    #[error("empty admissible class: the hole constrains every boundary vertex")]
    EmptyAdmissibleClass,

    #[error("invalid tangential field: {0}")]
    InvalidField(String),

    #[error("extremal is not normalized: boundary q-norm is {0}")]
    NotNormalized(f64),

    #[error("transport failed: {0}")]
    Transport(String),

    #[error("inner solve did not converge{}", .step.map(|h| format!(" at step h = {h}")).unwrap_or_default())]
    NotConverged { step: Option<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
