use std::fmt;

use thiserror::Error;

/// One offending parameter, as reported by validation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    Invalid(Vec<FieldError>),

    #[error("path {path} produced a non-finite or non-positive price at step {step}; dt is too coarse for these parameters")]
    PathBlowUp { path: usize, step: usize },

    #[error("characteristic function overflow at phi={phi_re}{phi_im:+}i, psi={psi}, tau={tau}")]
    CfOverflow {
        phi_re: f64,
        phi_im: f64,
        psi: f64,
        tau: f64,
    },

    #[error("every regression date was degenerate; no continuation estimate is available")]
    AllRegressionsDegenerate,

    #[error("no exercise region found; the option behaves as a European option")]
    NoExerciseRegion,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("boundary serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::Invalid(vec![FieldError::new(field, reason)])
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
