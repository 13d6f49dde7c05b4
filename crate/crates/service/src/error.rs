use std::io;

use cohortlens_core::model::{Finding, ResponseIssues};
use thiserror::Error;

use crate::auth::Denied;
use crate::csv_import::ImportSummary;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not signed in")]
    Unauthenticated,
    #[error("wrong login or password")]
    BadCredentials,
    #[error(transparent)]
    Denied(#[from] Denied),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0} already exists")]
    Conflict(String),
    #[error("validation failed with {} finding(s)", .0.len())]
    Findings(Vec<Finding>),
    #[error("wave `{0}` is closed")]
    WaveClosed(String),
    #[error("respondent `{0}` is not on the wave roster")]
    NotInRoster(String),
    #[error("response is incomplete or invalid")]
    Response(ResponseIssues),
    #[error("scoring failed: {0}")]
    Scoring(String),
    #[error("import rejected with {} row error(s)", .0.errors.len())]
    ImportRejected(Box<ImportSummary>),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;
