//! Study service: accounts and authorization, transactional storage,
//! pseudonymized exports, legacy CSV import and the HTTP API.

pub mod anon;
pub mod auth;
pub mod csv_import;
pub mod error;
pub mod export;
pub mod http;
pub mod pseudonym;
pub mod service;
pub mod store;

pub use auth::{authorize, Action, Role, UserAccount};
pub use error::ServiceError;
pub use export::{Artifact, ExportFormat};
pub use pseudonym::{PseudonymMap, StudyKey};
pub use service::Service;
pub use store::{JsonFileStorage, Store};
