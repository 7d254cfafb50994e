//! Command-line and HTTP front ends for `refstd-core`.

pub mod api;
pub mod server;

pub use api::{ApiError, ApiResult};
