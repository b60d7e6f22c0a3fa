//! Live session server and headless commands behind the `pointgo` binary.

pub mod coalesce;
pub mod headless;
pub mod protocol;
pub mod server;

pub use server::{ServeConfig, ServeSummary, Server};
