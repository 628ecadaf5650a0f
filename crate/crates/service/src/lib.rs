//! Quota-enforcing namespace service: persistence, scanning, REST API and admin CLI.

pub mod cache;
pub mod cli;
pub mod config;
pub mod harness;
pub mod rest;
pub mod scanner;
pub mod service;
pub mod store;
pub mod wire;

pub use scanner::Scanner;
pub use service::{CreateStats, QuotaService, ServiceError, ServiceOptions};
