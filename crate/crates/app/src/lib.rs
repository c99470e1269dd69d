//! Command-line front end and HTTP service for vizkg models.

pub mod cli;
pub mod service;
pub mod store;
