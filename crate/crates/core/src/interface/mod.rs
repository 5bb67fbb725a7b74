//! Command-line and HTTP front ends.

pub mod cli;
pub mod http;
