//! Command line and HTTP front ends for the `sqlclarify` engine.

pub mod api;
pub mod cli;
pub mod explain;
