//! Library surface of the `declab` command-line tool: config parsing,
//! scenario construction, engine dispatch and artifact emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario;
pub mod svg;
