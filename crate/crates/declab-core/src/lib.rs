//! Expectation-value decoherence dynamics of closed spin-bath systems, with
//! an exact dense oracle, closed-form kernels for large environments,
//! verdict analysis, and cosmological mode-function classicality
//! diagnostics.

pub mod analysis;
pub mod closedform;
pub mod cosmo;
pub mod error;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
