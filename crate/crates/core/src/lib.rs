//! Robust chance-constrained real-time dispatch under wind forecast
//! uncertainty: case ingestion, shift factors, moment-based counterparts,
//! RLT lifting, LP/cone solution and Monte Carlo risk validation.

pub mod case;
pub mod cli;
pub mod config;
pub mod drcc;
pub mod error;
pub mod model;
pub mod network;
pub mod risk;
pub mod rlt;
pub mod solver;
pub mod study;

pub use error::{Error, ErrorCategory, Result};
