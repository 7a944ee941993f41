//! Simulator for UAV-mounted beyond-diagonal IRS assisted mobile edge computing.

pub mod channel;
pub mod comm;
pub mod compute;
pub mod error;
pub mod harness;
pub mod irs;
pub mod linalg;
pub mod model;
pub mod orchestrator;
pub mod placement;
pub mod replay;

pub use error::{Error, Result, Stage};
