//! Trace-driven simulation: configuration, workload generation, replay,
//! accounting and sweeps.

mod config;
mod engine;
mod ledger;
mod metrics;
mod sweep;
mod workload;

pub use config::*;
pub use engine::*;
pub use ledger::*;
pub use metrics::*;
pub use sweep::*;
pub use workload::*;
