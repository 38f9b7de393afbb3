//! Profiler runtime, file formats, the control-plane testbed and the CLI
//! built on [`adnprof_core`].

pub use adnprof_core as core;

pub mod coarse;
pub mod commands;
pub mod dump;
pub mod export;
pub mod instrument;
pub mod run;
pub mod scenario;
pub mod summary;
pub mod testbed;
