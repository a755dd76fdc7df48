//! Configuration, orchestration and file output for the `topt` binary.

pub mod commands;
pub mod config;
pub mod io;
pub mod plot;

pub use commands::{execute_run, execute_sweep, execute_verify_order, execute_w2, Problem};
pub use config::RunConfig;
