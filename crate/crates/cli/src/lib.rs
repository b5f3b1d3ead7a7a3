//! Command-line front end for `miattack-core`: single-instance solvers,
//! parameter sweeps emitting CSV, and plot-script generation.

pub mod app;
pub mod config;
pub mod error;
pub mod format;
pub mod plot;
pub mod sweep;

pub use config::{Preset, SweepConfig, SweepKind};
pub use error::{CliError, Result};
pub use plot::emit_plot_script;
pub use sweep::{run_bsc_sweep, run_projection_sweep, run_scalar_sweep, run_sweep, SweepRow, SweepTable};
