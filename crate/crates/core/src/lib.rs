//! Discrete-event simulation of a cluster running one large training job
//! under random and systematic server failures.
//!
//! A run models host selection, warm standbys, checkpoint recovery, the
//! automated and manual repair pipeline, spare-pool preemption and job
//! stalls. [`experiment`] sweeps one or two parameters with replications
//! and [`output`] writes the results as CSV.

pub mod cluster;
pub mod config;
pub mod error;
pub mod experiment;
pub mod job;
pub mod kernel;
pub mod output;
pub mod params;
pub mod repair;
pub mod sim;
pub mod stats;

pub use config::{parse_config, to_config_string};
pub use error::{ConfigError, OutputError, SimError};
pub use experiment::{run_sweep, run_sweep_with, Execution, Metric, SweepAxis, SweepResult, SweepSpec};
pub use output::write_results;
pub use params::{ParamKey, SimParams};
pub use sim::{run_simulation, RunOptions, RunResult, Simulation};
pub use stats::{summarize, StatsSummary};
