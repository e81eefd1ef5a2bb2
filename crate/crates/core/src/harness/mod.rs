//! Configuration, experiment orchestration and reporting.

pub mod aggregate;
pub mod complexity;
pub mod config;
pub mod experiments;
pub mod io;

pub use aggregate::{aggregate_tables, emit_plot_data, PlotRow};
pub use complexity::{complexity_report, complexity_sum, ComplexityReport};
pub use config::{env_overrides, load_config, ScenarioConfig};
pub use experiments::{arms, run_arm, run_experiment, Arm, Experiment, Policy, RunResult};
pub use io::write_atomic;
