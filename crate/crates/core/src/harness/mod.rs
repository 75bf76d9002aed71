//! Experiment runner: configuration, presets, Monte Carlo loop and output.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, OutputConfig, Sweep, SweepPoint};
pub use output::{summarize, write_outputs, write_rates, write_summary, write_trace, SummaryRow};
pub use presets::{preset, PRESETS};
pub use run::{mean_se, paired_difference, r_eff_by_drop, run_experiment, simulate_drop, BlockRecord, ExperimentResult, RateRow, Stat};
