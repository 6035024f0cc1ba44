//! Scenario-driven replicate experiments and their file outputs.

pub mod config;
pub mod emit;
pub mod runner;
pub mod stats;

pub use config::{Budgets, LadderUnits, Scenario, StandardizationChoice};
pub use emit::{emit, load_result, load_rung};
pub use runner::{
    run_scenario, BoundRecord, Command, CovarianceRecord, DistanceRecord, Experiment, ExperimentResult, Prediction,
    Predictions, Provenance, RateRecord, RungRecord, StatisticRecord, TotalRecord, VERSION,
};
pub use stats::SlopeFit;
