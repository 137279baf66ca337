//! Deterministic device/edge/cloud simulation.

mod config;
mod engine;
mod events;
mod metrics;

pub use config::{
    CloudUpdate, ConfigError, ConvergenceConfig, EnergyModel, LearnerConfig, Link, Mode, SimConfig, Topology,
    REFERENCE_NOISE,
};
pub use engine::{
    apply_grid_value, derive_seed, edge_node_id, matched_counts, pretrain, run_experiment, sweep, sweep_parallel,
    SimError, SweepParam,
};
pub use events::EventQueue;
pub use metrics::{detect_convergence, MetricsReport, RoundRecord, Summary, ROUND_COLUMNS};
