//! Handover experiments over the four access technologies: building the
//! scenarios, running them on the simulator, and measuring losses, wasted
//! capacity and fairness against TCP.

pub mod error;
pub mod handover;
pub mod metrics;
pub mod profile;
pub mod sweep;

pub use error::{Error, Result};
pub use handover::{
    base_scenario, build_handover_scenario, run_handover, run_plan, HandoverPlan, HandoverRun,
    worst_rtt, Horizon, Lab, RENO_FLOW, TFRC_FLOW,
};
pub use metrics::{
    backoff_shape, fairness_ratio, measure_losses, measure_wasted, restoration, Backoff,
    Restoration, Waste,
};
pub use profile::{link_for, Variant};
pub use sweep::{aggregate, run_cell, sweep, write_matrix, write_rows, CellSummary, Metric, RunRow, SweepOptions};
pub use tfrc_core::Technology;
