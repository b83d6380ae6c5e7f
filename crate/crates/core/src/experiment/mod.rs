//! Configuration, per-repetition scenarios and sweep drivers.

mod config;
mod scenario;

pub use config::{DeltaE, ExperimentConfig, Sweep, SweepAxis, AUTO_DELTA_E_BINS, AUTO_DELTA_E_FRACTION};
pub use scenario::{
    build_scenario, build_scenario_pinned, evaluate_capacity, resolve_delta_e, run_capacity_sweep, solver_options, FieldCache, Scenario,
    SweepPoint,
};
