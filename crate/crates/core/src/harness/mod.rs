//! Run configuration, pipelines over the scenario catalog, convergence
//! sweeps and report output for the `hodgelab` binary.

mod config;
pub mod plot;
mod suite;
mod sweep;

pub use config::{parse_config, RunConfig, Tolerances};
pub use suite::{
    run_suite, stencil_step, test_directions, Check, CurvatureSummary, DirectionValue, FinslerSummary, IdentitiesSummary, Pipeline,
    RunOutcome, ScenarioSummary, Summary,
};
pub use sweep::{convergence_sweep, fit_order, SweepLevel, SweepParam, SweepTable};
