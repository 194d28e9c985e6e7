//! Experiment orchestration: seeded runs, exact regret records, artifacts.
//!
//! Per episode the learner announces, the adversary decides, the oracle
//! evaluates the announced policy on the nominal and the episode model, the
//! trajectory is rolled out on the episode model and the learner observes it.

pub mod config;
pub mod csv;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{
    build_environment, build_learner, total_steps, AdversarySpec, BuiltEnvironment, EnvironmentSpec,
    ExperimentConfig, FeatureMode, LearnerSpec,
};
pub use self::csv::{emit_csv, read_csv, CSV_COLUMNS};
pub use plot::{emit_plot, render_svg};
pub use run::{
    run_experiment, run_replicate, run_replicate_with, stream_rng, write_artifacts, DiagnosticsBlock, EpisodeView,
    RegretRecord, ReplicateLog, RunOutput, SupervisorDiagnostics,
};
pub use sweep::{expand_grid, parse_grid, run_sweep, ParameterGrid};
