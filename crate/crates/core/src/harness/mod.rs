//! Replicated experiments, lemma validation and their on-disk outputs.
//!
//! Every run is seeded from a hash of (base seed, environment, strategy,
//! horizon, replication), so results do not depend on scheduling or on
//! which other runs a config contains.
//!
//! Output layout under `<output.dir>/<name>/`:
//!
//! * `traces/<strategy>_T<T>_r<rep>.csv`: columns `t,cum_regret`, every round
//!   up to `T = 10^5` and geometric checkpoints (ratio 1.01, plus the last
//!   round) beyond;
//! * `summary.json`: see [`ExperimentSummary`].

mod config;
mod experiment;
mod lemmas;
mod trace;

pub use config::{
    EnvSpec, ExperimentConfig, LemmaSpec, OutputSpec, StrategyKind, StrategySpec, DEFAULT_GAMMA, OUTPUT_DIR_ENV,
};
pub use experiment::{
    check_grid_round_trip, derive_seed, experiment_dir, fit_scaling_exponent, run_experiment, run_strategy,
    EnvSummary, ExperimentSummary, HorizonSummary, RunOutcome, RunRecord, SUMMARY_SCHEMA_VERSION,
    TRACE_SCHEMA_VERSION,
};
pub use lemmas::{estimation_suites, grid_bound_suite, validate_lemmas, LemmaCheck, LemmaReport, GRID_BOUND_SLACK};
pub use trace::{RegretTrace, CHECKPOINT_RATIO, FULL_TRACE_LIMIT};
