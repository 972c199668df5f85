//! Configured end-to-end runs: operational replay under observability
//! cutoffs, outputs and scores.

mod config;
mod cutoff;
mod replay;

pub use config::{default_variant, DebiasSettings, InputPaths, Methods, PipelineConfig, ScoringSettings};
pub use cutoff::{AccessGuard, CutoffRule, ObservabilityCutoff, RuleAvailability};
pub use replay::{
    evaluation_mask, prepare_replay, replay_prepared, run_pipeline, run_replay, run_replay_with, score_forecast,
    scores_json, write_outputs, DateParams, PreparedReplay, ReplayInputs, ReplayOutput,
};
