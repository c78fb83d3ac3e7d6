//! The multi-UAV data-collection environment: scenario configuration, the
//! per-slot simulator, and episode rollouts with or without learning.

mod config;
mod episode;
mod sim;

pub use config::{
    Access, ChannelConfig, Layout, MobilityConfig, OptimizerConfig, QueueConfig, RadioConfig, Scenario, ScenarioError,
    Scheme, Sweep, SCHEMA_VERSION,
};
pub use episode::{run_episode, EpisodeMetrics, EpisodeOptions, TraceRecord, EVAL_EPISODE_OFFSET};
pub use sim::{sample_layout, start_positions, Env, StepOutcome};
