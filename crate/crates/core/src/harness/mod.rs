//! Task suite, episode runner, ablation matrix and metrics.

mod episode;
mod experiment;
mod metrics;
mod scenario;

pub use episode::{agent_config, build_world, run_episode, run_episode_with, BackendKind, EpisodeConfig, EpisodeError, NoiseOverrides, STEP_BUDGET};
pub use experiment::{episode_seed, run_experiment, ExperimentResult, Matrix, DEFAULT_EPISODES};
pub use metrics::{compute_metrics, speed_cm_s, CellReport, EpisodeMetrics, MetricsReport};
pub use scenario::{sample_start, Placement, Scenario, ScenarioError, StartRegion, StartSpec, TaskSpec, OFFICE_JSON};
