use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{sample_start, Scenario, ScenarioError};
use crate::agent::{agent_step, AgentConfig, AgentError, AgentMemory, ModelBackend, OracleConfig, ScriptedOracle, StepOutcome};
use crate::gateway::{GatewayConfig, GatewayError, RemoteBackend};
use crate::sim::{sub_seed, CameraMode, Latencies, World, WorldInit};
use crate::trace::{EpisodeTrace, EventKind, Outcome, TraceHeader};
use crate::world::{NoiseModel, WorldError};

pub const STEP_BUDGET: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseOverrides {
    pub sigma_pos: f64,
    pub sigma_heading: f64,
}

fn yes() -> bool {
    true
}
fn default_budget() -> u32 {
    STEP_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub task: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub connector_enabled: bool,
    #[serde(default = "yes")]
    pub adjustment_enabled: bool,
    #[serde(default)]
    pub camera_mode: CameraMode,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub noise: Option<NoiseOverrides>,
    #[serde(default)]
    pub latency: Option<Latencies>,
    #[serde(default = "default_budget")]
    pub step_budget: u32,
    /// Oracle step-error probability; defaults by connector setting.
    #[serde(default)]
    pub p_err: Option<f64>,
    #[serde(default)]
    pub gateway: Option<GatewayConfig>,
}

impl EpisodeConfig {
    pub fn new(task: impl Into<String>, seed: u64) -> Self {
        EpisodeConfig {
            task: task.into(),
            seed,
            connector_enabled: true,
            adjustment_enabled: true,
            camera_mode: CameraMode::Active,
            backend: BackendKind::Oracle,
            noise: None,
            latency: None,
            step_budget: STEP_BUDGET,
            p_err: None,
            gateway: None,
        }
    }

    /// Ablation label, independent of task and seed.
    pub fn label(&self) -> String {
        let mut parts = vec![
            if self.connector_enabled { "connector" } else { "no-connector" }.to_string(),
            if self.adjustment_enabled { "adjust" } else { "no-adjust" }.to_string(),
            self.camera_mode.to_string(),
        ];
        if self.backend == BackendKind::Remote {
            parts.push("remote".into());
        }
        if let Some(p) = self.p_err {
            parts.push(format!("p_err={p}"));
        }
        if let Some(n) = self.noise {
            parts.push(format!("noise={}/{}", n.sigma_pos, n.sigma_heading));
        }
        if let Some(l) = self.latency {
            parts.push(format!("latency={}/{}", l.fm_query, l.connector_decision));
        }
        if self.step_budget != STEP_BUDGET {
            parts.push(format!("budget={}", self.step_budget));
        }
        parts.join("/")
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        if let CameraMode::Fixed(p) = self.camera_mode {
            if !(0.0..=crate::world::MAX_HEAD_PITCH).contains(&p) {
                return Err(EpisodeError::Config(format!("fixed pitch {p} outside [0, {}]", crate::world::MAX_HEAD_PITCH)));
            }
        }
        if self.p_err.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(EpisodeError::Config("p_err must lie in [0, 1]".into()));
        }
        if self.step_budget == 0 {
            return Err(EpisodeError::Config("step budget must be > 0".into()));
        }
        if self.backend == BackendKind::Remote && self.gateway.is_none() {
            return Err(EpisodeError::Config("remote backend needs a gateway endpoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("episode config: {0}")]
    Config(String),
}

/// Builds the world for `(task, cfg)` without running it.
pub fn build_world(scenario: &Scenario, cfg: &EpisodeConfig) -> Result<World, EpisodeError> {
    cfg.validate()?;
    let task = scenario.task(&cfg.task)?;
    let scene = scenario.scene_for(task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "start"));
    let start = sample_start(&scene, &task.start, &mut rng)?;
    let mut noise = NoiseModel { seed: sub_seed(cfg.seed, "noise"), ..NoiseModel::default() };
    if let Some(n) = cfg.noise {
        noise.sigma_pos = n.sigma_pos;
        noise.sigma_heading = n.sigma_heading;
    }
    let registry = Arc::new(scenario.registry()?);
    let header = TraceHeader { task: task.name.clone(), config: cfg.label(), seed: cfg.seed, subprocesses: Vec::new() };
    let mut w = World::new(WorldInit {
        scene,
        start,
        camera: scenario.camera,
        camera_mode: cfg.camera_mode,
        noise,
        registry,
        subprocesses: task.subprocesses.clone(),
        latencies: cfg.latency.unwrap_or_default(),
        header,
    })?;
    for p in &task.setup {
        w.place_on(&p.item, &p.on)?;
    }
    w.check_subprocesses();
    Ok(w)
}

pub fn agent_config(cfg: &EpisodeConfig) -> AgentConfig {
    AgentConfig { connector: cfg.connector_enabled, adjustment: cfg.adjustment_enabled, ..AgentConfig::default() }
}

/// Runs one episode with the backend named in `cfg`.
pub fn run_episode(scenario: &Scenario, cfg: &EpisodeConfig) -> Result<EpisodeTrace, EpisodeError> {
    match cfg.backend {
        BackendKind::Oracle => {
            let mut oc = OracleConfig::new(cfg.connector_enabled, sub_seed(cfg.seed, "oracle"));
            if let Some(p) = cfg.p_err {
                oc.p_err = p;
            }
            run_episode_with(scenario, cfg, &mut ScriptedOracle::new(oc))
        }
        BackendKind::Remote => {
            let gw = cfg.gateway.clone().ok_or_else(|| EpisodeError::Config("remote backend needs a gateway endpoint".into()))?;
            run_episode_with(scenario, cfg, &mut RemoteBackend::new(gw)?)
        }
    }
}

/// Runs one episode with a caller-supplied backend.
pub fn run_episode_with<B: ModelBackend + ?Sized>(scenario: &Scenario, cfg: &EpisodeConfig, backend: &mut B) -> Result<EpisodeTrace, EpisodeError> {
    let mut w = build_world(scenario, cfg)?;
    let instruction = scenario.task(&cfg.task)?.instruction.clone();
    let acfg = agent_config(cfg);
    let mut mem = AgentMemory::default();
    let mut ending = (Outcome::BudgetExhausted, format!("{} decisions used", cfg.step_budget));
    for _ in 0..cfg.step_budget {
        match agent_step(&mut w, &mut mem, backend, &acfg, &instruction) {
            Ok(StepOutcome::Finished) if w.all_done() => {
                ending = (Outcome::Success, "planner reported success".into());
                break;
            }
            Ok(StepOutcome::Finished) => {
                ending = (Outcome::FalseSuccess, format!("planner reported success with {} of {} subprocesses done", w.completed(), w.subprocesses().len()));
                break;
            }
            Ok(StepOutcome::Continue { .. }) => {}
            Err(e @ (AgentError::Backend(_) | AgentError::Parse { .. } | AgentError::MissingPlaceholder(_) | AgentError::Connector(_))) => {
                ending = (Outcome::Aborted, e.to_string());
                break;
            }
        }
    }
    let (outcome, reason) = ending;
    w.trace.push(EventKind::Terminate { outcome, reason });
    Ok(w.trace)
}
