//! Planner loop: four prompt stages per decision, memory between decisions,
//! strict response parsing and hand-off to the grounding layer.

mod backend;
mod oracle;
mod parse;
mod prompt;

pub use backend::{BackendError, ModelBackend, ModelReply, ModelRequest};
pub use oracle::{OracleConfig, ScriptedOracle};
pub use parse::{fenced_code, parse_stage, ParseError, StageResult, SUCCESS_TOKEN};
pub use prompt::{placeholders, render_prompt, template, PromptContext};

use serde::{Deserialize, Serialize};

use crate::call::SkillCall;
use crate::connector::{estimate_target_pose, execute_call, execute_plan, ground_plan, ConnectorError, Execution, GroundedPlan, NavigationParams, MOVE_TOWARDS};
use crate::sim::World;
use crate::skills::SkillError;
use crate::trace::{hex_digest, SkillSource, Stage};
use crate::world::Detection;

/// Call the planner may emit to talk; logged, never executed.
pub const SPEAK: &str = "speak";

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("prompt slot `{0}` is empty")]
    MissingPlaceholder(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not parse {stage:?} reply: {source}")]
    Parse { stage: Stage, source: ParseError },
    #[error(transparent)]
    Connector(#[from] ConnectorError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub history_summary: String,
    pub last_action: Option<SkillCall>,
    pub key_reason: String,
    pub last_reflection: String,
    pub subtask: String,
    pub subtask_reasoning: String,
    pub area_location: String,
    pub fm_query_count: u32,
    pub holding_status: String,
    pub image_description: String,
    pub target_name: Option<String>,
    pub last_error: Option<String>,
    /// Outcome of the last executed action, fed to the next reflection.
    pub last_success: Option<bool>,
    /// Text placed in the success-detection slot.
    pub success_detection: String,
    pub last_plan: Option<GroundedPlan>,
    pub report_success_streak: u32,
    pub last_observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub connector: bool,
    pub adjustment: bool,
    pub nav: NavigationParams,
    pub short_action: bool,
    pub few_shots: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { connector: true, adjustment: true, nav: NavigationParams::default(), short_action: false, few_shots: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Reflection reported the task finished.
    Finished,
    Continue { plan: Option<GroundedPlan>, execution: Execution },
}

/// One line per detection: label, body-frame bearing, depth.
pub fn detections_summary(dets: &[Detection], w: &World) -> String {
    if dets.is_empty() {
        return "nothing detected".into();
    }
    dets.iter()
        .map(|d| {
            let bearing = estimate_target_pose(d, &w.camera, w.state.head_yaw).map_or(0.0, |(a, _)| a);
            format!("{}  bearing={:+.2}  depth={:.2}", d.label, bearing, d.depth)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn skill_library(w: &World, connector: bool) -> String {
    let extra = [(MOVE_TOWARDS, format!("{MOVE_TOWARDS}(target)  # walk to a named object or landmark until close"))];
    let speak = [(SPEAK, format!("{SPEAK}(text)  # say something; does not move the robot"))];
    let mut all: Vec<(&str, String)> = speak.to_vec();
    if connector {
        all.extend(extra);
    }
    w.registry.render_with(&all)
}

fn holding_status(w: &World) -> String {
    match &w.state.held_item {
        Some(i) => format!("Holding {i}."),
        None => "Not holding anything.".into(),
    }
}

struct Session<'a, B: ModelBackend + ?Sized> {
    w: &'a mut World,
    mem: &'a mut AgentMemory,
    backend: &'a mut B,
    cfg: &'a AgentConfig,
    task: &'a str,
    observation: String,
    image_same: bool,
}

impl<B: ModelBackend + ?Sized> Session<'_, B> {
    fn ask(&mut self, stage: Stage) -> Result<StageResult, AgentError> {
        let ctx = PromptContext {
            stage,
            task_description: self.task.to_string(),
            memory: self.mem,
            semantic_map: self.w.scene.semantic_map.clone(),
            detections_summary: self.observation.clone(),
            skill_library_render: skill_library(self.w, self.cfg.connector),
            image_same_flag: self.image_same,
            few_shots: self.cfg.few_shots.clone(),
            short_action: self.cfg.short_action,
        };
        let prompt = render_prompt(&ctx)?;
        let req = ModelRequest { stage, prompt: &prompt, observation: &self.observation, world: self.w, memory: self.mem };
        let reply = self.backend.query(&req)?;
        self.mem.fm_query_count += 1;
        let parsed = parse_stage(stage, &reply.text);
        let value = match &parsed {
            Ok(r) => serde_json::to_value(r).expect("stage results serialize"),
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        self.w.charge_fm(stage, hex_digest(prompt.as_bytes()), reply.text, reply.latency, value);
        parsed.map_err(|source| AgentError::Parse { stage, source })
    }
}

fn soft(e: ConnectorError) -> Result<Execution, AgentError> {
    match e {
        ConnectorError::Skill(SkillError::UnknownSkill(_) | SkillError::InvalidSkill(_)) | ConnectorError::UnknownTarget(_) => {
            Ok(Execution { success: false, summary: "action rejected".into(), error: Some(e.to_string()) })
        }
        other => Err(other.into()),
    }
}

/// One planner decision: reflect, gather, propose a subtask, plan an action, execute it.
pub fn agent_step<B: ModelBackend + ?Sized>(
    w: &mut World,
    mem: &mut AgentMemory,
    backend: &mut B,
    cfg: &AgentConfig,
    task: &str,
) -> Result<StepOutcome, AgentError> {
    let nav = w.next_subprocess().is_some_and(|(_, sp)| sp.goal.is_navigation());
    w.trace.begin_decision(nav);
    let dets = w.detections();
    w.log_detection(&dets, mem.target_name.as_deref());
    let observation = detections_summary(&dets, w);
    let image_same = observation == mem.last_observation;
    mem.last_observation = observation.clone();
    mem.holding_status = holding_status(w);

    let mut s = Session { w, mem, backend, cfg, task, observation, image_same };

    let StageResult::Reflection { reasoning, success_detected, .. } = s.ask(Stage::Reflection)? else { unreachable!() };
    s.mem.last_reflection = reasoning;
    if success_detected {
        return Ok(StepOutcome::Finished);
    }

    let StageResult::InfoGathering { image_description, target_name, area_location, .. } = s.ask(Stage::InfoGathering)? else {
        unreachable!()
    };
    s.mem.image_description = image_description;
    s.mem.target_name = target_name;
    s.mem.area_location = area_location;

    let StageResult::SubtaskProposal { history_summary, subtask_reasoning, subtask } = s.ask(Stage::SubtaskProposal)? else {
        unreachable!()
    };
    s.mem.history_summary = history_summary;
    s.mem.subtask_reasoning = subtask_reasoning;
    s.mem.subtask = subtask;

    let StageResult::ActionPlanning { action, key_reason, .. } = s.ask(Stage::ActionPlanning)? else { unreachable!() };
    s.mem.key_reason = key_reason;

    let w = s.w;
    let mem = s.mem;
    let (plan, execution) = match &action {
        None => (None, Execution { success: true, summary: "no action".into(), error: None }),
        Some(call) if call.name == SPEAK => (None, Execution { success: true, summary: format!("said {call}"), error: None }),
        Some(call) if cfg.connector => {
            let plan = ground_plan(&call.to_string(), &dets, w, &cfg.nav, cfg.adjustment);
            w.charge_connector(cfg.nav.connector_latency, "ground", plan.label());
            let ex = execute_plan(w, &plan, &cfg.nav).or_else(soft)?;
            (Some(plan), ex)
        }
        Some(call) if call.name == MOVE_TOWARDS => {
            (None, Execution { success: false, summary: "action rejected".into(), error: Some(format!("{MOVE_TOWARDS} is not available")) })
        }
        Some(call) => (None, execute_call(w, call, SkillSource::Fm).or_else(soft)?),
    };

    let repeated = matches!(&plan, Some(p @ GroundedPlan::ReportSuccess { .. }) if mem.last_plan.as_ref() == Some(p));
    mem.report_success_streak = match &plan {
        Some(GroundedPlan::ReportSuccess { .. }) if repeated => mem.report_success_streak + 1,
        Some(GroundedPlan::ReportSuccess { .. }) => 1,
        _ => 0,
    };
    mem.success_detection = if mem.report_success_streak >= 2 {
        "The current subtask is already complete. Propose the next subtask.".into()
    } else {
        match &plan {
            Some(GroundedPlan::ReportSuccess { target }) => format!("The last action succeeded: {target} has been reached."),
            _ if execution.success => "The last action succeeded.".into(),
            _ => "The last action did not succeed.".into(),
        }
    };
    mem.last_action = action;
    mem.last_error = execution.error.clone();
    mem.last_success = Some(execution.success);
    mem.last_plan = plan.clone();
    mem.holding_status = holding_status(w);
    Ok(StepOutcome::Continue { plan, execution })
}
