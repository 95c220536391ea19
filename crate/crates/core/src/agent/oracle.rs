use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backend::{BackendError, ModelBackend, ModelReply, ModelRequest};
use super::{AgentMemory, SPEAK};
use crate::call::{Literal, SkillCall};
use crate::connector::{GroundedPlan, MOVE_TOWARDS};
use crate::sim::{Goal, World};
use crate::skills::{LocomotionKind, LocomotionSkill, Magnitude, ManipulationSkillSpec, LARGE_TURN};
use crate::trace::Stage;
use crate::world::relative_angle_and_distance;
use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Plans composite `move_towards` calls instead of single steps.
    pub connector: bool,
    /// Probability that a single-step navigation choice is wrong.
    pub p_err: f64,
    /// Failed attempts at one manipulation skill before the planner stops trying.
    pub give_up_after: u32,
    pub seed: u64,
    /// Head pitch requested before manipulating.
    pub manip_pitch: f64,
}

impl OracleConfig {
    pub fn new(connector: bool, seed: u64) -> Self {
        OracleConfig { connector, p_err: if connector { 0.0 } else { 0.45 }, give_up_after: 2, seed, manip_pitch: 0.9 }
    }
}

/// Rule-based planner over ground truth that answers in the template formats.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    cfg: OracleConfig,
    rng: ChaCha8Rng,
    failures: BTreeMap<String, u32>,
}

/// What the next unfinished subprocess asks for.
enum Need<'a> {
    Done,
    Reach(String),
    Manipulate(&'a ManipulationSkillSpec),
    Stuck(String),
}

fn skill_for<'a>(w: &'a World, goal: &Goal) -> Option<&'a ManipulationSkillSpec> {
    w.registry.specs().find(|s| {
        let p = &s.precondition;
        match goal {
            Goal::Holding { item } => p.produces_held.as_ref() == Some(item),
            Goal::Placed { item, on } => p.requires_held.as_ref() == Some(item) && p.produces_held.is_none() && &s.target == on,
            Goal::Flag { name } => &s.name == name,
            Goal::Near { .. } => false,
        }
    })
}

fn need(w: &World) -> Need<'_> {
    let Some((_, sp)) = w.next_subprocess() else { return Need::Done };
    match &sp.goal {
        Goal::Near { object, .. } => Need::Reach(object.clone()),
        g => skill_for(w, g).map_or_else(|| Need::Stuck(sp.description.clone()), Need::Manipulate),
    }
}

/// Next landmark on the way to `object`: the object itself, or a doorway when it lies in another room.
fn waypoint(w: &World, object: &str) -> String {
    let Some(obj) = w.scene.object(object) else { return object.to_string() };
    let here = w.state.position();
    let (Some(from), Some(to)) = (w.scene.room_name(here), w.scene.room_name(obj.position)) else { return object.to_string() };
    match w.scene.route(from, to) {
        Some(route) if route.len() >= 2 => {
            let near = |name: &str| w.scene.object(name).is_some_and(|o| o.position.distance(here) <= 1.0);
            if near(route[0]) {
                route[1].to_string()
            } else {
                route[0].to_string()
            }
        }
        _ => object.to_string(),
    }
}

fn numbered(lines: &[String]) -> String {
    lines.iter().enumerate().map(|(i, l)| format!("{}. {l}", i + 1)).collect::<Vec<_>>().join("\n")
}

/// Distance inside which reach misjudgements can trigger a manipulation skill.
const APPROACH_ZONE: f64 = 5.0;

impl ScriptedOracle {
    pub fn new(cfg: OracleConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        ScriptedOracle { cfg, rng, failures: BTreeMap::new() }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    fn gave_up(&self, skill: &str) -> bool {
        self.failures.get(skill).is_some_and(|n| *n >= self.cfg.give_up_after)
    }

    /// Counts a failed manipulation attempt reported in memory.
    fn note_outcome(&mut self, w: &World, mem: &AgentMemory) {
        let (Some(call), Some(false)) = (&mem.last_action, mem.last_success) else { return };
        if w.registry.get(&call.name).is_none() {
            return;
        }
        let manipulation_failed =
            matches!(mem.last_plan, None | Some(GroundedPlan::ExecuteSkill { .. } | GroundedPlan::AskFm { .. } | GroundedPlan::Adjust { .. }));
        if manipulation_failed {
            *self.failures.entry(call.name.clone()).or_default() += 1;
        }
    }

    fn reflection(&mut self, w: &World, mem: &AgentMemory) -> String {
        self.note_outcome(w, mem);
        let total = w.subprocesses().len();
        let done = w.completed();
        let last = mem.last_action.as_ref().map_or("None".to_string(), |c| c.to_string());
        let error = mem.last_error.clone().unwrap_or_else(|| "It reported no error.".into());
        let detection = if w.all_done() { super::SUCCESS_TOKEN.to_string() } else { format!("Not yet: {} of {total} sub-processes remain.", total - done) };
        format!(
            "Self Reflection Reasoning:\n{}\nSuccess Detection:\n{detection}\n",
            numbered(&[format!("The last action was {last}."), error, format!("{done} of {total} sub-processes are complete.")])
        )
    }

    fn target_of(w: &World) -> Option<String> {
        match need(w) {
            Need::Reach(o) => Some(waypoint(w, &o)),
            Need::Manipulate(s) => Some(waypoint(w, &s.target)),
            Need::Done | Need::Stuck(_) => None,
        }
    }

    fn info(&self, w: &World, observation: &str) -> String {
        let lines: Vec<String> = observation.lines().map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
        let target = Self::target_of(w);
        let reason = match &target {
            Some(t) => format!("The current sub-process needs {t}."),
            None => "No target is needed.".into(),
        };
        let area = w.scene.room_name(w.state.position()).unwrap_or("unknown");
        format!(
            "Image Description:\n{}\nTarget Name:\n{}\nReasoning for Target:\n{reason}\nArea Location:\n{area}\n",
            numbered(&lines),
            target.as_deref().unwrap_or("null")
        )
    }

    fn subtask(&self, w: &World) -> String {
        let total = w.subprocesses().len();
        let (reasoning, subtask) = match w.next_subprocess() {
            Some((i, sp)) => (format!("Sub-process {} of {total} is not finished yet.", i + 1), sp.description.clone()),
            None => ("Every sub-process is finished.".into(), "Confirm the task is complete.".into()),
        };
        format!(
            "History_summary:\n{} of {total} sub-processes are complete.\nSubtask_reasoning:\n{reasoning}\nSubtask description:\n{subtask}\n",
            w.completed()
        )
    }

    fn speak(text: &str) -> SkillCall {
        SkillCall::new(SPEAK).keyword("text", Literal::Str(text.into()))
    }

    fn plan_with_connector(&self, w: &World) -> (SkillCall, String) {
        match need(w) {
            Need::Done => (SkillCall::new(LocomotionKind::NoAction.as_str()), "Nothing is left to do.".into()),
            Need::Stuck(d) => (Self::speak(&format!("I do not know how to {d}")), "No skill fits the sub-process.".into()),
            Need::Reach(o) => {
                let t = waypoint(w, &o);
                (SkillCall::new(MOVE_TOWARDS).keyword("target", Literal::Str(t.clone())), format!("Walk to {t}."))
            }
            Need::Manipulate(s) if self.gave_up(&s.name) => (Self::speak(&format!("I cannot {}", s.description)), "Repeated failures.".into()),
            Need::Manipulate(s) => {
                let t = waypoint(w, &s.target);
                if t != s.target {
                    return (SkillCall::new(MOVE_TOWARDS).keyword("target", Literal::Str(t.clone())), format!("Walk to {t} first."));
                }
                (SkillCall::new(&s.name), format!("Run {}.", s.name))
            }
        }
    }

    /// Single step toward a point; with probability `p_err` the choice is wrong.
    fn step_toward(&mut self, w: &World, goal: Point) -> (SkillCall, String) {
        let to = goal - w.state.position();
        let angle = crate::geom::wrap_angle(to.angle() - w.state.heading);
        let dist = to.norm();
        let wrong = self.rng.random::<f64>() < self.cfg.p_err;
        let far = dist > 1.5;
        let skill = match (angle.abs() > 0.25, wrong) {
            (true, false) => {
                let m = if angle.abs() > LARGE_TURN { Magnitude::Large } else { Magnitude::Small };
                LocomotionSkill::turn(angle > 0.0, m)
            }
            // Direction misjudged: walks on as if the target were ahead.
            (true, true) => LocomotionSkill::motion(LocomotionKind::GoStraight, Magnitude::Large),
            (false, false) => LocomotionSkill::motion(LocomotionKind::GoStraight, if far { Magnitude::Large } else { Magnitude::Small }),
            // Depth misjudged: overshoots when close.
            (false, true) => LocomotionSkill::motion(LocomotionKind::GoStraight, Magnitude::Large),
        };
        let call = crate::call::parse_action_call(&skill.to_string()).ok().flatten().expect("skills format as calls");
        (call, format!("The target is {dist:.1} m away at {angle:+.2} rad."))
    }

    fn plan_alone(&mut self, w: &World) -> (SkillCall, String) {
        match need(w) {
            Need::Done => (SkillCall::new(LocomotionKind::NoAction.as_str()), "Nothing is left to do.".into()),
            Need::Stuck(d) => (Self::speak(&format!("I do not know how to {d}")), "No skill fits the sub-process.".into()),
            Need::Reach(o) => {
                let t = waypoint(w, &o);
                match w.scene.object(&t) {
                    Some(obj) => self.step_toward(w, obj.position),
                    None => (Self::speak(&format!("I cannot find {t}")), "Unknown target.".into()),
                }
            }
            Need::Manipulate(s) if self.gave_up(&s.name) => (Self::speak(&format!("I cannot {}", s.description)), "Repeated failures.".into()),
            Need::Manipulate(s) => {
                let t = waypoint(w, &s.target);
                let Some(obj) = w.scene.object(&t) else {
                    return (Self::speak(&format!("I cannot find {t}")), "Unknown target.".into());
                };
                let (angle, dist) = relative_angle_and_distance(&w.state, obj);
                // Depth misjudged close to the target: tries the skill from where it stands.
                if t == s.target && dist < APPROACH_ZONE && self.rng.random::<f64>() < self.cfg.p_err {
                    return (SkillCall::new(&s.name), format!("{t} looks within reach."));
                }
                if t != s.target || dist > s.precondition.max_distance - 0.1 {
                    return self.step_toward(w, obj.position);
                }
                if angle.abs() > 0.3 {
                    return (
                        SkillCall::new(if angle > 0.0 { "turn_left" } else { "turn_right" }).positional(Literal::Str("small".into())),
                        format!("Face {t}."),
                    );
                }
                let [lo, hi] = s.precondition.pitch_range;
                if !(lo..=hi).contains(&w.state.head_pitch) && !w.camera_mode.is_fixed() {
                    return (SkillCall::new("tilt_head").keyword("pitch", Literal::Float(self.cfg.manip_pitch)), "Look down at the table.".into());
                }
                (SkillCall::new(&s.name), format!("Run {}.", s.name))
            }
        }
    }

    fn action(&mut self, w: &World, short: bool) -> String {
        let (call, reason) = if self.cfg.connector { self.plan_with_connector(w) } else { self.plan_alone(w) };
        let mut out = String::new();
        if short {
            let _ = write!(out, "Action:\n```python\n{call}\n```\n");
        } else {
            let _ = write!(
                out,
                "Decision_Making_Reasoning:\n1. {reason}\nActions:\n```python\n{call}\n```\nKey_reason_of_last_action:\n{reason}\n"
            );
        }
        out
    }
}

impl ModelBackend for ScriptedOracle {
    fn query(&mut self, req: &ModelRequest<'_>) -> Result<ModelReply, BackendError> {
        let w = req.world;
        let text = match req.stage {
            Stage::Reflection => self.reflection(w, req.memory),
            Stage::InfoGathering => self.info(w, req.observation),
            Stage::SubtaskProposal => self.subtask(w),
            Stage::ActionPlanning => self.action(w, !req.prompt.contains("Key_reason_of_last_action:")),
        };
        Ok(ModelReply { text, latency: w.latencies.fm_query })
    }
}
