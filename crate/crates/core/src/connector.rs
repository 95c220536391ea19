//! Grounding layer between the planner and the skill library: turns language
//! plans into executable skills and runs the closed-loop navigation behaviours
//! (approach, search, arc-shaped adjustment) from detections.

use serde::{Deserialize, Serialize};

use crate::call::{parse_action_call, Literal, SkillCall};
use crate::geom::wrap_angle;
use crate::sim::{CameraMode, World};
use crate::skills::{check_preconditions, LocomotionKind, LocomotionSkill, Magnitude, ManipulationSkillSpec, SkillError, Unmet};
use crate::trace::SkillSource;
use crate::world::{check_obstacle, CameraModel, Detection, RobotState, Side, MAX_HEAD_YAW};
use crate::Point;

/// Name of the composite approach skill offered to the planner.
pub const MOVE_TOWARDS: &str = "move_towards";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationParams {
    pub angle_threshold: f64,
    pub distance_threshold: f64,
    /// Iteration cap for `move_towards`.
    pub max_iterations: u32,
    /// Iteration cap for `search_for`; 14 large turns make one revolution.
    pub search_max_iterations: u32,
    pub adjust_max_iterations: u32,
    /// Turns are small when `|angle| <= turn_small_factor * angle_threshold`
    /// (or half a large turn, whichever is larger).
    pub turn_small_factor: f64,
    pub lookahead: f64,
    pub connector_latency: f64,
    /// Neck yaw offsets tried at each search heading (active camera only).
    pub head_sweep: Vec<f64>,
    pub nav_pitch: f64,
    pub manip_pitch: f64,
    /// Consecutive sidesteps before a corrective turn toward the target.
    pub max_sidesteps: u32,
    /// Largest polar step around the target per adjustment iteration, radians.
    pub arc_step: f64,
    /// Distance to the adjustment goal at which the body stops and rotates.
    pub capture_radius: f64,
}

impl Default for NavigationParams {
    fn default() -> Self {
        NavigationParams {
            angle_threshold: 0.1,
            distance_threshold: 0.8,
            max_iterations: 200,
            search_max_iterations: 14,
            adjust_max_iterations: 60,
            turn_small_factor: 2.0,
            lookahead: 0.6,
            connector_latency: 1.0,
            head_sweep: vec![-0.6, 0.0, 0.6],
            nav_pitch: 0.3,
            manip_pitch: 0.9,
            max_sidesteps: 3,
            arc_step: 0.6,
            capture_radius: 0.15,
        }
    }
}

impl NavigationParams {
    pub fn validate(&self) -> Result<(), ConnectorError> {
        let pos = [
            self.angle_threshold,
            self.distance_threshold,
            self.turn_small_factor,
            self.lookahead,
            self.arc_step,
            self.capture_radius,
        ];
        if pos.iter().any(|v| !(*v > 0.0)) || !(self.connector_latency >= 0.0) {
            return Err(ConnectorError::InvalidParams("thresholds must be > 0 and latency >= 0".into()));
        }
        if self.max_iterations == 0 || self.search_max_iterations == 0 || self.adjust_max_iterations == 0 {
            return Err(ConnectorError::InvalidParams("iteration caps must be >= 1".into()));
        }
        if self.head_sweep.iter().any(|y| y.abs() > MAX_HEAD_YAW) {
            return Err(ConnectorError::InvalidParams("head sweep outside neck range".into()));
        }
        Ok(())
    }

    /// Small turns up to `turn_small_factor * angle_threshold`, and never a large
    /// turn that would overshoot the bearing by more than it corrects.
    fn turn_magnitude(&self, angle: f64) -> Magnitude {
        let small_up_to = (self.turn_small_factor * self.angle_threshold).max(crate::skills::LARGE_TURN / 2.0);
        if angle.abs() <= small_up_to {
            Magnitude::Small
        } else {
            Magnitude::Large
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConnectorError {
    #[error("detection depth must be > 0, got {0}")]
    InvalidDepth(f64),
    #[error("invalid navigation parameters: {0}")]
    InvalidParams(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavStatus {
    Success,
    TargetLost,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavResult {
    pub status: NavStatus,
    pub iterations: u32,
    pub path_length: f64,
    pub elapsed: f64,
    pub final_state: RobotState,
}

/// Bearing (relative to the body, left positive) and distance of a detection.
pub fn estimate_target_pose(det: &Detection, cam: &CameraModel, head_yaw: f64) -> Result<(f64, f64), ConnectorError> {
    if !(det.depth > 0.0) {
        return Err(ConnectorError::InvalidDepth(det.depth));
    }
    Ok(((det.bbox.center_u() - 0.5) * cam.hfov + head_yaw, det.depth))
}

struct Run {
    t0: f64,
    d0: f64,
    iterations: u32,
}

impl Run {
    fn start(w: &World) -> Self {
        Run { t0: w.trace.now(), d0: w.trace.distance(), iterations: 0 }
    }

    fn finish(self, w: &World, status: NavStatus) -> NavResult {
        NavResult {
            status,
            iterations: self.iterations,
            path_length: w.trace.distance() - self.d0,
            elapsed: w.trace.now() - self.t0,
            final_state: w.state.clone(),
        }
    }
}

fn locomote(w: &mut World, skill: LocomotionSkill) -> Result<(), ConnectorError> {
    w.run_locomotion(&skill, SkillSource::Connector)?;
    Ok(())
}

/// Points the neck at `(yaw, pitch)`; no-op under a fixed camera or when already there.
fn set_head(w: &mut World, yaw: f64, pitch: f64) -> Result<(), ConnectorError> {
    if w.camera_mode.is_fixed() {
        return Ok(());
    }
    let yaw = yaw.clamp(-MAX_HEAD_YAW, MAX_HEAD_YAW);
    if (w.state.head_pitch - pitch).abs() > 1e-9 {
        locomote(w, LocomotionSkill::tilt_head(pitch))?;
    }
    if (w.state.head_yaw - yaw).abs() > 1e-9 {
        locomote(w, LocomotionSkill::turn_head(yaw))?;
    }
    Ok(())
}

fn find<'a>(dets: &'a [Detection], label: &str) -> Option<&'a Detection> {
    dets.iter().find(|d| d.label == label)
}

fn forward_step(distance_left: f64) -> Magnitude {
    use crate::skills::LARGE_STEP;
    if distance_left - LARGE_STEP >= 0.5 - 1e-9 {
        Magnitude::Large
    } else {
        Magnitude::Small
    }
}

/// Walks toward `target` from detections until within `distance_threshold`.
pub fn move_towards(w: &mut World, target: &str, p: &NavigationParams) -> Result<NavResult, ConnectorError> {
    let mut run = Run::start(w);
    let mut sidesteps = 0u32;
    while run.iterations < p.max_iterations {
        run.iterations += 1;
        if run.iterations == 1 {
            set_head(w, 0.0, p.nav_pitch)?;
        }
        let dets = w.detections();
        w.log_detection(&dets, Some(target));
        let Some(det) = find(&dets, target) else {
            w.charge_connector(p.connector_latency, "move_towards", "target not detected: stop");
            return Ok(run.finish(w, NavStatus::TargetLost));
        };
        let (angle, dist) = estimate_target_pose(det, &w.camera, w.state.head_yaw)?;
        if dist <= p.distance_threshold {
            w.charge_connector(p.connector_latency, "move_towards", format!("arrived at {dist:.2} m"));
            return Ok(run.finish(w, NavStatus::Success));
        }
        let obstacle = check_obstacle(&w.state, &w.scene, p.lookahead, &[target]);
        let (skill, reason) = match obstacle {
            Some(ob) if sidesteps < p.max_sidesteps => {
                sidesteps += 1;
                let away = ob.side.opposite();
                (LocomotionSkill::sidestep(away == Side::Left, Magnitude::Small), format!("obstacle {} on the {}", ob.name, ob.side.as_str()))
            }
            Some(ob) => {
                sidesteps = 0;
                let toward = if angle != 0.0 { Side::from_sign(angle) } else { ob.side.opposite() };
                (LocomotionSkill::turn(toward == Side::Left, Magnitude::Small), "corrective turn after sidesteps".to_string())
            }
            None => {
                sidesteps = 0;
                if angle.abs() > p.angle_threshold {
                    (LocomotionSkill::turn(angle > 0.0, p.turn_magnitude(angle)), format!("target at {angle:.2} rad"))
                } else {
                    (LocomotionSkill::motion(LocomotionKind::GoStraight, forward_step(dist)), format!("target {dist:.2} m ahead"))
                }
            }
        };
        w.charge_connector(p.connector_latency, "move_towards", reason);
        locomote(w, skill)?;
    }
    Ok(run.finish(w, NavStatus::Timeout))
}

/// Turns in place toward `direction`, sweeping the neck, until `target` is seen.
pub fn search_for(w: &mut World, target: &str, direction: Side, p: &NavigationParams) -> Result<NavResult, ConnectorError> {
    let mut run = Run::start(w);
    let sweep: Vec<f64> = if w.camera_mode.is_fixed() || p.head_sweep.is_empty() { vec![0.0] } else { p.head_sweep.clone() };
    while run.iterations < p.search_max_iterations {
        run.iterations += 1;
        w.charge_connector(p.connector_latency, "search", format!("looking for {target} to the {}", direction.as_str()));
        // Alternate the sweep order so consecutive headings share a neck pose.
        let order: Vec<f64> = if run.iterations.is_multiple_of(2) { sweep.iter().rev().copied().collect() } else { sweep.clone() };
        for yaw in order {
            set_head(w, yaw, p.nav_pitch)?;
            let dets = w.detections();
            w.log_detection(&dets, Some(target));
            if let Some(det) = find(&dets, target) {
                let (angle, _) = estimate_target_pose(det, &w.camera, w.state.head_yaw)?;
                if w.state.head_yaw != 0.0 {
                    if angle.abs() > p.angle_threshold {
                        locomote(w, LocomotionSkill::turn(angle > 0.0, p.turn_magnitude(angle)))?;
                    }
                    set_head(w, 0.0, p.nav_pitch)?;
                }
                return Ok(run.finish(w, NavStatus::Success));
            }
        }
        locomote(w, LocomotionSkill::turn(direction == Side::Left, Magnitude::Large))?;
    }
    Ok(run.finish(w, NavStatus::Timeout))
}

/// Distance from the target at which the adjustment parks the robot.
pub fn standoff(spec: &ManipulationSkillSpec, target_radius: f64) -> f64 {
    (spec.precondition.max_distance - 0.2).max(target_radius + 0.08)
}

/// Nominal body-frame displacement of a skill: forward, left, turn.
fn nominal_motion(skill: &LocomotionSkill) -> (f64, f64, f64) {
    match skill.to_command() {
        Some(c) => (c.v_forward * c.duration, c.v_lateral * c.duration, c.omega_turn * c.duration),
        None => (0.0, 0.0, 0.0),
    }
}

/// Re-expresses a body-frame point after the body moved by `(dx, dy, dth)`.
fn dead_reckon(p: Point, (dx, dy, dth): (f64, f64, f64)) -> Point {
    (p - Point::new(dx, dy)).rotate(-dth)
}

/// Arc-shaped approach that ends at the skill's standoff, facing the target's
/// alignment direction, with every precondition of `spec` satisfied.
pub fn adjust_approach(
    w: &mut World,
    spec: &ManipulationSkillSpec,
    direction: Side,
    p: &NavigationParams,
) -> Result<NavResult, ConnectorError> {
    let target = spec.target.clone();
    let obj = w.scene.object(&target).cloned().ok_or_else(|| ConnectorError::UnknownTarget(target.clone()))?;
    let stand = standoff(spec, obj.footprint_radius);
    let mut run = Run::start(w);
    // Target position in the body frame, kept by dead reckoning between sightings.
    let mut est: Option<Point> = None;
    // Head poses tried in order while the target has not been seen yet.
    let yaws = [0.0, direction.sign() * p.arc_step, -direction.sign() * p.arc_step];
    let scan: Vec<(f64, f64)> = [p.manip_pitch, p.nav_pitch].iter().flat_map(|&pitch| yaws.iter().map(move |&y| (y, pitch))).collect();
    while run.iterations < p.adjust_max_iterations {
        run.iterations += 1;
        let mut dets = Vec::new();
        for (look, pitch) in est.map_or(scan.clone(), |e| vec![(e.angle(), p.manip_pitch)]) {
            if (look - w.state.head_yaw).abs() > 0.1 || w.state.head_pitch != pitch {
                set_head(w, look, pitch)?;
            }
            dets = w.detections();
            w.log_detection(&dets, Some(&target));
            if let Some(det) = find(&dets, &target) {
                let (a, d) = estimate_target_pose(det, &w.camera, w.state.head_yaw)?;
                est = Some(Point::from_angle(a).scale(d));
                break;
            }
        }
        if check_preconditions(spec, &w.state, &obj, &dets).is_ok()
            && wrap_angle(obj.alignment_heading() - w.state.heading).abs() <= p.angle_threshold
        {
            w.charge_connector(p.connector_latency, "adjust", "in region and aligned: stop");
            return Ok(run.finish(w, NavStatus::Success));
        }
        let Some(item) = est else {
            w.charge_connector(p.connector_latency, "adjust", "target never localized");
            return Ok(run.finish(w, NavStatus::TargetLost));
        };
        let align = Point::from_angle(wrap_angle(obj.alignment_heading() - w.state.heading));
        let goal = item - align.scale(stand);
        let facing = align.angle();
        let (skill, reason) = if goal.norm() <= p.capture_radius {
            if facing.abs() <= p.angle_threshold {
                w.charge_connector(p.connector_latency, "adjust", "aligned but preconditions unmet");
                return Ok(run.finish(w, NavStatus::Timeout));
            }
            (LocomotionSkill::turn(facing > 0.0, p.turn_magnitude(facing)), format!("rotate to face alignment ({facing:.2} rad)"))
        } else {
            let waypoint = arc_waypoint(item, align, stand, direction, p.arc_step);
            let bearing = waypoint.angle();
            if bearing.abs() > p.angle_threshold {
                (LocomotionSkill::turn(bearing > 0.0, p.turn_magnitude(bearing)), format!("steer to arc waypoint ({bearing:.2} rad)"))
            } else {
                let step = if waypoint.norm() >= crate::skills::LARGE_STEP + 0.3 { Magnitude::Large } else { Magnitude::Small };
                (LocomotionSkill::motion(LocomotionKind::GoStraight, step), format!("follow arc, waypoint {:.2} m", waypoint.norm()))
            }
        };
        w.charge_connector(p.connector_latency, "adjust", reason);
        locomote(w, skill)?;
        est = Some(dead_reckon(item, nominal_motion(&skill)));
    }
    Ok(run.finish(w, NavStatus::Timeout))
}

/// Next point on the arc around `item` (body frame) toward the goal pose.
fn arc_waypoint(item: Point, align: Point, stand: f64, direction: Side, arc_step: f64) -> Point {
    let rel = -item;
    let r = rel.norm();
    let phi = rel.angle();
    let phi_goal = (-align).angle();
    let mut remaining = wrap_angle(phi_goal - phi) * direction.sign();
    if remaining < 0.0 {
        remaining += std::f64::consts::TAU;
    }
    let goal = item - align.scale(stand);
    if remaining <= arc_step || remaining >= std::f64::consts::TAU - 1e-9 {
        return goal;
    }
    let r_next = (r - 0.3).max(stand);
    item + Point::from_angle(phi + direction.sign() * arc_step).scale(r_next)
}

/// What the grounding layer decided for one planner output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum GroundedPlan {
    ExecuteSkill { call: SkillCall },
    Navigate { target: String },
    Search { target: String, direction: Side },
    Adjust { target: String, direction: Side, skill: String },
    ReportSuccess { target: String },
    AskFm { reason: String },
}

impl GroundedPlan {
    pub fn label(&self) -> String {
        match self {
            GroundedPlan::ExecuteSkill { call } => format!("execute {call}"),
            GroundedPlan::Navigate { target } => format!("navigate {target}"),
            GroundedPlan::Search { target, direction } => format!("search {target} {}", direction.as_str()),
            GroundedPlan::Adjust { target, direction, skill } => format!("adjust {target} {} for {skill}", direction.as_str()),
            GroundedPlan::ReportSuccess { target } => format!("report success {target}"),
            GroundedPlan::AskFm { reason } => format!("ask fm: {reason}"),
        }
    }

    pub fn is_navigation(&self) -> bool {
        matches!(self, GroundedPlan::Navigate { .. } | GroundedPlan::Search { .. })
    }
}

/// Planner intent recovered from a call or a short free-text plan.
#[derive(Debug, Clone, PartialEq)]
pub enum Intent {
    Manipulate(String),
    Reach(String),
    Locomotion(LocomotionSkill),
}

/// Turns a parsed call into a locomotion skill, if it names one.
pub fn locomotion_from_call(call: &SkillCall) -> Result<Option<LocomotionSkill>, SkillError> {
    let Ok(kind) = call.name.parse::<LocomotionKind>() else {
        return Ok(None);
    };
    let skill = if kind.takes_magnitude() {
        let m = call.arg("magnitude", 0).and_then(Literal::as_str).unwrap_or("small");
        LocomotionSkill::motion(kind, m.parse()?)
    } else if kind == LocomotionKind::TiltHead {
        let v = call.arg("pitch", 0).and_then(Literal::as_f64).ok_or_else(|| SkillError::InvalidSkill("tilt_head needs pitch".into()))?;
        LocomotionSkill::tilt_head(v)
    } else if kind == LocomotionKind::TurnHead {
        let v = call.arg("yaw", 0).and_then(Literal::as_f64).ok_or_else(|| SkillError::InvalidSkill("turn_head needs yaw".into()))?;
        LocomotionSkill::turn_head(v)
    } else {
        LocomotionSkill::no_action()
    };
    skill.validate()?;
    Ok(Some(skill))
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_ascii_lowercase).collect()
}

/// Resolves a free-text object mention to a scene object name.
fn resolve_object(w: &World, mention: &str) -> Option<String> {
    if w.scene.object(mention).is_some() {
        return Some(mention.to_string());
    }
    let wanted = words(mention);
    let mut hits = w.scene.objects.iter().filter(|o| {
        let name = words(&o.name);
        !wanted.is_empty() && wanted.iter().any(|m| name.contains(m))
    });
    let first = hits.next()?;
    hits.next().is_none().then(|| first.name.clone())
}

const REACH_VERBS: [&str; 6] = ["find", "go", "navigate", "reach", "approach", "walk"];

/// Interprets a planner output: a call in the action grammar or short free text.
pub fn interpret_plan(plan: &str, w: &World) -> Result<Intent, String> {
    let plan = plan.trim();
    if let Ok(Some(call)) = parse_action_call(plan) {
        if call.name == MOVE_TOWARDS {
            let t = call.arg("target", 0).and_then(Literal::as_str).ok_or("move_towards needs a target")?;
            return resolve_object(w, t).map(Intent::Reach).ok_or_else(|| format!("unknown target `{t}`"));
        }
        if let Some(skill) = locomotion_from_call(&call).map_err(|e| e.to_string())? {
            return Ok(Intent::Locomotion(skill));
        }
        return w.registry.lookup(&call.name).map(|s| Intent::Manipulate(s.name.clone())).map_err(|e| e.to_string());
    }
    if let Ok(spec) = w.registry.lookup(plan) {
        return Ok(Intent::Manipulate(spec.name.clone()));
    }
    let ws = words(plan);
    let mut specs = w.registry.specs().filter(|s| {
        let name = words(&s.name.replace('_', " "));
        name.iter().all(|n| ws.contains(n))
    });
    if let Some(s) = specs.next() {
        if specs.next().is_none() {
            return Ok(Intent::Manipulate(s.name.clone()));
        }
    }
    if ws.first().is_some_and(|v| REACH_VERBS.contains(&v.as_str())) {
        let rest = ws[1..].join(" ");
        return resolve_object(w, &rest).map(Intent::Reach).ok_or_else(|| format!("no scene object matches `{rest}`"));
    }
    Err(format!("cannot ground plan `{plan}`"))
}

fn search_direction(w: &World, label: &str) -> Side {
    match w.last_seen_bearing(label) {
        Some(b) => {
            let rel = wrap_angle(b - w.state.heading);
            if rel > 0.0 {
                Side::Left
            } else {
                Side::Right
            }
        }
        None => Side::Right,
    }
}

/// Decides how to realise a planner output in the current situation.
pub fn ground_plan(plan: &str, dets: &[Detection], w: &World, p: &NavigationParams, adjustment: bool) -> GroundedPlan {
    let intent = match interpret_plan(plan, w) {
        Ok(i) => i,
        Err(reason) => return GroundedPlan::AskFm { reason },
    };
    match intent {
        Intent::Locomotion(skill) => GroundedPlan::ExecuteSkill { call: parse_action_call(&skill.to_string()).ok().flatten().expect("skills format as calls") },
        Intent::Reach(target) => match find(dets, &target) {
            Some(d) if d.depth <= p.distance_threshold => GroundedPlan::ReportSuccess { target },
            Some(_) => GroundedPlan::Navigate { target },
            None => GroundedPlan::Search { direction: search_direction(w, &target), target },
        },
        Intent::Manipulate(name) => ground_manipulation(&name, dets, w, p, adjustment),
    }
}

fn ground_manipulation(name: &str, dets: &[Detection], w: &World, p: &NavigationParams, adjustment: bool) -> GroundedPlan {
    let spec = w.registry.get(name).expect("interpreted from registry");
    let Some(obj) = w.scene.object(&spec.target) else {
        return GroundedPlan::AskFm { reason: format!("`{}` is not in the scene", spec.target) };
    };
    let unmet = match check_preconditions(spec, &w.state, obj, dets) {
        Ok(()) => return GroundedPlan::ExecuteSkill { call: SkillCall::new(name) },
        Err(u) => u,
    };
    if let Unmet::HeldMismatch { .. } = unmet {
        return GroundedPlan::AskFm { reason: unmet.to_string() };
    }
    let pitch_ok = |pitch: f64| pitch >= spec.precondition.pitch_range[0] && pitch <= spec.precondition.pitch_range[1];
    if let CameraMode::Fixed(pitch) = w.camera_mode {
        if !pitch_ok(pitch) {
            return GroundedPlan::AskFm { reason: format!("{unmet}; the camera is fixed at pitch {pitch:.2}") };
        }
    }
    let landmark = w.scene.landmark_for(&spec.target).map_or(spec.target.clone(), |l| l.name.clone());
    let seen = find(dets, &landmark).or_else(|| find(dets, &spec.target));
    let Some(seen) = seen else {
        return GroundedPlan::Search { direction: search_direction(w, &landmark), target: landmark };
    };
    if seen.depth > p.distance_threshold {
        return GroundedPlan::Navigate { target: seen.label.clone() };
    }
    if adjustment {
        let direction = Side::from_sign(wrap_angle(obj.alignment_heading() - w.state.heading));
        return GroundedPlan::Adjust { target: spec.target.clone(), direction, skill: name.to_string() };
    }
    match unmet {
        Unmet::PitchOutOfRange { .. } | Unmet::TargetNotVisible { .. } if !w.camera_mode.is_fixed() && !pitch_ok(w.state.head_pitch) => {
            GroundedPlan::ExecuteSkill { call: SkillCall::new("tilt_head").keyword("pitch", Literal::Float(p.manip_pitch)) }
        }
        _ => GroundedPlan::AskFm { reason: unmet.to_string() },
    }
}

/// Result of carrying out a grounded plan, fed back to the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub success: bool,
    pub summary: String,
    pub error: Option<String>,
}

/// Carries out a grounded plan; composite behaviours run to completion.
pub fn execute_plan(w: &mut World, plan: &GroundedPlan, p: &NavigationParams) -> Result<Execution, ConnectorError> {
    let nav = |r: NavResult, what: String| {
        let ok = r.status == NavStatus::Success;
        Execution {
            success: ok,
            summary: format!("{what}: {:?} after {} iterations, {:.2} m", r.status, r.iterations, r.path_length),
            error: (!ok).then(|| format!("{what} ended with {:?}", r.status)),
        }
    };
    Ok(match plan {
        GroundedPlan::ExecuteSkill { call } => execute_call(w, call, SkillSource::Connector)?,
        GroundedPlan::Navigate { target } => nav(move_towards(w, target, p)?, format!("move_towards({target})")),
        GroundedPlan::Search { target, direction } => nav(search_for(w, target, *direction, p)?, format!("search({target})")),
        GroundedPlan::Adjust { direction, skill, target } => {
            let spec = w.registry.lookup(skill)?.clone();
            nav(adjust_approach(w, &spec, *direction, p)?, format!("adjust({target})"))
        }
        GroundedPlan::ReportSuccess { target } => {
            Execution { success: true, summary: format!("already at {target}"), error: None }
        }
        GroundedPlan::AskFm { reason } => Execution { success: false, summary: "deferred to planner".into(), error: Some(reason.clone()) },
    })
}

/// Runs a locomotion or manipulation call directly.
pub fn execute_call(w: &mut World, call: &SkillCall, source: SkillSource) -> Result<Execution, ConnectorError> {
    if let Some(skill) = locomotion_from_call(call)? {
        let out = w.run_locomotion(&skill, source)?;
        let error = out.collision.as_ref().map(|c| format!("collided with {}", c.obstacle));
        return Ok(Execution { success: error.is_none(), summary: format!("{skill} done"), error });
    }
    let out = w.run_manipulation(&call.name, source)?;
    use crate::skills::SkillStatus;
    Ok(match out.status {
        SkillStatus::Success => Execution { success: true, summary: format!("{} succeeded", call.name), error: None },
        SkillStatus::Failure { reason } => Execution { success: false, summary: format!("{} failed", call.name), error: Some(reason) },
        SkillStatus::PreconditionUnmet { unmet } => {
            Execution { success: false, summary: format!("{} not started", call.name), error: Some(unmet.to_string()) }
        }
    })
}
