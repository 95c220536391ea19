use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::{
    step_locomotion, CollisionEvent, JoystickCommand, Mode, NoiseStream, RobotState, SceneMap, MAX_HEAD_PITCH, MAX_HEAD_YAW, TICK_S,
};

use super::SkillError;

pub const SMALL_TURN: f64 = 0.15;
pub const LARGE_TURN: f64 = 0.45;
pub const SMALL_STEP: f64 = 0.3;
pub const LARGE_STEP: f64 = 0.9;

/// Forward walking speed. Together with the step sizes this fixes skill durations
/// (0.3 m -> 1.0 s, 0.9 m -> 3.0 s), both whole tick counts.
pub const WALK_SPEED: f64 = 0.3;
pub const SIDESTEP_SPEED: f64 = 0.3;
/// Turning rate; 0.15 rad takes two ticks, 0.45 rad six.
pub const TURN_RATE: f64 = 0.375;
/// Duration of a neck move or an idle tick.
pub const HEAD_MOVE_S: f64 = TICK_S;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocomotionKind {
    NoAction,
    GoStraight,
    WalkBackwards,
    TurnLeft,
    TurnRight,
    SidestepLeft,
    SidestepRight,
    TiltHead,
    TurnHead,
}

impl LocomotionKind {
    pub const ALL: [LocomotionKind; 9] = [
        LocomotionKind::NoAction,
        LocomotionKind::GoStraight,
        LocomotionKind::WalkBackwards,
        LocomotionKind::TurnLeft,
        LocomotionKind::TurnRight,
        LocomotionKind::SidestepLeft,
        LocomotionKind::SidestepRight,
        LocomotionKind::TiltHead,
        LocomotionKind::TurnHead,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocomotionKind::NoAction => "no_action",
            LocomotionKind::GoStraight => "go_straight",
            LocomotionKind::WalkBackwards => "walk_backwards",
            LocomotionKind::TurnLeft => "turn_left",
            LocomotionKind::TurnRight => "turn_right",
            LocomotionKind::SidestepLeft => "sidestep_left",
            LocomotionKind::SidestepRight => "sidestep_right",
            LocomotionKind::TiltHead => "tilt_head",
            LocomotionKind::TurnHead => "turn_head",
        }
    }

    pub fn is_head(self) -> bool {
        matches!(self, LocomotionKind::TiltHead | LocomotionKind::TurnHead)
    }

    pub fn takes_magnitude(self) -> bool {
        !self.is_head() && self != LocomotionKind::NoAction
    }

    /// Python-style signature used in the rendered action set.
    pub fn signature(self) -> &'static str {
        match self {
            LocomotionKind::NoAction => "no_action()  # stand still for one tick",
            LocomotionKind::GoStraight => "go_straight(magnitude)  # walk forward; \"small\" = 0.3 m, \"large\" = 0.9 m",
            LocomotionKind::WalkBackwards => "walk_backwards(magnitude)  # walk backward; \"small\" = 0.3 m, \"large\" = 0.9 m",
            LocomotionKind::TurnLeft => "turn_left(magnitude)  # rotate in place; \"small\" = 0.15 rad, \"large\" = 0.45 rad",
            LocomotionKind::TurnRight => "turn_right(magnitude)  # rotate in place; \"small\" = 0.15 rad, \"large\" = 0.45 rad",
            LocomotionKind::SidestepLeft => "sidestep_left(magnitude)  # step sideways; \"small\" = 0.3 m, \"large\" = 0.9 m",
            LocomotionKind::SidestepRight => "sidestep_right(magnitude)  # step sideways; \"small\" = 0.3 m, \"large\" = 0.9 m",
            LocomotionKind::TiltHead => "tilt_head(pitch)  # set neck pitch in radians, 0 = level, positive = down",
            LocomotionKind::TurnHead => "turn_head(yaw)  # set neck yaw in radians, positive = left",
        }
    }
}

impl fmt::Display for LocomotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocomotionKind {
    type Err = SkillError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LocomotionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SkillError::UnknownSkill(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Small,
    Large,
}

impl Magnitude {
    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Small => "small",
            Magnitude::Large => "large",
        }
    }
}

impl FromStr for Magnitude {
    type Err = SkillError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(Magnitude::Small),
            "large" => Ok(Magnitude::Large),
            other => Err(SkillError::InvalidSkill(format!("unknown magnitude `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocomotionSkill {
    pub kind: LocomotionKind,
    pub magnitude: Option<Magnitude>,
    /// Pitch for `tilt_head`, yaw for `turn_head`.
    pub head_target: Option<f64>,
}

impl LocomotionSkill {
    pub fn motion(kind: LocomotionKind, magnitude: Magnitude) -> Self {
        LocomotionSkill { kind, magnitude: Some(magnitude), head_target: None }
    }

    pub fn no_action() -> Self {
        LocomotionSkill { kind: LocomotionKind::NoAction, magnitude: None, head_target: None }
    }

    pub fn tilt_head(pitch: f64) -> Self {
        LocomotionSkill { kind: LocomotionKind::TiltHead, magnitude: None, head_target: Some(pitch) }
    }

    pub fn turn_head(yaw: f64) -> Self {
        LocomotionSkill { kind: LocomotionKind::TurnHead, magnitude: None, head_target: Some(yaw) }
    }

    pub fn turn(left: bool, magnitude: Magnitude) -> Self {
        let kind = if left { LocomotionKind::TurnLeft } else { LocomotionKind::TurnRight };
        Self::motion(kind, magnitude)
    }

    pub fn sidestep(left: bool, magnitude: Magnitude) -> Self {
        let kind = if left { LocomotionKind::SidestepLeft } else { LocomotionKind::SidestepRight };
        Self::motion(kind, magnitude)
    }

    pub fn validate(&self) -> Result<(), SkillError> {
        let k = self.kind;
        if k.is_head() != self.head_target.is_some() {
            return Err(SkillError::InvalidSkill(format!("{k}: head target present iff head skill")));
        }
        if k.takes_magnitude() != self.magnitude.is_some() {
            return Err(SkillError::InvalidSkill(format!("{k}: magnitude present iff motion skill")));
        }
        if let Some(v) = self.head_target {
            let limit = if k == LocomotionKind::TiltHead { 0.0..=MAX_HEAD_PITCH } else { -MAX_HEAD_YAW..=MAX_HEAD_YAW };
            if !limit.contains(&v) {
                return Err(SkillError::InvalidSkill(format!("{k}: target {v} outside {limit:?}")));
            }
        }
        Ok(())
    }

    /// Joystick command for body motions; `None` for head moves and idling.
    pub fn to_command(&self) -> Option<JoystickCommand> {
        let mag = self.magnitude?;
        let (dist, angle) = match mag {
            Magnitude::Small => (SMALL_STEP, SMALL_TURN),
            Magnitude::Large => (LARGE_STEP, LARGE_TURN),
        };
        let walk = |v: f64| JoystickCommand { v_forward: v, duration: dist / WALK_SPEED, ..Default::default() };
        let side = |v: f64| JoystickCommand { v_lateral: v, duration: dist / SIDESTEP_SPEED, ..Default::default() };
        let turn = |w: f64| JoystickCommand { omega_turn: w, duration: angle / TURN_RATE, ..Default::default() };
        Some(match self.kind {
            LocomotionKind::GoStraight => walk(WALK_SPEED),
            LocomotionKind::WalkBackwards => walk(-WALK_SPEED),
            LocomotionKind::SidestepLeft => side(SIDESTEP_SPEED),
            LocomotionKind::SidestepRight => side(-SIDESTEP_SPEED),
            LocomotionKind::TurnLeft => turn(TURN_RATE),
            LocomotionKind::TurnRight => turn(-TURN_RATE),
            _ => return None,
        })
    }
}

impl fmt::Display for LocomotionSkill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.magnitude, self.head_target) {
            (Some(m), _) => write!(f, "{}(\"{}\")", self.kind, m.as_str()),
            (_, Some(v)) if self.kind == LocomotionKind::TiltHead => write!(f, "{}(pitch={v:?})", self.kind),
            (_, Some(v)) => write!(f, "{}(yaw={v:?})", self.kind),
            _ => write!(f, "{}()", self.kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocomotionOutcome {
    pub state: RobotState,
    pub duration: f64,
    pub distance: f64,
    pub collision: Option<CollisionEvent>,
}

/// Runs a locomotion or head primitive. Held items and scene objects are never touched.
pub fn execute_locomotion_skill(
    skill: &LocomotionSkill,
    state: &RobotState,
    scene: &SceneMap,
    noise: &mut NoiseStream,
) -> Result<LocomotionOutcome, SkillError> {
    skill.validate()?;
    if let Some(cmd) = skill.to_command() {
        let step = step_locomotion(scene, state, &cmd, noise)?;
        return Ok(LocomotionOutcome { state: step.state, duration: cmd.duration, distance: step.distance, collision: step.collision });
    }
    let mut next = state.clone();
    next.mode = Mode::Standing;
    match (skill.kind, skill.head_target) {
        (LocomotionKind::TiltHead, Some(p)) => next.head_pitch = p,
        (LocomotionKind::TurnHead, Some(y)) => next.head_yaw = y,
        _ => {}
    }
    Ok(LocomotionOutcome { state: next, duration: HEAD_MOVE_S, distance: 0.0, collision: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Bounds, NoiseModel, Room};
    use crate::Point;

    fn scene() -> SceneMap {
        SceneMap {
            rooms: vec![Room {
                name: "r".into(),
                polygon: vec![Point::new(-10.0, -10.0), Point::new(10.0, -10.0), Point::new(10.0, 10.0), Point::new(-10.0, 10.0)],
            }],
            walls: vec![],
            objects: vec![],
            semantic_map: String::new(),
            bounds: Bounds { min: Point::new(-10.0, -10.0), max: Point::new(10.0, 10.0) },
            doors: vec![],
        }
    }

    fn run(skill: LocomotionSkill, s: &RobotState) -> LocomotionOutcome {
        execute_locomotion_skill(&skill, s, &scene(), &mut NoiseModel::noiseless(0).stream()).unwrap()
    }

    #[test]
    fn no_action_keeps_pose() {
        let mut s = RobotState::at(1.0, 2.0, 0.3);
        s.mode = Mode::Walking;
        let out = run(LocomotionSkill::no_action(), &s);
        assert_eq!((out.state.x, out.state.y, out.state.heading), (1.0, 2.0, 0.3));
        assert_eq!(out.state.mode, Mode::Standing);
    }

    #[test]
    fn magnitude_mapping_is_exact() {
        let s = RobotState::at(0.0, 0.0, 0.0);
        let out = run(LocomotionSkill::turn(true, Magnitude::Small), &s);
        assert!((out.state.heading - SMALL_TURN).abs() < 1e-12);
        let out = run(LocomotionSkill::turn(false, Magnitude::Large), &s);
        assert!((out.state.heading + LARGE_TURN).abs() < 1e-12);
        let out = run(LocomotionSkill::motion(LocomotionKind::GoStraight, Magnitude::Large), &s);
        assert!((out.state.x - LARGE_STEP).abs() < 1e-12);
        assert!((out.duration - 3.0).abs() < 1e-12);
        let out = run(LocomotionSkill::motion(LocomotionKind::WalkBackwards, Magnitude::Small), &s);
        assert!((out.state.x + SMALL_STEP).abs() < 1e-12);
        let out = run(LocomotionSkill::sidestep(false, Magnitude::Small), &s);
        assert!((out.state.y + SMALL_STEP).abs() < 1e-12);
    }

    #[test]
    fn durations_are_whole_ticks() {
        for kind in LocomotionKind::ALL.into_iter().filter(|k| k.takes_magnitude()) {
            for m in [Magnitude::Small, Magnitude::Large] {
                let d = LocomotionSkill::motion(kind, m).to_command().unwrap().duration;
                let ticks = d / TICK_S;
                assert!((ticks - ticks.round()).abs() < 1e-9, "{kind} {m:?} -> {d}");
            }
        }
    }

    #[test]
    fn tilt_head_only_moves_neck() {
        let s = RobotState::at(1.0, 1.0, 0.5);
        let out = run(LocomotionSkill::tilt_head(0.9), &s);
        assert_eq!(out.state.head_pitch, 0.9);
        assert_eq!((out.state.x, out.state.y, out.state.heading), (1.0, 1.0, 0.5));
    }

    #[test]
    fn invalid_shapes_rejected() {
        let bad = LocomotionSkill { kind: LocomotionKind::GoStraight, magnitude: None, head_target: None };
        assert!(bad.validate().is_err());
        let bad = LocomotionSkill { kind: LocomotionKind::TiltHead, magnitude: Some(Magnitude::Small), head_target: Some(0.2) };
        assert!(bad.validate().is_err());
        assert!(LocomotionSkill::tilt_head(1.5).validate().is_err());
    }
}
