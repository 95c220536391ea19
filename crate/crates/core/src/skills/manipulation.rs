use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;
use crate::world::{Detection, ObjectSpec, RobotState};

use super::SkillError;

pub const CHUNK_TRAIN: u32 = 30;
pub const CHUNK_DEPLOY: u32 = 10;

fn default_chunk_train() -> u32 {
    CHUNK_TRAIN
}
fn default_chunk_deploy() -> u32 {
    CHUNK_DEPLOY
}
fn default_duration() -> f64 {
    8.0
}
fn default_sensitivity() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preconditions {
    pub max_distance: f64,
    pub max_facing_error: f64,
    pub pitch_range: [f64; 2],
    #[serde(default = "default_true")]
    pub requires_target_visible: bool,
    /// Item that must be in hand. Skills producing an item also need an empty hand.
    #[serde(default)]
    pub requires_held: Option<String>,
    #[serde(default)]
    pub produces_held: Option<String>,
}

impl Preconditions {
    pub fn tabletop() -> Self {
        Preconditions {
            max_distance: 0.7,
            max_facing_error: 0.35,
            pitch_range: [0.6, 1.1],
            requires_target_visible: true,
            requires_held: None,
            produces_held: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationSkillSpec {
    pub name: String,
    pub description: String,
    /// Scene object the skill acts on.
    pub target: String,
    #[serde(default = "default_chunk_train")]
    pub chunk_train: u32,
    #[serde(default = "default_chunk_deploy")]
    pub chunk_deploy: u32,
    #[serde(default = "default_duration")]
    pub duration: f64,
    pub precondition: Preconditions,
    pub base_success: f64,
    #[serde(default = "default_sensitivity")]
    pub facing_sensitivity: f64,
}

impl ManipulationSkillSpec {
    pub fn validate(&self) -> Result<(), SkillError> {
        let bad = |why: String| Err(SkillError::InvalidSkill(format!("{}: {why}", self.name)));
        if !crate::call::is_identifier(&self.name) {
            return bad("name must match [a-z_][a-z0-9_]*".into());
        }
        if !(0.0..=1.0).contains(&self.base_success) {
            return bad(format!("base_success {} outside [0, 1]", self.base_success));
        }
        if self.chunk_train != CHUNK_TRAIN || self.chunk_deploy != CHUNK_DEPLOY {
            return bad(format!("chunk sizes must be {CHUNK_TRAIN}/{CHUNK_DEPLOY}"));
        }
        let p = &self.precondition;
        if !(p.max_distance > 0.0) || !(p.max_facing_error > 0.0) {
            return bad("max_distance and max_facing_error must be > 0".into());
        }
        if !(p.pitch_range[0] <= p.pitch_range[1]) {
            return bad("pitch_range must be ordered".into());
        }
        if !(self.duration > 0.0) || !(self.facing_sensitivity >= 0.0) {
            return bad("duration must be > 0 and facing_sensitivity >= 0".into());
        }
        Ok(())
    }

    /// Success probability at a given facing error.
    pub fn success_probability(&self, facing_error: f64) -> f64 {
        self.base_success * (-self.facing_sensitivity * facing_error * facing_error).exp()
    }
}

/// Why a manipulation skill refused to start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Unmet {
    OutOfRange { distance: f64, max: f64 },
    Misaligned { error: f64, max: f64 },
    PitchOutOfRange { pitch: f64, range: [f64; 2] },
    TargetNotVisible { target: String },
    HeldMismatch { expected: Option<String>, actual: Option<String> },
}

impl Unmet {
    pub fn code(&self) -> &'static str {
        match self {
            Unmet::OutOfRange { .. } => "OutOfRange",
            Unmet::Misaligned { .. } => "Misaligned",
            Unmet::PitchOutOfRange { .. } => "PitchOutOfRange",
            Unmet::TargetNotVisible { .. } => "TargetNotVisible",
            Unmet::HeldMismatch { .. } => "HeldMismatch",
        }
    }
}

impl fmt::Display for Unmet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unmet::OutOfRange { distance, max } => write!(f, "OutOfRange: target {distance:.2} m away, limit {max:.2} m"),
            Unmet::Misaligned { error, max } => write!(f, "Misaligned: facing error {error:.2} rad, limit {max:.2} rad"),
            Unmet::PitchOutOfRange { pitch, range } => {
                write!(f, "PitchOutOfRange: head pitch {pitch:.2} rad outside [{:.2}, {:.2}]", range[0], range[1])
            }
            Unmet::TargetNotVisible { target } => write!(f, "TargetNotVisible: `{target}` not in view"),
            Unmet::HeldMismatch { expected, actual } => write!(f, "HeldMismatch: need {expected:?}, holding {actual:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldDelta {
    Grasp { item: String },
    Place { item: String, on: String },
    Operate { flag: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SkillStatus {
    Success,
    Failure { reason: String },
    PreconditionUnmet { unmet: Unmet },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub status: SkillStatus,
    pub duration: f64,
    pub world_delta: Option<WorldDelta>,
}

/// Angle between the body heading and the object's preferred manipulation heading.
pub fn facing_error(state: &RobotState, target: &ObjectSpec) -> f64 {
    wrap_angle(state.heading - target.alignment_heading()).abs()
}

/// Signed facing error; positive means the robot must turn left.
pub fn signed_facing_error(state: &RobotState, target: &ObjectSpec) -> f64 {
    wrap_angle(target.alignment_heading() - state.heading)
}

/// Pure precondition gate, checked in a fixed order. Never draws randomness.
pub fn check_preconditions(
    spec: &ManipulationSkillSpec,
    state: &RobotState,
    target: &ObjectSpec,
    detections: &[Detection],
) -> Result<(), Unmet> {
    let p = &spec.precondition;
    let distance = state.position().distance(target.position);
    if distance > p.max_distance {
        return Err(Unmet::OutOfRange { distance, max: p.max_distance });
    }
    let error = facing_error(state, target);
    if error > p.max_facing_error {
        return Err(Unmet::Misaligned { error, max: p.max_facing_error });
    }
    if state.head_pitch < p.pitch_range[0] || state.head_pitch > p.pitch_range[1] {
        return Err(Unmet::PitchOutOfRange { pitch: state.head_pitch, range: p.pitch_range });
    }
    if p.requires_target_visible && !detections.iter().any(|d| d.label == target.name) {
        return Err(Unmet::TargetNotVisible { target: target.name.clone() });
    }
    let held_ok = match (&p.requires_held, &p.produces_held) {
        (Some(need), _) => state.held_item.as_ref() == Some(need),
        (None, Some(_)) => state.held_item.is_none(),
        (None, None) => true,
    };
    if !held_ok {
        let expected = p.requires_held.clone();
        return Err(Unmet::HeldMismatch { expected, actual: state.held_item.clone() });
    }
    Ok(())
}

/// World change a successful run produces.
pub fn delta_for(spec: &ManipulationSkillSpec) -> WorldDelta {
    let p = &spec.precondition;
    match (&p.produces_held, &p.requires_held) {
        (Some(item), _) => WorldDelta::Grasp { item: item.clone() },
        (None, Some(item)) => WorldDelta::Place { item: item.clone(), on: spec.target.clone() },
        (None, None) => WorldDelta::Operate { flag: spec.name.clone() },
    }
}

/// Gates on preconditions, then succeeds with probability
/// `base_success * exp(-facing_sensitivity * facing_error^2)`.
pub fn execute_manipulation_skill<R: Rng + ?Sized>(
    spec: &ManipulationSkillSpec,
    state: &RobotState,
    target: &ObjectSpec,
    detections: &[Detection],
    rng: &mut R,
) -> Result<SkillOutcome, SkillError> {
    if target.name != spec.target {
        return Err(SkillError::TargetMismatch { skill: spec.name.clone(), expected: spec.target.clone(), got: target.name.clone() });
    }
    if let Err(unmet) = check_preconditions(spec, state, target, detections) {
        return Ok(SkillOutcome { status: SkillStatus::PreconditionUnmet { unmet }, duration: 0.0, world_delta: None });
    }
    let p = spec.success_probability(facing_error(state, target));
    let draw: f64 = rng.random();
    if draw < p {
        Ok(SkillOutcome { status: SkillStatus::Success, duration: spec.duration, world_delta: Some(delta_for(spec)) })
    } else {
        let reason = format!("{} did not complete (p = {p:.3})", spec.name);
        Ok(SkillOutcome { status: SkillStatus::Failure { reason }, duration: spec.duration, world_delta: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cup() -> ObjectSpec {
        ObjectSpec {
            name: "cup".into(),
            position: Point::new(0.5, 0.0),
            footprint_radius: 0.05,
            surface_height: 0.75,
            height: 0.15,
            alignment_direction: Point::new(1.0, 0.0),
            navigable: false,
            solid: false,
        }
    }

    fn grasp_cup() -> ManipulationSkillSpec {
        ManipulationSkillSpec {
            name: "grasp_cup".into(),
            description: "grasp the cup".into(),
            target: "cup".into(),
            chunk_train: 30,
            chunk_deploy: 10,
            duration: 8.0,
            precondition: Preconditions { produces_held: Some("cup".into()), ..Preconditions::tabletop() },
            base_success: 0.86,
            facing_sensitivity: 2.0,
        }
    }

    fn seen() -> Vec<Detection> {
        vec![Detection {
            label: "cup".into(),
            bbox: crate::world::BBox { u_min: 0.45, v_min: 0.4, u_max: 0.55, v_max: 0.6 },
            depth: 0.5,
        }]
    }

    fn ready() -> RobotState {
        RobotState::at(0.0, 0.0, 0.0).with_head(0.0, 0.9)
    }

    #[test]
    fn far_away_is_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = RobotState::at(-2.5, 0.0, 0.0).with_head(0.0, 0.9);
        for _ in 0..20 {
            let out = execute_manipulation_skill(&grasp_cup(), &s, &cup(), &seen(), &mut rng).unwrap();
            assert!(matches!(out.status, SkillStatus::PreconditionUnmet { unmet: Unmet::OutOfRange { .. } }));
            assert!(out.world_delta.is_none());
        }
    }

    #[test]
    fn tight_placement_rejects_misalignment() {
        let mut spec = grasp_cup();
        spec.name = "place_coffee_on_machine".into();
        spec.precondition.max_facing_error = 0.15;
        let s = RobotState::at(0.0, 0.0, 0.5).with_head(0.0, 0.9);
        let out = execute_manipulation_skill(&spec, &s, &cup(), &seen(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(matches!(out.status, SkillStatus::PreconditionUnmet { unmet: Unmet::Misaligned { .. } }));
    }

    #[test]
    fn gate_order_and_reasons() {
        let spec = grasp_cup();
        let level = RobotState::at(0.0, 0.0, 0.0);
        assert!(matches!(check_preconditions(&spec, &level, &cup(), &seen()), Err(Unmet::PitchOutOfRange { .. })));
        assert!(matches!(check_preconditions(&spec, &ready(), &cup(), &[]), Err(Unmet::TargetNotVisible { .. })));
        let mut holding = ready();
        holding.held_item = Some("basket".into());
        assert!(matches!(check_preconditions(&spec, &holding, &cup(), &seen()), Err(Unmet::HeldMismatch { .. })));
        assert!(check_preconditions(&spec, &ready(), &cup(), &seen()).is_ok());
    }

    #[test]
    fn precondition_failure_consumes_no_randomness() {
        let s = RobotState::at(-3.0, 0.0, 0.0);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let b = a.clone();
        let _ = execute_manipulation_skill(&grasp_cup(), &s, &cup(), &seen(), &mut a).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn success_applies_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_success = false;
        for _ in 0..50 {
            let out = execute_manipulation_skill(&grasp_cup(), &ready(), &cup(), &seen(), &mut rng).unwrap();
            assert_eq!(out.world_delta.is_some(), out.status == SkillStatus::Success);
            if out.status == SkillStatus::Success {
                saw_success = true;
                assert_eq!(out.world_delta, Some(WorldDelta::Grasp { item: "cup".into() }));
            }
        }
        assert!(saw_success);
    }

    #[test]
    fn wrong_target_is_an_error() {
        let mut other = cup();
        other.name = "bottle".into();
        let r = execute_manipulation_skill(&grasp_cup(), &ready(), &other, &seen(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(SkillError::TargetMismatch { .. })));
    }

    #[test]
    fn chunk_contract_enforced() {
        let mut s = grasp_cup();
        s.chunk_deploy = 30;
        assert!(s.validate().is_err());
        assert!(grasp_cup().validate().is_ok());
    }

    proptest! {
        #[test]
        fn success_probability_non_increasing(a in 0.0f64..1.5, b in 0.0f64..1.5) {
            let spec = grasp_cup();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(spec.success_probability(hi) <= spec.success_probability(lo));
        }

        #[test]
        fn manipulation_never_moves_the_body(err in -0.3f64..0.3, seed in 0u64..1000) {
            let s = RobotState::at(0.0, 0.0, err).with_head(0.0, 0.9);
            let before = s.clone();
            let _ = execute_manipulation_skill(&grasp_cup(), &s, &cup(), &seen(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(s, before);
        }
    }
}
