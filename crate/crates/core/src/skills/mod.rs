//! Skill library: locomotion and head primitives plus a registry of
//! pose-conditioned manipulation skills.

mod locomotion;
mod manipulation;
mod registry;

pub use locomotion::{
    execute_locomotion_skill, LocomotionKind, LocomotionOutcome, LocomotionSkill, Magnitude, HEAD_MOVE_S, LARGE_STEP, LARGE_TURN,
    SIDESTEP_SPEED, SMALL_STEP, SMALL_TURN, TURN_RATE, WALK_SPEED,
};
pub use manipulation::{
    check_preconditions, delta_for, execute_manipulation_skill, facing_error, signed_facing_error, ManipulationSkillSpec,
    Preconditions, SkillOutcome, SkillStatus, Unmet, WorldDelta, CHUNK_DEPLOY, CHUNK_TRAIN,
};
pub use registry::SkillRegistry;

use crate::world::WorldError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SkillError {
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("invalid skill: {0}")]
    InvalidSkill(String),
    #[error("skill `{0}` already registered")]
    DuplicateSkill(String),
    #[error("skill `{skill}` is bound to `{expected}`, got `{got}`")]
    TargetMismatch { skill: String, expected: String, got: String },
    #[error(transparent)]
    World(#[from] WorldError),
}
