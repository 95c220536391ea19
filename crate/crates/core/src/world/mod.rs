//! Geometric office world: scene layout, pose-level humanoid kinematics with
//! bipedal drift, and a perception oracle standing in for a learned detector.

mod kinematics;
mod perception;
mod scene;

pub use kinematics::{
    step_locomotion, CollisionEvent, JoystickCommand, LocomotionStep, Mode, NoiseModel, NoiseStream, RobotState, MAX_HEAD_PITCH,
    MAX_HEAD_YAW, MAX_OMEGA, MAX_V_FORWARD, MAX_V_LATERAL, TICK_S,
};
pub use perception::{
    check_obstacle, depression_extent, perturb_depths, project_detections, relative_angle_and_distance, BBox, CameraModel, Detection,
    ObstacleInfo, Side,
};
pub use scene::{count_mentions, Bounds, Door, ObjectSpec, Room, SceneMap, NOMINAL_OBJECT_HEIGHT};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error("joystick command out of bounds: {0:?}")]
    InvalidCommand(JoystickCommand),
    #[error("invalid robot state: {0}")]
    InvalidState(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid object `{name}`: {reason}")]
    InvalidObject { name: String, reason: String },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("noise sigmas must be non-negative")]
    InvalidNoise,
}
