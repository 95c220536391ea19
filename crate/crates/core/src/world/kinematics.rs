use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::{self, wrap_angle, Segment};
use crate::Point;

use super::scene::SceneMap;
use super::WorldError;

/// Simulation tick in seconds. Skill durations are whole multiples of it.
pub const TICK_S: f64 = 0.2;

pub const MAX_V_FORWARD: f64 = 0.5;
pub const MAX_V_LATERAL: f64 = 0.3;
pub const MAX_OMEGA: f64 = 0.6;
pub const MAX_HEAD_YAW: f64 = 1.2;
pub const MAX_HEAD_PITCH: f64 = 1.2;

/// Gap left between the robot and whatever it bumped into.
const CONTACT_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Standing,
    Walking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Body heading, `(-pi, pi]`.
    pub heading: f64,
    /// Neck yaw relative to the body, positive to the left.
    pub head_yaw: f64,
    /// Neck pitch, positive looking down.
    pub head_pitch: f64,
    pub held_item: Option<String>,
    pub mode: Mode,
}

impl RobotState {
    pub fn at(x: f64, y: f64, heading: f64) -> Self {
        RobotState { x, y, heading: wrap_angle(heading), head_yaw: 0.0, head_pitch: 0.0, held_item: None, mode: Mode::Standing }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn with_head(mut self, yaw: f64, pitch: f64) -> Self {
        self.head_yaw = yaw;
        self.head_pitch = pitch;
        self
    }

    pub fn validate(&self, scene: &SceneMap) -> Result<(), WorldError> {
        let p = self.position();
        if !p.is_finite() || !self.heading.is_finite() {
            return Err(WorldError::InvalidState("non-finite pose".into()));
        }
        if !scene.bounds.contains(p) {
            return Err(WorldError::InvalidState(format!("position ({:.3}, {:.3}) outside scene bounds", self.x, self.y)));
        }
        if scene.walls.iter().any(|w| w.distance_to_point(p) < 1e-9) {
            return Err(WorldError::InvalidState("robot stands on a wall".into()));
        }
        if !(0.0..=MAX_HEAD_PITCH).contains(&self.head_pitch) {
            return Err(WorldError::InvalidState(format!("head pitch {} outside [0, {MAX_HEAD_PITCH}]", self.head_pitch)));
        }
        if self.head_yaw.abs() > MAX_HEAD_YAW {
            return Err(WorldError::InvalidState(format!("head yaw {} outside [-{MAX_HEAD_YAW}, {MAX_HEAD_YAW}]", self.head_yaw)));
        }
        Ok(())
    }
}

/// Velocity-level locomotion target held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct JoystickCommand {
    pub v_forward: f64,
    pub v_lateral: f64,
    pub omega_turn: f64,
    pub duration: f64,
}

impl JoystickCommand {
    pub fn validate(&self) -> Result<(), WorldError> {
        let within = |v: f64, lim: f64| v.is_finite() && v.abs() <= lim + 1e-12;
        if !within(self.v_forward, MAX_V_FORWARD)
            || !within(self.v_lateral, MAX_V_LATERAL)
            || !within(self.omega_turn, MAX_OMEGA)
            || !(self.duration > 0.0 && self.duration.is_finite())
        {
            return Err(WorldError::InvalidCommand(*self));
        }
        Ok(())
    }

    pub fn is_moving(&self) -> bool {
        self.v_forward != 0.0 || self.v_lateral != 0.0 || self.omega_turn != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Position noise per tick, metres (per axis).
    pub sigma_pos: f64,
    /// Heading noise per tick, radians.
    pub sigma_heading: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma_pos: 0.02, sigma_heading: 0.01, seed: 0 }
    }
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        NoiseModel { sigma_pos: 0.0, sigma_heading: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.sigma_pos >= 0.0 && self.sigma_heading >= 0.0) {
            return Err(WorldError::InvalidNoise);
        }
        Ok(())
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream { model: *self, rng: ChaCha8Rng::seed_from_u64(self.seed) }
    }
}

/// Seeded source of locomotion drift.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    /// One draw for a command lasting `duration`; variance scales with tick count.
    /// Always consumes three normals so the stream stays aligned across runs.
    pub fn draw(&mut self, duration: f64) -> (f64, f64, f64) {
        let scale = (duration / TICK_S).max(0.0).sqrt();
        let nx: f64 = StandardNormal.sample(&mut self.rng);
        let ny: f64 = StandardNormal.sample(&mut self.rng);
        let nh: f64 = StandardNormal.sample(&mut self.rng);
        let sp = self.model.sigma_pos * scale;
        let sh = self.model.sigma_heading * scale;
        (nx * sp, ny * sp, nh * sh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub obstacle: String,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocomotionStep {
    pub state: RobotState,
    pub collision: Option<CollisionEvent>,
    /// Planar distance actually travelled.
    pub distance: f64,
}

/// Integrates a joystick command in the body frame (Euler, heading at start),
/// adds drift, and clamps the motion at the first wall or solid object hit.
pub fn step_locomotion(
    scene: &SceneMap,
    state: &RobotState,
    cmd: &JoystickCommand,
    noise: &mut NoiseStream,
) -> Result<LocomotionStep, WorldError> {
    cmd.validate()?;
    let t = cmd.duration;
    let (s, c) = state.heading.sin_cos();
    let mut dx = (cmd.v_forward * c - cmd.v_lateral * s) * t;
    let mut dy = (cmd.v_forward * s + cmd.v_lateral * c) * t;
    let mut dtheta = cmd.omega_turn * t;

    let moving = cmd.is_moving();
    let (nx, ny, nh) = noise.draw(t);
    if moving {
        dx += nx;
        dy += ny;
        dtheta += nh;
    }

    let p0 = state.position();
    let p1 = Point::new(p0.x + dx, p0.y + dy);
    let (end, collision) = clamp_motion(scene, p0, p1);

    let mut next = state.clone();
    next.x = end.x;
    next.y = end.y;
    next.heading = wrap_angle(state.heading + dtheta);
    next.mode = if moving { Mode::Walking } else { Mode::Standing };
    Ok(LocomotionStep { distance: p0.distance(end), state: next, collision })
}

fn clamp_motion(scene: &SceneMap, p0: Point, p1: Point) -> (Point, Option<CollisionEvent>) {
    let len = p0.distance(p1);
    if len == 0.0 {
        return (p0, None);
    }
    let b = &scene.bounds;
    let border = [
        Segment::new(b.min, Point::new(b.max.x, b.min.y)),
        Segment::new(Point::new(b.max.x, b.min.y), b.max),
        Segment::new(b.max, Point::new(b.min.x, b.max.y)),
        Segment::new(Point::new(b.min.x, b.max.y), b.min),
    ];
    let mut first: Option<(f64, String)> = None;
    let mut consider = |t: f64, name: String| {
        if first.as_ref().is_none_or(|(best, _)| t < *best) {
            first = Some((t, name));
        }
    };
    for (i, w) in scene.walls.iter().enumerate() {
        if let Some(t) = geom::segment_intersection(p0, p1, w) {
            consider(t, format!("wall#{i}"));
        }
    }
    for w in &border {
        if let Some(t) = geom::segment_intersection(p0, p1, w) {
            consider(t, "boundary".to_string());
        }
    }
    for o in scene.objects.iter().filter(|o| o.solid) {
        if let Some(t) = geom::segment_circle_entry(p0, p1, o.position, o.footprint_radius) {
            consider(t, o.name.clone());
        }
    }
    match first {
        None => (p1, None),
        Some((t, obstacle)) => {
            let travel = (t * len - CONTACT_GAP).max(0.0);
            let end = p0 + (p1 - p0).scale(travel / len);
            (end, Some(CollisionEvent { obstacle, position: end }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scene::{Bounds, Room};

    fn open_scene() -> SceneMap {
        SceneMap {
            rooms: vec![Room {
                name: "hall".into(),
                polygon: vec![Point::new(-10.0, -10.0), Point::new(10.0, -10.0), Point::new(10.0, 10.0), Point::new(-10.0, 10.0)],
            }],
            walls: vec![],
            objects: vec![],
            semantic_map: "hall".into(),
            bounds: Bounds { min: Point::new(-10.0, -10.0), max: Point::new(10.0, 10.0) },
            doors: vec![],
        }
    }

    fn cmd(vf: f64, vl: f64, w: f64, t: f64) -> JoystickCommand {
        JoystickCommand { v_forward: vf, v_lateral: vl, omega_turn: w, duration: t }
    }

    #[test]
    fn zero_command_is_identity() {
        let scene = open_scene();
        let mut noise = NoiseModel::noiseless(1).stream();
        let s0 = RobotState::at(0.0, 0.0, 0.0);
        let out = step_locomotion(&scene, &s0, &cmd(0.0, 0.0, 0.0, 1.0), &mut noise).unwrap();
        assert_eq!(out.state, s0);
        assert_eq!(out.state.mode, Mode::Standing);
    }

    #[test]
    fn forward_euler_matches_closed_form() {
        let scene = open_scene();
        let mut noise = NoiseModel::noiseless(1).stream();
        let out = step_locomotion(&scene, &RobotState::at(0.0, 0.0, 0.0), &cmd(0.3, 0.0, 0.0, 1.0), &mut noise).unwrap();
        assert!((out.state.x - 0.3).abs() < 1e-12 && out.state.y.abs() < 1e-12 && out.state.heading.abs() < 1e-12);
        assert_eq!(out.state.mode, Mode::Walking);
    }

    #[test]
    fn turn_matches_closed_form() {
        let scene = open_scene();
        let mut noise = NoiseModel::noiseless(1).stream();
        let out = step_locomotion(&scene, &RobotState::at(0.0, 0.0, 0.0), &cmd(0.0, 0.0, 0.3, 1.0), &mut noise).unwrap();
        assert!(out.state.x.abs() < 1e-12 && out.state.y.abs() < 1e-12);
        assert!((out.state.heading - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lateral_is_body_frame() {
        let scene = open_scene();
        let mut noise = NoiseModel::noiseless(1).stream();
        let s0 = RobotState::at(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let out = step_locomotion(&scene, &s0, &cmd(0.0, 0.3, 0.0, 1.0), &mut noise).unwrap();
        // facing +y, left is -x
        assert!((out.state.x + 0.3).abs() < 1e-12 && out.state.y.abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_command_rejected() {
        let scene = open_scene();
        let mut noise = NoiseModel::noiseless(1).stream();
        let s0 = RobotState::at(0.0, 0.0, 0.0);
        for bad in [cmd(0.6, 0.0, 0.0, 1.0), cmd(0.0, 0.31, 0.0, 1.0), cmd(0.0, 0.0, -0.7, 1.0), cmd(0.1, 0.0, 0.0, 0.0)] {
            assert!(matches!(step_locomotion(&scene, &s0, &bad, &mut noise), Err(WorldError::InvalidCommand(_))));
        }
    }

    #[test]
    fn wall_clamps_motion() {
        let mut scene = open_scene();
        scene.walls.push(Segment::new(Point::new(0.5, -1.0), Point::new(0.5, 1.0)));
        let mut noise = NoiseModel::noiseless(1).stream();
        let out = step_locomotion(&scene, &RobotState::at(0.0, 0.0, 0.0), &cmd(0.5, 0.0, 0.0, 2.0), &mut noise).unwrap();
        let hit = out.collision.expect("collision");
        assert_eq!(hit.obstacle, "wall#0");
        assert!((out.state.x - (0.5 - CONTACT_GAP)).abs() < 1e-9);
        assert!(out.state.x < 0.5);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let scene = open_scene();
        let model = NoiseModel { sigma_pos: 0.05, sigma_heading: 0.02, seed: 42 };
        let run = || {
            let mut n = model.stream();
            let mut s = RobotState::at(0.0, 0.0, 0.0);
            let mut trail = vec![];
            for i in 0..50 {
                let c = if i % 3 == 0 { cmd(0.0, 0.0, 0.3, 0.4) } else { cmd(0.3, 0.1, 0.0, 0.2) };
                s = step_locomotion(&scene, &s, &c, &mut n).unwrap().state;
                trail.push((s.x.to_bits(), s.y.to_bits(), s.heading.to_bits()));
            }
            trail
        };
        assert_eq!(run(), run());
    }
}
