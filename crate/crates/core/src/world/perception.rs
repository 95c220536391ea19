use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::{self, wrap_angle, Segment};
use crate::Point;

use super::kinematics::RobotState;
use super::scene::{ObjectSpec, SceneMap};
use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub hfov: f64,
    pub vfov: f64,
    pub eye_height: f64,
    pub max_range: f64,
    /// Multiplicative depth noise (standard deviation); 0 disables it.
    #[serde(default)]
    pub depth_noise: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel { hfov: 90f64.to_radians(), vfov: 60f64.to_radians(), eye_height: 1.5, max_range: 12.0, depth_noise: 0.0 }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), WorldError> {
        let pi = std::f64::consts::PI;
        if !(self.hfov > 0.0 && self.hfov < pi && self.vfov > 0.0 && self.vfov < pi) {
            return Err(WorldError::InvalidCamera("field of view must lie in (0, pi)".into()));
        }
        if !(self.eye_height > 0.0 && self.max_range > 0.0 && self.depth_noise >= 0.0) {
            return Err(WorldError::InvalidCamera("eye_height, max_range must be > 0".into()));
        }
        Ok(())
    }
}

/// Image-normalised box; `u` grows toward the robot's left, `v` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub fn center_u(&self) -> f64 {
        0.5 * (self.u_min + self.u_max)
    }

    pub fn is_valid(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        unit(self.u_min) && unit(self.u_max) && unit(self.v_min) && unit(self.v_max) && self.u_min < self.u_max && self.v_min < self.v_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub depth: f64,
}

impl Detection {
    pub fn is_valid(&self) -> bool {
        self.bbox.is_valid() && self.depth > 0.0
    }
}

/// Vertical angular extent of an object, as depression angles below the horizon.
pub fn depression_extent(obj: &ObjectSpec, distance: f64, eye_height: f64) -> (f64, f64) {
    let near = (distance - obj.footprint_radius).max(1e-3);
    let far = distance + obj.footprint_radius;
    let top = obj.surface_height + obj.height;
    let bottom = obj.surface_height;
    let d_top = (eye_height - top).atan2(if eye_height >= top { far } else { near });
    let d_bottom = (eye_height - bottom).atan2(if eye_height >= bottom { near } else { far });
    (d_top, d_bottom)
}

/// Perception oracle: what a detector would report from the current camera pose.
///
/// An object is reported when its centre bearing lies within half the horizontal
/// field of view of the camera axis, its vertical extent overlaps the vertical
/// field of view, it is within range, and no wall blocks the line of sight.
pub fn project_detections(state: &RobotState, scene: &SceneMap, cam: &CameraModel) -> Vec<Detection> {
    let eye = state.position();
    let axis = state.heading + state.head_yaw;
    let mut out: Vec<Detection> = scene
        .objects
        .iter()
        .filter_map(|obj| {
            let to = obj.position - eye;
            let d = to.norm();
            if d <= 1e-9 || d > cam.max_range {
                return None;
            }
            let rel = wrap_angle(to.angle() - axis);
            if rel.abs() > cam.hfov / 2.0 {
                return None;
            }
            let (dep_min, dep_max) = depression_extent(obj, d, cam.eye_height);
            let lo = state.head_pitch - cam.vfov / 2.0;
            let hi = state.head_pitch + cam.vfov / 2.0;
            if !(dep_max > lo && dep_min < hi) {
                return None;
            }
            if !scene.line_of_sight(eye, obj.position) {
                return None;
            }
            let half_w = (obj.footprint_radius / d).min(1.0).asin();
            let clamp = |x: f64| x.clamp(0.0, 1.0);
            let bbox = BBox {
                u_min: clamp(0.5 + (rel - half_w) / cam.hfov),
                u_max: clamp(0.5 + (rel + half_w) / cam.hfov),
                v_min: clamp(0.5 + (dep_min - state.head_pitch) / cam.vfov),
                v_max: clamp(0.5 + (dep_max - state.head_pitch) / cam.vfov),
            };
            Some(Detection { label: obj.name.clone(), bbox, depth: d })
        })
        .filter(Detection::is_valid)
        .collect();
    out.sort_by(|a, b| a.label.cmp(&b.label).then(a.depth.total_cmp(&b.depth)));
    out
}

/// Applies multiplicative depth noise when the camera enables it.
pub fn perturb_depths<R: Rng>(dets: &mut [Detection], cam: &CameraModel, rng: &mut R) {
    if cam.depth_noise <= 0.0 {
        return;
    }
    for d in dets {
        let n: f64 = StandardNormal.sample(rng);
        d.depth = (d.depth * (1.0 + cam.depth_noise * n)).max(0.01);
    }
}

/// Signed bearing from the body heading and planar distance to an object.
pub fn relative_angle_and_distance(state: &RobotState, obj: &ObjectSpec) -> (f64, f64) {
    let to = obj.position - state.position();
    (wrap_angle(to.angle() - state.heading), to.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Side {
        if v > 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleInfo {
    pub name: String,
    pub distance: f64,
    pub side: Side,
}

/// Nearest wall or solid object crossing the forward ray of length `lookahead`.
/// Objects named in `ignore` (typically the navigation target) are skipped.
pub fn check_obstacle(state: &RobotState, scene: &SceneMap, lookahead: f64, ignore: &[&str]) -> Option<ObstacleInfo> {
    let p = state.position();
    let dir = Point::from_angle(state.heading);
    let end = p + dir.scale(lookahead);
    let mut best: Option<ObstacleInfo> = None;
    let mut offer = |name: String, distance: f64, toward: Point| {
        if best.as_ref().is_none_or(|b| distance < b.distance) {
            let c = dir.cross(toward - p);
            best = Some(ObstacleInfo { name, distance, side: Side::from_sign(c) });
        }
    };
    for (i, w) in scene.walls.iter().enumerate() {
        if let Some(t) = geom::segment_intersection(p, end, w) {
            offer(format!("wall#{i}"), t * lookahead, wall_bulk(w, p, dir));
        }
    }
    for o in scene.objects.iter().filter(|o| o.solid && !ignore.contains(&o.name.as_str())) {
        if let Some(t) = geom::segment_circle_entry(p, end, o.position, o.footprint_radius) {
            offer(o.name.clone(), t * lookahead, o.position);
        }
    }
    best
}

// The endpoint of the wall lying further from the ray decides which way it leans.
fn wall_bulk(w: &Segment<f64>, p: Point, dir: Point) -> Point {
    let ca = dir.cross(w.a - p).abs();
    let cb = dir.cross(w.b - p).abs();
    if ca >= cb {
        w.a
    } else {
        w.b
    }
}
