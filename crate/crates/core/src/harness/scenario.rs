use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;
use crate::sim::{Goal, Subprocess};
use crate::skills::{ManipulationSkillSpec, SkillRegistry};
use crate::world::{CameraModel, ObjectSpec, RobotState, SceneMap};
use crate::Point;

pub const OFFICE_JSON: &str = include_str!("../../scenarios/office.json");

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

fn default_pitch() -> f64 {
    0.3
}

/// Where an episode may start. Positions are rejection-sampled clear of solid objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartRegion {
    /// Axis-aligned box with a heading range.
    Box { x: [f64; 2], y: [f64; 2], heading: [f64; 2] },
    /// Ring sector on the approach side of `object`: `radius` from it, rotated
    /// `offset` radians (random sign) away from its alignment axis, roughly facing it.
    AroundObject { object: String, radius: [f64; 2], offset: [f64; 2], jitter: f64 },
    /// Fixed pose at `standoff` in front of `object`, facing its alignment direction.
    Aligned { object: String, standoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSpec {
    pub region: StartRegion,
    #[serde(default = "default_pitch")]
    pub head_pitch: f64,
    #[serde(default)]
    pub held_item: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub item: String,
    pub on: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub instruction: String,
    pub subprocesses: Vec<Subprocess>,
    pub start: StartSpec,
    /// Items moved onto other objects before the episode.
    #[serde(default)]
    pub setup: Vec<Placement>,
    /// Objects added to the scene for this task only.
    #[serde(default)]
    pub extra_objects: Vec<ObjectSpec>,
    /// Appended to the semantic map when `extra_objects` is non-empty.
    #[serde(default)]
    pub map_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub scene: SceneMap,
    #[serde(default)]
    pub camera: CameraModel,
    pub skills: Vec<ManipulationSkillSpec>,
    pub tasks: Vec<TaskSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The built-in office scenario.
    pub fn office() -> Self {
        Self::from_json(OFFICE_JSON).expect("built-in scenario is valid")
    }

    pub fn registry(&self) -> Result<SkillRegistry, ScenarioError> {
        SkillRegistry::from_specs(self.skills.clone()).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn task(&self, name: &str) -> Result<&TaskSpec, ScenarioError> {
        self.tasks.iter().find(|t| t.name == name).ok_or_else(|| ScenarioError::UnknownTask(name.to_string()))
    }

    /// Scene with the task's extra objects merged in.
    pub fn scene_for(&self, task: &TaskSpec) -> Result<SceneMap, ScenarioError> {
        let mut scene = self.scene.clone();
        if !task.extra_objects.is_empty() {
            scene.objects.extend(task.extra_objects.iter().cloned());
            scene.semantic_map = format!("{}\n{}", scene.semantic_map.trim_end(), task.map_note.trim());
        }
        scene.validate().map_err(|e| ScenarioError::Invalid(format!("task `{}`: {e}", task.name)))?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        self.scene.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.camera.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let registry = self.registry()?;
        for s in &self.skills {
            if self.scene.object(&s.target).is_none() {
                return bad(format!("skill `{}` targets unknown object `{}`", s.name, s.target));
            }
        }
        let mut names: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate task `{}`", w[0]));
        }
        for t in &self.tasks {
            let scene = self.scene_for(t)?;
            if t.subprocesses.is_empty() {
                return bad(format!("task `{}` has no subprocesses", t.name));
            }
            for sp in &t.subprocesses {
                let known = |n: &str| scene.object(n).is_some();
                let ok = match &sp.goal {
                    Goal::Near { object, within } => known(object) && *within > 0.0,
                    Goal::Holding { item } => known(item),
                    Goal::Placed { item, on } => known(item) && known(on),
                    Goal::Flag { name } => registry.get(name).is_some(),
                };
                if !ok {
                    return bad(format!("task `{}`: subprocess `{}` refers to unknown names", t.name, sp.description));
                }
            }
            for p in &t.setup {
                if !(scene.object(&p.item).is_some() && scene.object(&p.on).is_some()) {
                    return bad(format!("task `{}`: setup places unknown objects", t.name));
                }
            }
            if let Some(h) = &t.start.held_item {
                if scene.object(h).is_none() {
                    return bad(format!("task `{}`: starts holding unknown `{h}`", t.name));
                }
            }
            let region_object = match &t.start.region {
                StartRegion::Box { x, y, heading } => {
                    if !(x[0] <= x[1] && y[0] <= y[1] && heading[0] <= heading[1]) {
                        return bad(format!("task `{}`: empty start box", t.name));
                    }
                    None
                }
                StartRegion::AroundObject { object, radius, offset, jitter } => {
                    if !(0.0 < radius[0] && radius[0] <= radius[1] && offset[0] <= offset[1] && *jitter >= 0.0) {
                        return bad(format!("task `{}`: bad start ring", t.name));
                    }
                    Some(object)
                }
                StartRegion::Aligned { object, standoff } => {
                    if !(*standoff > 0.0) {
                        return bad(format!("task `{}`: standoff must be > 0", t.name));
                    }
                    Some(object)
                }
            };
            if region_object.is_some_and(|o| scene.object(o).is_none()) {
                return bad(format!("task `{}`: start refers to an unknown object", t.name));
            }
            if !(0.0..=crate::world::MAX_HEAD_PITCH).contains(&t.start.head_pitch) {
                return bad(format!("task `{}`: start pitch out of range", t.name));
            }
        }
        Ok(())
    }
}

/// Clear of every solid footprint by `margin`.
fn clear(scene: &SceneMap, p: Point, margin: f64) -> bool {
    scene.objects.iter().filter(|o| o.solid).all(|o| o.position.distance(p) >= o.footprint_radius + margin)
        && scene.walls.iter().all(|w| w.distance_to_point(p) >= margin)
        && scene.rooms.iter().any(|r| r.contains(p))
}

/// Draws a start pose for the task.
pub fn sample_start<R: Rng>(scene: &SceneMap, start: &StartSpec, rng: &mut R) -> Result<RobotState, ScenarioError> {
    let u = |rng: &mut R, r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..=r[1]) } else { r[0] };
    for _ in 0..1000 {
        let (pos, heading) = match &start.region {
            StartRegion::Box { x, y, heading } => (Point::new(u(rng, *x), u(rng, *y)), u(rng, *heading)),
            StartRegion::AroundObject { object, radius, offset, jitter } => {
                let obj = scene.object(object).ok_or_else(|| ScenarioError::Invalid(format!("unknown object `{object}`")))?;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let dir = obj.alignment_direction.scale(-1.0).rotate(sign * u(rng, *offset));
                let pos = obj.position + dir.scale(u(rng, *radius));
                let facing = (obj.position - pos).angle();
                (pos, facing + u(rng, [-jitter, *jitter]))
            }
            StartRegion::Aligned { object, standoff } => {
                let obj = scene.object(object).ok_or_else(|| ScenarioError::Invalid(format!("unknown object `{object}`")))?;
                (obj.position - obj.alignment_direction.scale(*standoff), obj.alignment_heading())
            }
        };
        if !clear(scene, pos, 0.15) {
            if matches!(start.region, StartRegion::Aligned { .. }) {
                break;
            }
            continue;
        }
        let mut s = RobotState::at(pos.x, pos.y, wrap_angle(heading));
        s.head_pitch = start.head_pitch;
        s.held_item = start.held_item.clone();
        s.validate(scene).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        return Ok(s);
    }
    Err(ScenarioError::Invalid("no collision-free start pose found".into()))
}
