//! Mutable episode world: scene, robot, camera regime, seeded randomness,
//! subprocess progress and the trace ledger.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;
use crate::skills::{
    execute_locomotion_skill, execute_manipulation_skill, LocomotionOutcome, LocomotionSkill, SkillError, SkillOutcome,
    SkillRegistry, SkillStatus, WorldDelta,
};
use crate::trace::{secs_to_us, EpisodeTrace, EventKind, SkillSource, Stage, TraceHeader};
use crate::world::{perturb_depths, project_detections, CameraModel, Detection, NoiseModel, NoiseStream, RobotState, SceneMap, WorldError};

/// Derives an independent 64-bit seed from a parent seed and a label.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Serialized as `active` or `fixed:<pitch>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum CameraMode {
    #[default]
    Active,
    /// Neck locked at yaw 0 and the given pitch.
    Fixed(f64),
}

impl CameraMode {
    pub fn is_fixed(self) -> bool {
        matches!(self, CameraMode::Fixed(_))
    }
}

impl fmt::Display for CameraMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CameraMode::Active => f.write_str("active"),
            CameraMode::Fixed(p) => write!(f, "fixed:{p}"),
        }
    }
}

impl FromStr for CameraMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "active" {
            return Ok(CameraMode::Active);
        }
        let p = s.strip_prefix("fixed:").ok_or_else(|| format!("camera mode `{s}`: expected `active` or `fixed:<pitch>`"))?;
        let pitch: f64 = p.parse().map_err(|_| format!("bad pitch `{p}`"))?;
        if !(0.0..=crate::world::MAX_HEAD_PITCH).contains(&pitch) {
            return Err(format!("fixed pitch {pitch} outside [0, {}]", crate::world::MAX_HEAD_PITCH));
        }
        Ok(CameraMode::Fixed(pitch))
    }
}

impl TryFrom<String> for CameraMode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<CameraMode> for String {
    fn from(m: CameraMode) -> String {
        m.to_string()
    }
}

/// Pure predicate over world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "goal", rename_all = "snake_case")]
pub enum Goal {
    Near { object: String, within: f64 },
    Holding { item: String },
    Placed { item: String, on: String },
    Flag { name: String },
}

impl Goal {
    pub fn is_navigation(&self) -> bool {
        matches!(self, Goal::Near { .. })
    }

    pub fn satisfied(&self, w: &World) -> bool {
        match self {
            Goal::Near { object, within } => {
                w.scene.object(object).is_some_and(|o| o.position.distance(w.state.position()) <= *within)
            }
            Goal::Holding { item } => w.state.held_item.as_deref() == Some(item.as_str()),
            Goal::Placed { item, on } => w.resting.get(item).is_some_and(|o| o == on),
            Goal::Flag { name } => w.flags.contains(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subprocess {
    pub description: String,
    pub goal: Goal,
}

/// Latencies charged to the episode clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latencies {
    pub fm_query: f64,
    pub connector_decision: f64,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies { fm_query: 8.0, connector_decision: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub scene: SceneMap,
    pub state: RobotState,
    pub camera: CameraModel,
    pub camera_mode: CameraMode,
    pub registry: Arc<SkillRegistry>,
    pub latencies: Latencies,
    pub flags: BTreeSet<String>,
    pub trace: EpisodeTrace,
    /// Item -> object it was placed on.
    resting: BTreeMap<String, String>,
    /// Held object, removed from the scene while carried.
    carried: Option<crate::world::ObjectSpec>,
    subprocesses: Vec<Subprocess>,
    done: usize,
    /// World-frame bearing at which each label was last seen.
    last_seen: BTreeMap<String, f64>,
    noise: NoiseStream,
    rng: ChaCha8Rng,
}

pub struct WorldInit {
    pub scene: SceneMap,
    pub start: RobotState,
    pub camera: CameraModel,
    pub camera_mode: CameraMode,
    pub noise: NoiseModel,
    pub registry: Arc<SkillRegistry>,
    pub subprocesses: Vec<Subprocess>,
    pub latencies: Latencies,
    pub header: TraceHeader,
}

impl World {
    pub fn new(init: WorldInit) -> Result<Self, WorldError> {
        init.scene.validate()?;
        init.camera.validate()?;
        init.noise.validate()?;
        let mut state = init.start;
        if let CameraMode::Fixed(p) = init.camera_mode {
            state.head_yaw = 0.0;
            state.head_pitch = p;
        }
        state.validate(&init.scene)?;
        if !(init.latencies.fm_query >= 0.0 && init.latencies.connector_decision >= 0.0) {
            return Err(WorldError::InvalidScene("latencies must be non-negative".into()));
        }
        let mut header = init.header;
        header.subprocesses = init.subprocesses.iter().map(|s| s.description.clone()).collect();
        let mut w = World {
            scene: init.scene,
            state,
            camera: init.camera,
            camera_mode: init.camera_mode,
            registry: init.registry,
            latencies: init.latencies,
            flags: BTreeSet::new(),
            trace: EpisodeTrace::new(header),
            resting: BTreeMap::new(),
            carried: None,
            subprocesses: init.subprocesses,
            done: 0,
            last_seen: BTreeMap::new(),
            noise: init.noise.stream(),
            rng: ChaCha8Rng::seed_from_u64(sub_seed(init.noise.seed, "manipulation")),
        };
        if let Some(item) = w.state.held_item.clone() {
            w.carry(&item)?;
        }
        Ok(w)
    }

    /// Moves `item` into the robot's hand without a skill run (episode setup).
    pub fn carry(&mut self, item: &str) -> Result<(), WorldError> {
        let idx = self.scene.objects.iter().position(|o| o.name == item).ok_or_else(|| WorldError::InvalidObject {
            name: item.into(),
            reason: "not in scene".into(),
        })?;
        self.carried = Some(self.scene.objects.remove(idx));
        self.resting.remove(item);
        self.state.held_item = Some(item.to_string());
        Ok(())
    }

    /// Sets `item` on top of `on` without a skill run (episode setup).
    pub fn place_on(&mut self, item: &str, on: &str) -> Result<(), WorldError> {
        if self.state.held_item.as_deref() != Some(item) {
            self.carry(item)?;
        }
        self.put_down(item, on)
    }

    fn put_down(&mut self, item: &str, on: &str) -> Result<(), WorldError> {
        let base = self.scene.object(on).cloned().ok_or_else(|| WorldError::InvalidObject { name: on.into(), reason: "not in scene".into() })?;
        let mut obj = self.carried.take().ok_or_else(|| WorldError::InvalidState(format!("not holding `{item}`")))?;
        obj.position = base.position - base.alignment_direction.scale(0.5 * base.footprint_radius);
        obj.surface_height = base.surface_height + base.height;
        obj.alignment_direction = base.alignment_direction;
        obj.navigable = false;
        obj.solid = false;
        self.scene.objects.push(obj);
        self.resting.insert(item.to_string(), on.to_string());
        self.state.held_item = None;
        Ok(())
    }

    pub fn subprocesses(&self) -> &[Subprocess] {
        &self.subprocesses
    }

    pub fn completed(&self) -> usize {
        self.done
    }

    pub fn all_done(&self) -> bool {
        self.done == self.subprocesses.len()
    }

    pub fn next_subprocess(&self) -> Option<(usize, &Subprocess)> {
        self.subprocesses.get(self.done).map(|s| (self.done, s))
    }

    pub fn resting_on(&self, item: &str) -> Option<&str> {
        self.resting.get(item).map(String::as_str)
    }

    pub fn last_seen_bearing(&self, label: &str) -> Option<f64> {
        self.last_seen.get(label).copied()
    }

    pub fn noise_model(&self) -> &NoiseModel {
        self.noise.model()
    }

    /// Advances through every subprocess whose goal now holds, in order.
    pub fn check_subprocesses(&mut self) {
        while let Some(sp) = self.subprocesses.get(self.done) {
            if !sp.goal.satisfied(self) {
                break;
            }
            let description = sp.description.clone();
            self.trace.push(EventKind::SubprocessDone { index: self.done, description });
            self.done += 1;
        }
    }

    /// Current camera view, remembering where each label was seen.
    pub fn detections(&mut self) -> Vec<Detection> {
        let mut dets = project_detections(&self.state, &self.scene, &self.camera);
        if self.camera.depth_noise > 0.0 {
            perturb_depths(&mut dets, &self.camera, &mut self.rng);
        }
        let axis = self.state.heading + self.state.head_yaw;
        for d in &dets {
            let bearing = wrap_angle(axis + (d.bbox.center_u() - 0.5) * self.camera.hfov);
            self.last_seen.insert(d.label.clone(), bearing);
        }
        dets
    }

    /// Runs a locomotion or head skill and logs it. Head moves are refused while the neck is locked.
    pub fn run_locomotion(&mut self, skill: &LocomotionSkill, source: SkillSource) -> Result<LocomotionOutcome, SkillError> {
        skill.validate()?;
        if skill.kind.is_head() && self.camera_mode.is_fixed() {
            self.trace.push(EventKind::Skill {
                call: skill.to_string(),
                source,
                duration_us: 0,
                distance: 0.0,
                walking: false,
                status: "refused: camera is fixed".into(),
            });
            return Ok(LocomotionOutcome { state: self.state.clone(), duration: 0.0, distance: 0.0, collision: None });
        }
        let out = execute_locomotion_skill(skill, &self.state, &self.scene, &mut self.noise)?;
        self.state = out.state.clone();
        self.trace.push(EventKind::Skill {
            call: skill.to_string(),
            source,
            duration_us: secs_to_us(out.duration),
            distance: out.distance,
            walking: self.state.mode == crate::world::Mode::Walking,
            status: "ok".into(),
        });
        if let Some(c) = &out.collision {
            self.trace.push(EventKind::Collision { obstacle: c.obstacle.clone(), x: c.position.x, y: c.position.y });
        }
        self.check_subprocesses();
        Ok(out)
    }

    /// Runs a registered manipulation skill against the live scene and logs it.
    pub fn run_manipulation(&mut self, name: &str, source: SkillSource) -> Result<SkillOutcome, SkillError> {
        let spec = self.registry.lookup(name)?.clone();
        let dets = self.detections();
        let out = match self.scene.object(&spec.target) {
            Some(target) => execute_manipulation_skill(&spec, &self.state, target, &dets, &mut self.rng)?,
            None => SkillOutcome {
                status: SkillStatus::PreconditionUnmet {
                    unmet: crate::skills::Unmet::TargetNotVisible { target: spec.target.clone() },
                },
                duration: 0.0,
                world_delta: None,
            },
        };
        if let Some(delta) = &out.world_delta {
            self.apply(delta)?;
        }
        let status = match &out.status {
            SkillStatus::Success => "success".to_string(),
            SkillStatus::Failure { reason } => format!("failure: {reason}"),
            SkillStatus::PreconditionUnmet { unmet } => format!("precondition unmet: {unmet}"),
        };
        self.state.mode = crate::world::Mode::Standing;
        self.trace.push(EventKind::Skill {
            call: format!("{}()", spec.name),
            source,
            duration_us: secs_to_us(out.duration),
            distance: 0.0,
            walking: false,
            status,
        });
        self.check_subprocesses();
        Ok(out)
    }

    fn apply(&mut self, delta: &WorldDelta) -> Result<(), WorldError> {
        match delta {
            WorldDelta::Grasp { item } => self.carry(item),
            WorldDelta::Place { item, on } => self.put_down(item, on),
            WorldDelta::Operate { flag } => {
                self.flags.insert(flag.clone());
                Ok(())
            }
        }
    }

    pub fn charge_fm(&mut self, stage: Stage, prompt_sha256: String, response: String, latency_s: f64, parsed: serde_json::Value) {
        self.trace.push(EventKind::FmQuery { stage, prompt_sha256, response, latency_us: secs_to_us(latency_s), parsed });
    }

    pub fn charge_connector(&mut self, latency_s: f64, behavior: impl Into<String>, reason: impl Into<String>) {
        let latency_us = secs_to_us(latency_s);
        self.trace.push(EventKind::ConnectorDecision { behavior: behavior.into(), reason: reason.into(), latency_us });
    }

    pub fn log_detection(&mut self, dets: &[Detection], target: Option<&str>) {
        let labels = dets.iter().map(|d| d.label.clone()).collect();
        let depth = target.and_then(|t| dets.iter().find(|d| d.label == t)).map(|d| d.depth);
        self.trace.push(EventKind::Detection { labels, target: target.map(str::to_string), depth });
    }
}
