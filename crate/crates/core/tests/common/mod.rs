#![allow(dead_code)]
pub mod props;

use std::sync::Arc;

use humanoid_agent::harness::Scenario;
use humanoid_agent::sim::{CameraMode, Latencies, World, WorldInit};
use humanoid_agent::trace::TraceHeader;
use humanoid_agent::world::{NoiseModel, ObjectSpec, RobotState, SceneMap};
use humanoid_agent::Point;

pub fn object(name: &str, x: f64, y: f64, radius: f64, solid: bool) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        position: Point::new(x, y),
        footprint_radius: radius,
        surface_height: 0.0,
        height: 1.2,
        alignment_direction: Point::new(0.0, 1.0),
        navigable: true,
        solid,
    }
}

/// One square room `[0, size]^2` holding `objects`.
pub fn open_room(size: f64, objects: Vec<ObjectSpec>) -> SceneMap {
    let names: Vec<String> = objects.iter().map(|o| o.name.clone()).collect();
    let scene = serde_json::json!({
        "bounds": { "min": [0, 0], "max": [size, size] },
        "rooms": [{ "name": "hall", "polygon": [[0, 0], [size, 0], [size, size], [0, size]] }],
        "semantic_map": format!("The hall contains {}.", names.join(", ")),
    });
    let mut scene: SceneMap = serde_json::from_value(scene).expect("scene json");
    scene.objects = objects;
    scene
}

/// Noise-free world with the office skill registry and camera.
pub fn world(scene: SceneMap, start: RobotState, camera_mode: CameraMode) -> World {
    let office = Scenario::office();
    World::new(WorldInit {
        scene,
        start,
        camera: office.camera,
        camera_mode,
        noise: NoiseModel { sigma_pos: 0.0, sigma_heading: 0.0, seed: 7 },
        registry: Arc::new(office.registry().expect("office registry")),
        subprocesses: Vec::new(),
        latencies: Latencies::default(),
        header: TraceHeader::default(),
    })
    .expect("valid world")
}

/// The office scene with the robot at `start`, noise off.
pub fn office_world(start: RobotState) -> World {
    world(Scenario::office().scene, start, CameraMode::Active)
}
