//! Contract checks shared by the property suite and the acceptance run.
//! Each check takes a seed and reports the first violation it finds.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use humanoid_agent::call::{parse_action_call, Arg, Literal, SkillCall};
use humanoid_agent::connector::{adjust_approach, move_towards, search_for, NavStatus, NavigationParams};
use humanoid_agent::harness::Scenario;
use humanoid_agent::sim::{CameraMode, Latencies, World, WorldInit};
use humanoid_agent::skills::{check_preconditions, execute_manipulation_skill, facing_error, ManipulationSkillSpec, SkillStatus};
use humanoid_agent::trace::TraceHeader;
use humanoid_agent::world::{
    project_detections, CameraModel, NoiseModel, ObjectSpec, RobotState, SceneMap, Side, MAX_HEAD_PITCH, MAX_HEAD_YAW,
};
use humanoid_agent::Point;

pub struct Fuzz {
    pub scene: SceneMap,
    pub start: RobotState,
}

fn clear(scene: &SceneMap, p: Point, margin: f64, size: f64) -> bool {
    let inside = p.x > margin && p.y > margin && p.x < size - margin && p.y < size - margin;
    let off_objects = scene.objects.iter().all(|o| o.position.distance(p) > o.footprint_radius + margin);
    let off_walls = scene.walls.iter().all(|w| point_segment_distance(p, w.a, w.b) > margin);
    inside && off_objects && off_walls
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.distance(a + ab.scale(t))
}

/// Square room with random crates, up to two free-standing walls and one `goal` object.
pub fn fuzz_scene(rng: &mut ChaCha8Rng) -> Fuzz {
    loop {
        let size = rng.random_range(6.0..16.0);
        let mut scene: SceneMap = serde_json::from_value(serde_json::json!({
            "bounds": { "min": [0, 0], "max": [size, size] },
            "rooms": [{ "name": "hall", "polygon": [[0, 0], [size, 0], [size, size], [0, size]] }],
            "semantic_map": "",
        }))
        .expect("scene json");
        for _ in 0..rng.random_range(0..=2) {
            let a = Point::new(rng.random_range(1.0..size - 1.0), rng.random_range(1.0..size - 1.0));
            let b = a + Point::from_angle(rng.random_range(-3.2..3.2)).scale(rng.random_range(0.5..3.0));
            if b.x > 0.5 && b.y > 0.5 && b.x < size - 0.5 && b.y < size - 0.5 {
                scene.walls.push(humanoid_agent::Segment { a, b });
            }
        }
        let place = |scene: &mut SceneMap, name: String, radius: f64, solid: bool, surface: f64, height: f64, rng: &mut ChaCha8Rng| {
            for _ in 0..50 {
                let p = Point::new(rng.random_range(0.0..size), rng.random_range(0.0..size));
                if clear(scene, p, radius + 0.3, size) {
                    scene.objects.push(ObjectSpec {
                        name,
                        position: p,
                        footprint_radius: radius,
                        surface_height: surface,
                        height,
                        alignment_direction: Point::from_angle(rng.random_range(-3.2..3.2)),
                        navigable: !solid,
                        solid,
                    });
                    return;
                }
            }
        };
        for i in 0..rng.random_range(0..=5) {
            let (r, h) = (rng.random_range(0.15..0.5), rng.random_range(0.3..1.2));
            place(&mut scene, format!("crate{i}"), r, true, 0.0, h, rng);
        }
        let tabletop = rng.random::<bool>();
        let (r, s, h) = if tabletop { (rng.random_range(0.03..0.1), 0.75, rng.random_range(0.1..0.3)) } else { (rng.random_range(0.05..0.4), 0.0, rng.random_range(0.5..1.4)) };
        place(&mut scene, "goal".into(), r, false, s, h, rng);
        if scene.object("goal").is_none() {
            continue;
        }
        let names: Vec<String> = scene.objects.iter().map(|o| o.name.clone()).collect();
        scene.semantic_map = format!("The hall holds {}.", names.join(", "));
        for _ in 0..100 {
            let p = Point::new(rng.random_range(0.0..size), rng.random_range(0.0..size));
            if clear(&scene, p, 0.45, size) {
                let start = RobotState::at(p.x, p.y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).with_head(0.0, 0.3);
                if scene.validate().is_ok() && start.validate(&scene).is_ok() {
                    return Fuzz { scene, start };
                }
            }
        }
    }
}

pub fn world_for(f: &Fuzz, seed: u64) -> World {
    let office = Scenario::office();
    World::new(WorldInit {
        scene: f.scene.clone(),
        start: f.start.clone(),
        camera: office.camera,
        camera_mode: CameraMode::Active,
        noise: NoiseModel { seed, ..NoiseModel::default() },
        registry: Arc::new(office.registry().expect("office registry")),
        subprocesses: Vec::new(),
        latencies: Latencies::default(),
        header: TraceHeader::default(),
    })
    .expect("fuzzed world is valid")
}

fn goal_skill(goal: &ObjectSpec) -> ManipulationSkillSpec {
    serde_json::from_value(serde_json::json!({
        "name": "touch_goal", "description": "touch the goal", "target": "goal", "base_success": 0.9,
        "precondition": { "max_distance": (goal.footprint_radius + 0.35).max(0.7), "max_facing_error": 0.35, "pitch_range": [0.6, 1.1] }
    }))
    .expect("spec json")
}

/// Termination of all three behaviours, plus the success post-conditions of
/// `move_towards` and `adjust_approach`.
pub fn nav_contracts(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = fuzz_scene(&mut rng);
    let p = NavigationParams::default();
    let goal = f.scene.object("goal").expect("goal").clone();

    let mut w = world_for(&f, seed);
    let r = move_towards(&mut w, "goal", &p).map_err(|e| e.to_string())?;
    if r.iterations > p.max_iterations {
        return Err(format!("move_towards ran {} iterations", r.iterations));
    }
    let d = w.state.position().distance(goal.position);
    if r.status == NavStatus::Success && d > p.distance_threshold + 1e-9 {
        return Err(format!("move_towards succeeded {d:.3} m away"));
    }

    let mut w = world_for(&f, seed);
    let side = if rng.random::<bool>() { Side::Left } else { Side::Right };
    let r = search_for(&mut w, "goal", side, &p).map_err(|e| e.to_string())?;
    if r.iterations > p.search_max_iterations {
        return Err(format!("search_for ran {} iterations", r.iterations));
    }

    let mut w = world_for(&f, seed);
    let spec = goal_skill(&goal);
    let r = adjust_approach(&mut w, &spec, side, &p).map_err(|e| e.to_string())?;
    if r.iterations > p.adjust_max_iterations {
        return Err(format!("adjust_approach ran {} iterations", r.iterations));
    }
    if r.status == NavStatus::Success {
        let dets = w.detections();
        check_preconditions(&spec, &w.state, &goal, &dets).map_err(|u| format!("adjust succeeded with {u}"))?;
        let err = facing_error(&w.state, &goal);
        if err > p.angle_threshold + 1e-9 {
            return Err(format!("adjust succeeded with facing error {err:.3}"));
        }
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn crosses(p: Point, q: Point, a: Point, b: Point) -> bool {
    let (d1, d2) = (orient(a, b, p), orient(a, b, q));
    let (d3, d4) = (orient(p, q, a), orient(p, q, b));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

/// Visibility by enumeration: horizontal bearing from the camera axis, range,
/// the vertical interval spanned by the four near/far top/bottom corners of
/// the object's silhouette, and wall crossings.
pub fn brute_force_visible(state: &RobotState, scene: &SceneMap, cam: &CameraModel) -> Vec<(String, f64)> {
    let eye = state.position();
    let axis = Point::from_angle(state.heading + state.head_yaw);
    let mut out: Vec<(String, f64)> = scene
        .objects
        .iter()
        .filter(|o| {
            let to = o.position - eye;
            let d = to.norm();
            let fwd = to.dot(axis);
            let lat = axis.x * to.y - axis.y * to.x;
            let bearing = lat.atan2(fwd);
            if d > cam.max_range || bearing.abs() > cam.hfov / 2.0 {
                return false;
            }
            let corners = [d - o.footprint_radius, d + o.footprint_radius]
                .iter()
                .flat_map(|&r| [o.surface_height, o.surface_height + o.height].map(move |z| (cam.eye_height - z).atan2(r)))
                .collect::<Vec<_>>();
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (v_lo, v_hi) = (state.head_pitch - cam.vfov / 2.0, state.head_pitch + cam.vfov / 2.0);
            if !(hi > v_lo && lo < v_hi) {
                return false;
            }
            !scene.walls.iter().any(|w| crosses(eye, o.position, w.a, w.b))
        })
        .map(|o| (o.name.clone(), o.position.distance(eye)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn detection_matches_brute_force(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = fuzz_scene(&mut rng);
    let cam = CameraModel {
        hfov: rng.random_range(0.6..2.2),
        vfov: rng.random_range(0.5..1.5),
        eye_height: rng.random_range(1.0..1.8),
        max_range: rng.random_range(3.0..20.0),
        depth_noise: 0.0,
    };
    let state = f.start.clone().with_head(rng.random_range(-MAX_HEAD_YAW..MAX_HEAD_YAW), rng.random_range(0.0..MAX_HEAD_PITCH));
    let got: Vec<(String, f64)> = project_detections(&state, &f.scene, &cam).into_iter().map(|d| (d.label, d.depth)).collect();
    let want = brute_force_visible(&state, &f.scene, &cam);
    let names = |v: &[(String, f64)]| v.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
    if names(&got) != names(&want) {
        return Err(format!("detected {:?}, brute force {:?}", names(&got), names(&want)));
    }
    for ((n, a), (_, b)) in got.iter().zip(&want) {
        if (a - b).abs() > 1e-9 {
            return Err(format!("{n}: depth {a} vs distance {b}"));
        }
    }
    Ok(())
}

/// Empirical success rate of `grasp_bottle` from an ideal pose.
pub fn grasp_rate(trials: usize, seed: u64) -> (f64, f64) {
    let sc = Scenario::office();
    let reg = sc.registry().expect("registry");
    let spec = reg.get("grasp_bottle").expect("grasp_bottle").clone();
    let bottle = sc.scene.object("bottle").expect("bottle").clone();
    let pos = bottle.position - bottle.alignment_direction.scale(0.5);
    let state = RobotState::at(pos.x, pos.y, bottle.alignment_heading()).with_head(0.0, 0.9);
    let dets = project_detections(&state, &sc.scene, &sc.camera);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ok = (0..trials)
        .filter(|_| {
            matches!(execute_manipulation_skill(&spec, &state, &bottle, &dets, &mut rng).expect("runs").status, SkillStatus::Success)
        })
        .count();
    (ok as f64 / trials as f64, spec.base_success)
}

fn random_ident(rng: &mut ChaCha8Rng) -> String {
    const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyz_";
    const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyz_0123456789";
    let mut s = String::new();
    s.push(FIRST[rng.random_range(0..FIRST.len())] as char);
    for _ in 0..rng.random_range(0..10) {
        s.push(REST[rng.random_range(0..REST.len())] as char);
    }
    s
}

pub fn random_call(rng: &mut ChaCha8Rng) -> SkillCall {
    let mut call = SkillCall::new(random_ident(rng));
    for _ in 0..rng.random_range(0..5) {
        let key = rng.random::<bool>().then(|| random_ident(rng));
        let value = match rng.random_range(0..4) {
            0 => Literal::Int(rng.random()),
            1 => Literal::Float(rng.random_range(-1e6..1e6)),
            2 => Literal::Float(f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(0..0x7ffu64) << 52))),
            _ => Literal::Str((0..rng.random_range(0..12)).map(|_| *['a', ' ', '"', '\\', '\n', '\t', 'é', '(', ')', ',', '='].get(rng.random_range(0..11)).unwrap()).collect()),
        };
        call.args.push(Arg { key, value });
    }
    call
}

pub fn call_round_trip(seed: u64) -> Result<(), String> {
    let call = random_call(&mut ChaCha8Rng::seed_from_u64(seed));
    let text = call.to_string();
    match parse_action_call(&text) {
        Ok(Some(back)) if back == call => Ok(()),
        other => Err(format!("{text} parsed as {other:?}")),
    }
}
