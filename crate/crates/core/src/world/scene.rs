use serde::{Deserialize, Serialize};

use crate::geom::{self, Segment};
use crate::Point;

use super::WorldError;

/// Nominal vertical extent of an object when the scenario does not give one.
pub const NOMINAL_OBJECT_HEIGHT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    /// Convex polygon, metres.
    pub polygon: Vec<Point>,
}

impl Room {
    pub fn contains(&self, p: Point) -> bool {
        geom::point_in_convex_polygon(p, &self.polygon)
    }

    /// True when the whole disc lies inside the room.
    pub fn contains_disc(&self, center: Point, radius: f64) -> bool {
        if !self.contains(center) {
            return false;
        }
        let n = self.polygon.len();
        (0..n).all(|i| {
            let edge = Segment::new(self.polygon[i], self.polygon[(i + 1) % n]);
            edge.distance_to_point(center) >= radius
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { min: Point::new(0.0, 0.0), max: Point::new(20.0, 20.0) }
    }
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

fn default_height() -> f64 {
    NOMINAL_OBJECT_HEIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub position: Point,
    pub footprint_radius: f64,
    /// Height of the supporting surface; 0 for floor-standing landmarks.
    pub surface_height: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    /// Unit heading the robot should face when manipulating this object.
    pub alignment_direction: Point,
    /// Landmark (navigation goal) as opposed to a graspable item.
    pub navigable: bool,
    /// Blocks locomotion and shows up in obstacle checks.
    #[serde(default)]
    pub solid: bool,
}

impl ObjectSpec {
    pub fn alignment_heading(&self) -> f64 {
        self.alignment_direction.angle()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |why: &str| Err(WorldError::InvalidObject { name: self.name.clone(), reason: why.to_string() });
        if self.name.trim().is_empty() {
            return bad("empty name");
        }
        if !(self.footprint_radius > 0.0) {
            return bad("footprint_radius must be > 0");
        }
        if !(self.surface_height >= 0.0) {
            return bad("surface_height must be >= 0");
        }
        if !(self.height > 0.0) {
            return bad("height must be > 0");
        }
        if !self.position.is_finite() {
            return bad("position must be finite");
        }
        if (self.alignment_direction.norm() - 1.0).abs() > 1e-6 {
            return bad("alignment_direction must have unit norm");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMap {
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub walls: Vec<Segment<f64>>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    /// Textual room/object layout used verbatim in prompts.
    pub semantic_map: String,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub doors: Vec<Door>,
}

/// Passage between two rooms, marked by one navigable landmark on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub rooms: [String; 2],
    pub landmarks: [String; 2],
}

impl SceneMap {
    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_mut(&mut self, name: &str) -> Option<&mut ObjectSpec> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    pub fn room_at(&self, p: Point) -> Option<&Room> {
        self.rooms.iter().find(|r| r.contains(p))
    }

    /// Landmark an item rests on, or the object itself when it is a landmark.
    pub fn landmark_for(&self, name: &str) -> Option<&ObjectSpec> {
        let obj = self.object(name)?;
        if obj.navigable {
            return Some(obj);
        }
        self.objects
            .iter()
            .filter(|o| o.navigable && o.name != obj.name)
            .filter(|o| o.position.distance(obj.position) <= o.footprint_radius)
            .min_by(|a, b| {
                a.position
                    .distance(obj.position)
                    .total_cmp(&b.position.distance(obj.position))
                    .then_with(|| a.name.cmp(&b.name))
            })
    }

    /// Name of the room containing `p`, if any.
    pub fn room_name(&self, p: Point) -> Option<&str> {
        self.room_at(p).map(|r| r.name.as_str())
    }

    /// Landmarks to visit, in order, to walk from room `from` into room `to`.
    pub fn route(&self, from: &str, to: &str) -> Option<Vec<&str>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut prev: std::collections::BTreeMap<&str, (&str, &Door, usize)> = Default::default();
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(room) = queue.pop_front() {
            for d in &self.doors {
                for side in 0..2 {
                    let next = d.rooms[1 - side].as_str();
                    if d.rooms[side] == room && next != from && !prev.contains_key(next) {
                        prev.insert(next, (room, d, side));
                        queue.push_back(next);
                    }
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = to;
        while cur != from {
            let (room, d, side) = prev.get(cur)?;
            path.push(d.landmarks[1 - side].as_str());
            path.push(d.landmarks[*side].as_str());
            cur = room;
        }
        path.reverse();
        Some(path)
    }

    /// True when the straight segment between two points crosses no wall.
    pub fn line_of_sight(&self, from: Point, to: Point) -> bool {
        !self.walls.iter().any(|w| geom::segment_intersection(from, to, w).is_some())
    }

    /// Checks every scene invariant.
    pub fn validate(&self) -> Result<(), WorldError> {
        let b = &self.bounds;
        if !(b.max.x > b.min.x && b.max.y > b.min.y) {
            return Err(WorldError::InvalidScene("bounds must have positive extent".into()));
        }
        if self.rooms.is_empty() {
            return Err(WorldError::InvalidScene("scene needs at least one room".into()));
        }
        for room in &self.rooms {
            if !geom::is_convex(&room.polygon) {
                return Err(WorldError::InvalidScene(format!("room `{}` is not a convex polygon", room.name)));
            }
            if let Some(p) = room.polygon.iter().find(|p| !b.contains(**p)) {
                return Err(WorldError::InvalidScene(format!("room `{}` vertex {:?} outside bounds", room.name, p)));
            }
        }
        for w in &self.walls {
            if !b.contains(w.a) || !b.contains(w.b) {
                return Err(WorldError::InvalidScene(format!("wall {:?} outside bounds", w)));
            }
        }
        let mut names: Vec<&str> = self.rooms.iter().map(|r| r.name.as_str()).collect();
        for obj in &self.objects {
            obj.validate()?;
            let inside = self.rooms.iter().filter(|r| r.contains_disc(obj.position, obj.footprint_radius)).count();
            if inside != 1 {
                return Err(WorldError::InvalidObject {
                    name: obj.name.clone(),
                    reason: format!("footprint lies inside {inside} rooms, expected exactly 1"),
                });
            }
            names.push(&obj.name);
        }
        for d in &self.doors {
            for side in 0..2 {
                let lm = self.object(&d.landmarks[side]).filter(|o| o.navigable).ok_or_else(|| {
                    WorldError::InvalidScene(format!("door landmark `{}` is not a navigable object", d.landmarks[side]))
                })?;
                if self.room_name(lm.position) != Some(d.rooms[side].as_str()) {
                    return Err(WorldError::InvalidScene(format!("door landmark `{}` not in room `{}`", lm.name, d.rooms[side])));
                }
            }
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(WorldError::InvalidScene(format!("duplicate name `{}`", w[0])));
        }
        for name in names {
            let n = count_mentions(&self.semantic_map, name);
            if n != 1 {
                return Err(WorldError::InvalidScene(format!(
                    "semantic map mentions `{name}` {n} times, expected exactly once"
                )));
            }
        }
        Ok(())
    }
}

/// Whole-word occurrences of `name`; word characters are `[A-Za-z0-9_]`.
pub fn count_mentions(text: &str, name: &str) -> usize {
    if name.is_empty() {
        return 0;
    }
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '_';
    text.match_indices(name)
        .filter(|(i, m)| {
            let before = text[..*i].chars().next_back();
            let after = text[i + m.len()..].chars().next();
            !before.is_some_and(is_word) && !after.is_some_and(is_word)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_scene() -> SceneMap {
        SceneMap {
            rooms: vec![Room {
                name: "lab".into(),
                polygon: vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 10.0), Point::new(0.0, 10.0)],
            }],
            walls: vec![],
            objects: vec![ObjectSpec {
                name: "desk".into(),
                position: Point::new(5.0, 5.0),
                footprint_radius: 0.4,
                surface_height: 0.0,
                height: 0.75,
                alignment_direction: Point::new(0.0, 1.0),
                navigable: true,
                solid: true,
            }],
            semantic_map: "The lab holds a desk.".into(),
            bounds: Bounds::default(),
            doors: vec![],
        }
    }

    #[test]
    fn valid_scene_passes() {
        tiny_scene().validate().unwrap();
    }

    #[test]
    fn mention_counting_is_whole_word() {
        assert_eq!(count_mentions("cup and coffee_cup", "cup"), 1);
        assert_eq!(count_mentions("cup, cup.", "cup"), 2);
        assert_eq!(count_mentions("teacup", "cup"), 0);
    }

    #[test]
    fn object_outside_rooms_rejected() {
        let mut s = tiny_scene();
        s.objects[0].position = Point::new(9.8, 5.0);
        assert!(matches!(s.validate(), Err(WorldError::InvalidObject { .. })));
    }

    #[test]
    fn missing_semantic_mention_rejected() {
        let mut s = tiny_scene();
        s.semantic_map = "The lab is empty.".into();
        assert!(matches!(s.validate(), Err(WorldError::InvalidScene(_))));
    }

    #[test]
    fn non_unit_alignment_rejected() {
        let mut s = tiny_scene();
        s.objects[0].alignment_direction = Point::new(0.0, 2.0);
        assert!(s.validate().is_err());
    }
}
