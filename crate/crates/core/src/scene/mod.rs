//! Virtual environment: objects with alt text, the walkable grid, avatar poses.
//!
//! Scenes are loaded from a JSON document and validated once; everything
//! downstream assumes the invariants checked here (unique ids, non-empty
//! descriptions, reachable-looking anchors on free cells).

mod view;

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use view::{
    birds_eye_view, clock_bearing, first_person_view, object_range_and_bearing, relative_angle,
    AbsoluteEntry, RelativeEntry, SceneView, ViewEntries, ViewKind, ViewSettings,
};

/// Point or displacement in meters. The ground plane is x–z, y is up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    /// Distance on the ground plane, ignoring height.
    pub fn horizontal_distance(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }

    pub fn distance(self, other: Vec3) -> f64 {
        let d = self.sub(other);
        (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Serialize for Vec3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2}, {:.2})", self.x, self.y, self.z)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Position plus heading. Yaw 0 faces +z and increases clockwise seen from above,
/// so yaw π/2 faces +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw: normalize_yaw(yaw) }
    }

    /// Unit vector the pose is facing, on the ground plane.
    pub fn forward(&self) -> Vec3 {
        Vec3::new(self.yaw.sin(), 0.0, self.yaw.cos())
    }

    /// Unit vector to the pose's right, on the ground plane.
    pub fn right(&self) -> Vec3 {
        Vec3::new(self.yaw.cos(), 0.0, -self.yaw.sin())
    }

    /// Maps a local `(right, forward)` offset into world coordinates.
    pub fn local_to_world(&self, right: f64, forward: f64) -> Vec3 {
        self.position
            .add(self.right().scale(right))
            .add(self.forward().scale(forward))
    }

    pub fn turned(&self, delta: f64) -> Pose {
        Pose::new(self.position, self.yaw + delta)
    }

    /// Yaw that faces from `from` toward `to`; `None` when they coincide on the ground plane.
    pub fn yaw_towards(from: Vec3, to: Vec3) -> Option<f64> {
        let dx = to.x - from.x;
        let dz = to.z - from.z;
        if dx.hypot(dz) < 1e-12 {
            None
        } else {
            Some(normalize_yaw(dx.atan2(dz)))
        }
    }
}

/// Integer grid coordinate `(col, row)`; col runs along +x, row along +z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.col, self.row)
    }
}

/// Walkable occupancy grid laid over the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub width: u32,
    pub height: u32,
    blocked: BTreeSet<Cell>,
}

impl WalkGrid {
    pub fn new(
        origin: Vec3,
        cell_size: f64,
        width: u32,
        height: u32,
        blocked: impl IntoIterator<Item = Cell>,
    ) -> Result<Self, SceneError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(SceneError::Malformed(format!("cell_size must be > 0, got {cell_size}")));
        }
        if width == 0 || height == 0 {
            return Err(SceneError::Malformed("grid width and height must be >= 1".into()));
        }
        if !origin.is_finite() {
            return Err(SceneError::Malformed("grid origin must be finite".into()));
        }
        let grid = Self { origin, cell_size, width, height, blocked: blocked.into_iter().collect() };
        if let Some(c) = grid.blocked.iter().find(|c| !grid.in_bounds(**c)) {
            return Err(SceneError::Malformed(format!("blocked cell {c} is outside the grid")));
        }
        Ok(grid)
    }

    /// An open grid with no blocked cells.
    pub fn open(origin: Vec3, cell_size: f64, width: u32, height: u32) -> Result<Self, SceneError> {
        Self::new(origin, cell_size, width, height, [])
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as u32) < self.width && (c.row as u32) < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked.contains(&c)
    }

    /// In bounds and not blocked.
    pub fn is_walkable(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_blocked(c)
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.blocked.iter().copied()
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        if blocked {
            self.blocked.insert(c);
        } else {
            self.blocked.remove(&c);
        }
    }

    /// Cell containing a world point. Points outside the grid still map to a
    /// (possibly out-of-bounds) cell.
    pub fn cell_of(&self, p: Vec3) -> Cell {
        let col = ((p.x - self.origin.x) / self.cell_size).floor();
        let row = ((p.z - self.origin.z) / self.cell_size).floor();
        Cell::new(col.clamp(i32::MIN as f64, i32::MAX as f64) as i32, row.clamp(i32::MIN as f64, i32::MAX as f64) as i32)
    }

    pub fn cell_center(&self, c: Cell) -> Vec3 {
        Vec3::new(
            self.origin.x + (c.col as f64 + 0.5) * self.cell_size,
            self.origin.y,
            self.origin.z + (c.row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn is_walkable_point(&self, p: Vec3) -> bool {
        self.is_walkable(self.cell_of(p))
    }
}

/// A registered object with its canonical name and alt text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub display_name: String,
    pub description: String,
    #[serde(rename = "color")]
    pub color_tag: String,
    #[serde(rename = "shape")]
    pub shape_tag: String,
    pub position: Vec3,
    pub radius: f64,
    pub anchor: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub objects: Vec<SceneObject>,
    pub grid: WalkGrid,
    pub spawn: Pose,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("malformed scene: {0}")]
    Malformed(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObjectId(String),
    #[error("anchor of `{id}` lies on blocked or out-of-bounds cell {cell}")]
    AnchorBlocked { id: String, cell: Cell },
    #[error("object `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

// On-disk layout. Kept separate from the validated types so that the grid's
// blocked set and the pose normalisation stay private to the loader.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    name: String,
    spawn: Pose,
    grid: GridFile,
    #[serde(default)]
    objects: Vec<SceneObject>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    origin: Vec3,
    cell_size: f64,
    width: u32,
    height: u32,
    #[serde(default)]
    blocked: Vec<[i32; 2]>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !id.starts_with('_')
        && !id.ends_with('_')
}

impl Scene {
    /// Builds a scene from parts and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        objects: Vec<SceneObject>,
        grid: WalkGrid,
        spawn: Pose,
    ) -> Result<Self, SceneError> {
        let spawn = Pose::new(spawn.position, spawn.yaw);
        if !spawn.position.is_finite() || !spawn.yaw.is_finite() {
            return Err(SceneError::Malformed("spawn pose must be finite".into()));
        }
        if !grid.is_walkable_point(spawn.position) {
            return Err(SceneError::Malformed(format!(
                "spawn {} is outside the grid or on a blocked cell",
                spawn.position
            )));
        }
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::DuplicateObjectId(o.id.clone()));
            }
            if !valid_id(&o.id) {
                return Err(SceneError::Malformed(format!(
                    "object id `{}` must be lowercase and underscore-separated",
                    o.id
                )));
            }
            if o.description.trim().is_empty() {
                return Err(SceneError::EmptyDescription(o.id.clone()));
            }
            if o.display_name.trim().is_empty() {
                return Err(SceneError::Malformed(format!("object `{}` has an empty display_name", o.id)));
            }
            if !(o.radius.is_finite() && o.radius > 0.0) {
                return Err(SceneError::Malformed(format!("object `{}` radius must be > 0", o.id)));
            }
            if !o.position.is_finite() || !o.anchor.is_finite() {
                return Err(SceneError::Malformed(format!("object `{}` has non-finite coordinates", o.id)));
            }
            let cell = grid.cell_of(o.anchor);
            if !grid.is_walkable(cell) {
                return Err(SceneError::AnchorBlocked { id: o.id.clone(), cell });
            }
        }
        Ok(Self { name: name.into(), objects, grid, spawn })
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn require_object(&self, id: &str) -> Result<&SceneObject, SceneError> {
        self.object(id).ok_or_else(|| SceneError::UnknownObject(id.to_owned()))
    }

    /// Case-insensitive lookup by canonical display name.
    pub fn object_by_display_name(&self, name: &str) -> Option<&SceneObject> {
        let name = name.trim();
        self.objects.iter().find(|o| o.display_name.eq_ignore_ascii_case(name))
    }

    /// Serializes back to the scene file format.
    pub fn to_json(&self) -> String {
        let file = SceneFile {
            name: self.name.clone(),
            spawn: self.spawn,
            grid: GridFile {
                origin: self.grid.origin,
                cell_size: self.grid.cell_size,
                width: self.grid.width,
                height: self.grid.height,
                blocked: self.grid.blocked_cells().map(|c| [c.col, c.row]).collect(),
            },
            objects: self.objects.clone(),
        };
        serde_json::to_string_pretty(&file).expect("scene serializes")
    }
}

/// Parses and validates a scene file.
pub fn load_scene(bytes: &[u8]) -> Result<Scene, SceneError> {
    let file: SceneFile =
        serde_json::from_slice(bytes).map_err(|e| SceneError::Malformed(e.to_string()))?;
    let grid = WalkGrid::new(
        file.grid.origin,
        file.grid.cell_size,
        file.grid.width,
        file.grid.height,
        file.grid.blocked.iter().map(|&[c, r]| Cell::new(c, r)),
    )?;
    Scene::new(file.name, file.objects, grid, file.spawn)
}
