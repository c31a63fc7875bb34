use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Pose, Scene, SceneError, Vec3};

/// Field of view and draw distance used for first-person captures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSettings {
    /// Horizontal field of view in degrees, `0 < fov <= 360`.
    pub fov_deg: f64,
    /// Meters; may be infinite.
    pub max_range: f64,
}

impl Default for ViewSettings {
    fn default() -> Self {
        Self { fov_deg: 90.0, max_range: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    FirstPerson,
    BirdsEye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeEntry {
    pub id: String,
    pub display_name: String,
    pub description: String,
    pub distance: f64,
    pub clock_bearing: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteEntry {
    pub id: String,
    pub display_name: String,
    pub description: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "entries", rename_all = "snake_case")]
pub enum ViewEntries {
    FirstPerson(Vec<RelativeEntry>),
    BirdsEye(Vec<AbsoluteEntry>),
}

/// One of the two structured captures that ground the guide's answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub captured_at: f64,
    #[serde(flatten)]
    pub entries: ViewEntries,
}

impl SceneView {
    pub fn kind(&self) -> ViewKind {
        match self.entries {
            ViewEntries::FirstPerson(_) => ViewKind::FirstPerson,
            ViewEntries::BirdsEye(_) => ViewKind::BirdsEye,
        }
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            ViewEntries::FirstPerson(e) => e.len(),
            ViewEntries::BirdsEye(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Object ids in view order.
    pub fn ids(&self) -> Vec<&str> {
        match &self.entries {
            ViewEntries::FirstPerson(e) => e.iter().map(|x| x.id.as_str()).collect(),
            ViewEntries::BirdsEye(e) => e.iter().map(|x| x.id.as_str()).collect(),
        }
    }

    pub fn relative_entries(&self) -> &[RelativeEntry] {
        match &self.entries {
            ViewEntries::FirstPerson(e) => e,
            ViewEntries::BirdsEye(_) => &[],
        }
    }

    /// Plain-text rendering used as a context block in prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match &self.entries {
            ViewEntries::FirstPerson(entries) => {
                let _ = writeln!(out, "Captured at t={:.1} s. Objects the player is looking at, nearest first:", self.captured_at);
                if entries.is_empty() {
                    out.push_str("- (nothing in view)\n");
                }
                for e in entries {
                    let _ = writeln!(
                        out,
                        "- {} ({:.1} m away, at {} o'clock): {}",
                        e.display_name, e.distance, e.clock_bearing, e.description
                    );
                }
            }
            ViewEntries::BirdsEye(entries) => {
                let _ = writeln!(out, "Captured at t={:.1} s. Every object in the scene, seen from above (x east, z north):", self.captured_at);
                if entries.is_empty() {
                    out.push_str("- (the scene is empty)\n");
                }
                for e in entries {
                    let _ = writeln!(
                        out,
                        "- {} at x={:.1}, z={:.1}: {}",
                        e.display_name, e.position.x, e.position.z, e.description
                    );
                }
            }
        }
        out
    }
}

/// Signed horizontal angle from the pose's facing direction to `target`,
/// in `(-π, π]`, positive to the right.
pub fn relative_angle(pose: &Pose, target: Vec3) -> f64 {
    let d = target.sub(pose.position);
    let right = d.x * pose.right().x + d.z * pose.right().z;
    let fwd = d.x * pose.forward().x + d.z * pose.forward().z;
    if right == 0.0 && fwd == 0.0 {
        return 0.0;
    }
    right.atan2(fwd)
}

/// Maps a relative angle (radians, positive right) onto a clock face:
/// 12 dead ahead, 3 due right, each hour a 30° sector centred on it.
pub fn clock_bearing(angle: f64) -> u8 {
    let deg = angle.to_degrees().rem_euclid(360.0);
    let sector = (((deg + 15.0) / 30.0).floor() as i64).rem_euclid(12) as u8;
    if sector == 0 {
        12
    } else {
        sector
    }
}

/// Horizontal distance and clock bearing from the pose to an object's center.
pub fn object_range_and_bearing(scene: &Scene, pose: &Pose, object_id: &str) -> Result<(f64, u8), SceneError> {
    let obj = scene.require_object(object_id)?;
    Ok((
        pose.position.horizontal_distance(obj.position),
        clock_bearing(relative_angle(pose, obj.position)),
    ))
}

/// Objects whose center is within `max_range` and inside `±fov/2` of the
/// facing direction, nearest first (ties by id). No occlusion.
pub fn first_person_view(scene: &Scene, pose: &Pose, settings: ViewSettings, now: f64) -> SceneView {
    let half_fov = settings.fov_deg.to_radians() / 2.0;
    let all_round = settings.fov_deg >= 360.0;
    let mut entries: Vec<RelativeEntry> = scene
        .objects
        .iter()
        .filter_map(|o| {
            let distance = pose.position.horizontal_distance(o.position);
            if distance > settings.max_range {
                return None;
            }
            let angle = relative_angle(pose, o.position);
            if !all_round && angle.abs() > half_fov.min(PI) {
                return None;
            }
            Some(RelativeEntry {
                id: o.id.clone(),
                display_name: o.display_name.clone(),
                description: o.description.clone(),
                distance,
                clock_bearing: clock_bearing(angle),
            })
        })
        .collect();
    entries.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    SceneView { captured_at: now, entries: ViewEntries::FirstPerson(entries) }
}

/// Every object exactly once, in registry order.
pub fn birds_eye_view(scene: &Scene, now: f64) -> SceneView {
    let entries = scene
        .objects
        .iter()
        .map(|o| AbsoluteEntry {
            id: o.id.clone(),
            display_name: o.display_name.clone(),
            description: o.description.clone(),
            position: o.position,
        })
        .collect();
    SceneView { captured_at: now, entries: ViewEntries::BirdsEye(entries) }
}
