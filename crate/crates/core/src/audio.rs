//! Sonification stream: footsteps, turn cues, beacons, query feedback and the
//! grab haptic, as timestamped events a client can render.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::persona::FootstepProfile;
use crate::scene::{relative_angle, Pose, Scene, SceneError, Vec3};

/// Meters of displacement per footstep sound.
pub const STRIDE_LENGTH: f64 = 0.7;
/// Accumulated same-direction yaw change per turn cue.
pub const TURN_CUE_ANGLE: f64 = FRAC_PI_4;

// Threshold slack for accumulated floating-point sums.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AudioKind {
    UserFootstep,
    GuideFootstep { profile: FootstepProfile },
    Turn { direction: TurnDirection },
    Teleport,
    BeaconPing { beacon: String },
    Processing,
    ResponseReady,
    Arrival,
    HapticGrab,
}

impl AudioKind {
    pub fn name(&self) -> &'static str {
        match self {
            AudioKind::UserFootstep => "user_footstep",
            AudioKind::GuideFootstep { .. } => "guide_footstep",
            AudioKind::Turn { .. } => "turn",
            AudioKind::Teleport => "teleport",
            AudioKind::BeaconPing { .. } => "beacon_ping",
            AudioKind::Processing => "processing",
            AudioKind::ResponseReady => "response_ready",
            AudioKind::Arrival => "arrival",
            AudioKind::HapticGrab => "haptic_grab",
        }
    }

    /// Interface sounds and haptics play at the listener, unspatialized.
    pub fn is_spatial(&self) -> bool {
        !matches!(self, AudioKind::Processing | AudioKind::ResponseReady | AudioKind::HapticGrab)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioEvent {
    pub t: f64,
    pub kind: AudioKind,
    pub source: Vec3,
}

impl AudioEvent {
    pub fn new(t: f64, kind: AudioKind, source: Vec3) -> Self {
        Self { t, kind, source }
    }

    /// Event log record: `{t, kind, source:[x,y,z], detail}`.
    pub fn to_json(&self) -> Value {
        let detail = match &self.kind {
            AudioKind::GuideFootstep { profile } => json!({ "profile": profile.as_str() }),
            AudioKind::Turn { direction } => json!({ "direction": direction }),
            AudioKind::BeaconPing { beacon } => json!({ "beacon": beacon }),
            _ => json!({}),
        };
        json!({
            "t": self.t,
            "kind": self.kind.name(),
            "source": self.source.to_array(),
            "detail": detail,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Line {
            t: f64,
            kind: String,
            source: Vec3,
            #[serde(default)]
            detail: Value,
        }
        let line: Line = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let field = |k: &str| -> Result<Value, String> {
            line.detail.get(k).cloned().ok_or_else(|| format!("`{}` event needs detail.{k}", line.kind))
        };
        let kind = match line.kind.as_str() {
            "user_footstep" => AudioKind::UserFootstep,
            "guide_footstep" => AudioKind::GuideFootstep {
                profile: serde_json::from_value(field("profile")?).map_err(|e| e.to_string())?,
            },
            "turn" => AudioKind::Turn {
                direction: serde_json::from_value(field("direction")?).map_err(|e| e.to_string())?,
            },
            "teleport" => AudioKind::Teleport,
            "beacon_ping" => AudioKind::BeaconPing {
                beacon: field("beacon")?.as_str().ok_or("beacon id must be a string")?.to_owned(),
            },
            "processing" => AudioKind::Processing,
            "response_ready" => AudioKind::ResponseReady,
            "arrival" => AudioKind::Arrival,
            "haptic_grab" => AudioKind::HapticGrab,
            other => return Err(format!("unknown event kind `{other}`")),
        };
        Ok(Self { t: line.t, kind, source: line.source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconSettings {
    pub duration: f64,
    pub ping_interval: f64,
}

impl Default for BeaconSettings {
    fn default() -> Self {
        Self { duration: 30.0, ping_interval: 1.0 }
    }
}

/// A temporary pinging source attached to an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub object: String,
    pub position: Vec3,
    pub created_at: f64,
    pub duration: f64,
    pub ping_interval: f64,
}

impl Beacon {
    pub fn expires_at(&self) -> f64 {
        self.created_at + self.duration
    }

    /// Pings over the whole lifetime; the last one may coincide with expiry.
    pub fn total_pings(&self) -> u64 {
        (self.duration / self.ping_interval + SLACK).floor() as u64
    }

    /// Number of pings due at or before `t`.
    fn pings_due(&self, t: f64) -> u64 {
        let k = ((t - self.created_at) / self.ping_interval + SLACK).floor();
        if k <= 0.0 {
            0
        } else {
            (k as u64).min(self.total_pings())
        }
    }

    fn ping_time(&self, k: u64) -> f64 {
        self.created_at + k as f64 * self.ping_interval
    }
}

/// Active beacons keyed by object id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeaconSet {
    beacons: BTreeMap<String, Beacon>,
}

impl BeaconSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a beacon on `object_id`, replacing (and restarting) any
    /// existing one on the same object.
    pub fn place(
        &mut self,
        scene: &Scene,
        object_id: &str,
        now: f64,
        settings: BeaconSettings,
    ) -> Result<Beacon, SceneError> {
        let obj = scene.require_object(object_id)?;
        assert!(settings.duration > 0.0 && settings.ping_interval > 0.0, "beacon timing must be positive");
        let beacon = Beacon {
            object: obj.id.clone(),
            position: obj.position,
            created_at: now,
            duration: settings.duration,
            ping_interval: settings.ping_interval,
        };
        self.beacons.insert(obj.id.clone(), beacon.clone());
        Ok(beacon)
    }

    /// Pings whose scheduled time falls in `(from, to]`, ordered by time then
    /// object id. Beacons at or past expiry are dropped afterwards.
    pub fn tick(&mut self, from: f64, to: f64) -> Vec<AudioEvent> {
        let mut events = Vec::new();
        for b in self.beacons.values() {
            for k in b.pings_due(from) + 1..=b.pings_due(to) {
                events.push(AudioEvent::new(
                    b.ping_time(k),
                    AudioKind::BeaconPing { beacon: b.object.clone() },
                    b.position,
                ));
            }
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.beacons.retain(|_, b| to < b.expires_at() - SLACK);
        events
    }

    pub fn get(&self, object_id: &str) -> Option<&Beacon> {
        self.beacons.get(object_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Beacon> {
        self.beacons.values()
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGain {
    /// `[0, 1]`
    pub gain: f64,
    /// `[-1, 1]`, -1 hard left.
    pub pan: f64,
}

/// Linear distance falloff reaching zero at `max_range`, panned by the sine
/// of the source's bearing relative to the listener's facing.
pub fn attenuate(event: &AudioEvent, listener: &Pose, max_range: f64) -> SpatialGain {
    if !event.kind.is_spatial() {
        return SpatialGain { gain: 1.0, pan: 0.0 };
    }
    let d = listener.position.horizontal_distance(event.source);
    let gain = (1.0 - d / max_range).clamp(0.0, 1.0);
    let pan = if d == 0.0 { 0.0 } else { relative_angle(listener, event.source).sin().clamp(-1.0, 1.0) };
    SpatialGain { gain, pan }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Accumulates user displacement and rotation into footstep and turn cues.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MovementCues {
    walked: f64,
    turned: f64,
}

impl MovementCues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cues for the move from `prev` to `next` at time `t`.
    pub fn update(&mut self, prev: &Pose, next: &Pose, t: f64) -> Vec<AudioEvent> {
        let mut events = Vec::new();
        self.walked += prev.position.horizontal_distance(next.position);
        while self.walked >= STRIDE_LENGTH - SLACK {
            self.walked = (self.walked - STRIDE_LENGTH).max(0.0);
            events.push(AudioEvent::new(t, AudioKind::UserFootstep, next.position));
        }
        let delta = wrap_angle(next.yaw - prev.yaw);
        if delta != 0.0 {
            if self.turned * delta < 0.0 {
                self.turned = 0.0;
            }
            self.turned += delta;
            while self.turned.abs() >= TURN_CUE_ANGLE - SLACK {
                let direction = if self.turned > 0.0 { TurnDirection::Right } else { TurnDirection::Left };
                self.turned -= TURN_CUE_ANGLE.copysign(self.turned);
                events.push(AudioEvent::new(t, AudioKind::Turn { direction }, next.position));
            }
        }
        events
    }

    /// Forget partial progress, e.g. after a teleport.
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}
