//! Headless sighted-guide agent for accessible social VR.
//!
//! A guide character follows a blind or low vision user around a scene,
//! answers questions about it, escorts the user to objects and places audio
//! beacons. The engine is deterministic under a fixed time step so whole
//! sessions can be replayed byte for byte.

pub mod audio;
pub mod guide;
pub mod intent;
pub mod pathfinding;
pub mod persona;
pub mod scene;
pub mod session;

pub use audio::{AudioEvent, AudioKind, BeaconSet, BeaconSettings};
pub use guide::{GuideAgent, GuideCommand, GuideError, GuideState, TravelMode};
pub use intent::{Intent, LlmClient, RemoteBackend, RuleBackend, ScriptedBackend};
pub use pathfinding::{plan_path, Path, PathError};
pub use persona::{Persona, PersonaId, PersonaRegistry};
pub use scene::{load_scene, Pose, Scene, SceneError, SceneObject, Vec3, WalkGrid};
pub use session::{create_session, Command, EntryKind, Session, SessionConfig, TranscriptEntry};
