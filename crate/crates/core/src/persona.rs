//! The six built-in guide personas and the registry that switches between them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Persona identifier, e.g. `human` or `guide_dog`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonaId(String);

impl PersonaId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PersonaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Offset in the user's local frame: `right` along +x, `forward` along +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOffset {
    pub right: f64,
    pub forward: f64,
}

/// How the guide keeps up with the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracking {
    /// Walks toward its anchor at guide speed.
    #[default]
    Walk,
    /// Rides along, snapped to its anchor every tick.
    Attached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub offset: LocalOffset,
    #[serde(default)]
    pub tracking: Tracking,
}

impl PlacementSpec {
    pub const fn walk(right: f64, forward: f64) -> Self {
        Self { offset: LocalOffset { right, forward }, tracking: Tracking::Walk }
    }

    pub fn follow_distance(&self) -> f64 {
        self.offset.right.hypot(self.offset.forward)
    }
}

/// Sound the guide makes when it moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FootstepProfile {
    HumanSteps,
    PawSteps,
    CaneTaps,
    MetalSteps,
    WingFlaps,
    None,
}

impl FootstepProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            FootstepProfile::HumanSteps => "human_steps",
            FootstepProfile::PawSteps => "paw_steps",
            FootstepProfile::CaneTaps => "cane_taps",
            FootstepProfile::MetalSteps => "metal_steps",
            FootstepProfile::WingFlaps => "wing_flaps",
            FootstepProfile::None => "none",
        }
    }
}

/// Speaking register. Selects the reply templates of the rule backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoiceProfile {
    LightFriendly,
    AiryEnthusiastic,
    SeriousMonotone,
    RoboticMonotone,
    BritishSophisticated,
    SoftAiry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: PersonaId,
    pub display_name: String,
    pub descriptor: String,
    pub placement: PlacementSpec,
    pub visible: bool,
    pub voice_profile: VoiceProfile,
    pub footstep_profile: FootstepProfile,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersonaError {
    #[error("unknown persona `{0}`")]
    UnknownPersona(String),
    #[error("persona `{0}` is already registered")]
    DuplicatePersona(String),
    #[error("invalid persona `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("malformed persona pack: {0}")]
    MalformedPack(String),
}

/// Arm's length, the default follow distance.
pub const ARMS_LENGTH: f64 = 0.75;

pub fn builtin_personas() -> Vec<Persona> {
    fn p(
        id: &str,
        display_name: &str,
        descriptor: &str,
        placement: PlacementSpec,
        visible: bool,
        voice_profile: VoiceProfile,
        footstep_profile: FootstepProfile,
    ) -> Persona {
        Persona {
            id: PersonaId::new(id),
            display_name: display_name.into(),
            descriptor: descriptor.into(),
            placement,
            visible,
            voice_profile,
            footstep_profile,
        }
    }
    vec![
        p(
            "human",
            "Human",
            "warm, friendly, but still professional sighted guide",
            PlacementSpec::walk(0.0, -ARMS_LENGTH),
            true,
            VoiceProfile::LightFriendly,
            FootstepProfile::HumanSteps,
        ),
        p(
            "guide_dog",
            "Guide Dog",
            "very friendly, excited companion, who is eager to please who you're talking to",
            PlacementSpec::walk(-0.6, 0.0),
            true,
            VoiceProfile::AiryEnthusiastic,
            FootstepProfile::PawSteps,
        ),
        p(
            "white_cane",
            "White Cane",
            "computer-like, succinct assistant, who gives the straight facts",
            PlacementSpec::walk(0.0, 0.5),
            true,
            VoiceProfile::SeriousMonotone,
            FootstepProfile::CaneTaps,
        ),
        p(
            "robot",
            "Robot",
            "formal and assertive assistant, who talks like a robot",
            PlacementSpec::walk(0.0, -ARMS_LENGTH),
            true,
            VoiceProfile::RoboticMonotone,
            FootstepProfile::MetalSteps,
        ),
        p(
            "bird",
            "Bird",
            "wise, old-fashioned, slightly Shakespearean-sounding mentor",
            PlacementSpec { offset: LocalOffset { right: 0.25, forward: 0.0 }, tracking: Tracking::Attached },
            true,
            VoiceProfile::BritishSophisticated,
            FootstepProfile::WingFlaps,
        ),
        p(
            "invisible",
            "Invisible",
            "gentle, soft-spoken assistant who gives very brief statements, as though slipping in words to someone without trying to interrupt what they're doing",
            PlacementSpec::walk(0.0, -ARMS_LENGTH),
            false,
            VoiceProfile::SoftAiry,
            FootstepProfile::None,
        ),
    ]
}

fn validate(p: &Persona) -> Result<(), PersonaError> {
    let invalid = |reason: &str| PersonaError::Invalid { id: p.id.to_string(), reason: reason.into() };
    if p.id.as_str().is_empty() || !p.id.as_str().chars().all(|c| c.is_ascii_lowercase() || c == '_' || c.is_ascii_digit()) {
        return Err(invalid("id must be lowercase and underscore-separated"));
    }
    if p.descriptor.trim().is_empty() {
        return Err(invalid("descriptor must not be empty"));
    }
    let d = p.placement.follow_distance();
    if !(d.is_finite() && d > 0.0) {
        return Err(invalid("follow distance must be > 0"));
    }
    Ok(())
}

/// Immutable-after-startup set of personas, built-ins first.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaRegistry {
    personas: Vec<Persona>,
}

impl Default for PersonaRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PersonaRegistry {
    pub fn with_builtins() -> Self {
        Self { personas: builtin_personas() }
    }

    pub fn get(&self, id: &str) -> Result<&Persona, PersonaError> {
        self.personas
            .iter()
            .find(|p| p.id.as_str() == id)
            .ok_or_else(|| PersonaError::UnknownPersona(id.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Persona> {
        self.personas.iter()
    }

    pub fn len(&self) -> usize {
        self.personas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.personas.is_empty()
    }

    pub fn register(&mut self, persona: Persona) -> Result<(), PersonaError> {
        validate(&persona)?;
        if self.personas.iter().any(|p| p.id == persona.id) {
            return Err(PersonaError::DuplicatePersona(persona.id.to_string()));
        }
        self.personas.push(persona);
        Ok(())
    }

    /// Registers every persona in a JSON pack: `{"personas": [Persona, ...]}`.
    /// Nothing is registered if any entry is rejected.
    pub fn register_pack(&mut self, bytes: &[u8]) -> Result<usize, PersonaError> {
        #[derive(Deserialize)]
        struct Pack {
            personas: Vec<Persona>,
        }
        let pack: Pack = serde_json::from_slice(bytes).map_err(|e| PersonaError::MalformedPack(e.to_string()))?;
        let mut next = self.clone();
        for p in pack.personas.iter().cloned() {
            next.register(p)?;
        }
        *self = next;
        Ok(pack.personas.len())
    }
}
