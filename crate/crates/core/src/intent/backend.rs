use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::persona::{Persona, PersonaId, PersonaRegistry};
use crate::scene::{Pose, Scene, SceneView};

use super::classify::{classify_rule_based, persona_request, render_action, Normalized, ACTION_MARKER};
use super::{replies, ClassifyError, Intent, PromptBundle};

/// Everything a backend may look at. Remote backends only read `bundle`;
/// the rule backend works from the structured fields.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub bundle: PromptBundle,
    pub scene: Arc<Scene>,
    pub persona: Persona,
    pub user: Pose,
    /// First-person capture the context blocks were rendered from.
    pub first_person: SceneView,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// Raw reply, possibly ending in an action line.
    pub text: String,
    /// Set by backends that classify directly instead of emitting an action line.
    pub intent: Option<Intent>,
    pub persona: Option<PersonaId>,
    pub clarification: Option<ClassifyError>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), intent: None, persona: None, clarification: None }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("unusable backend response: {0}")]
    BadResponse(String),
}

pub trait LlmClient: Send + Sync {
    fn backend_id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;

    /// Slow backends are driven off the simulation thread.
    fn runs_in_background(&self) -> bool {
        false
    }
}

/// Keyword classifier plus per-voice templates. Fully deterministic.
#[derive(Debug, Clone)]
pub struct RuleBackend {
    personas: PersonaRegistry,
}

impl Default for RuleBackend {
    fn default() -> Self {
        Self::new(PersonaRegistry::with_builtins())
    }
}

impl RuleBackend {
    pub fn new(personas: PersonaRegistry) -> Self {
        Self { personas }
    }

    fn other_reply(persona: &Persona, query: &str) -> String {
        let q = Normalized::new(query);
        if q.has("thank") || q.has("thanks") {
            replies::thanks(persona).to_owned()
        } else if q.has("how are you") || q.has("how's it going") {
            replies::small_talk(persona).to_owned()
        } else if q.has("who are you") || q.has("what are you") || q.has("what can you do") {
            replies::identity(persona)
        } else {
            replies::fallback(persona).to_owned()
        }
    }
}

impl LlmClient for RuleBackend {
    fn backend_id(&self) -> &str {
        "rule"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, BackendError> {
        let persona = &req.persona;
        let scene = &*req.scene;
        let query = &req.bundle.user_query;
        if let Some(id) = persona_request(query, &self.personas) {
            let next = self.personas.get(id.as_str()).map_err(|e| BackendError::BadResponse(e.to_string()))?;
            return Ok(Completion {
                text: replies::persona_switched(next),
                intent: Some(Intent::Other),
                persona: Some(id),
                clarification: None,
            });
        }
        let intent = match classify_rule_based(query, scene, &req.first_person) {
            Ok(intent) => intent,
            Err(err) => {
                let text = match &err {
                    ClassifyError::AmbiguousReference { candidates } => {
                        let names: Vec<String> = candidates
                            .iter()
                            .map(|id| scene.object(id).map_or_else(|| id.clone(), |o| o.display_name.clone()))
                            .collect();
                        replies::clarify(&names)
                    }
                    ClassifyError::UnknownReference { .. } => replies::unknown_reference().to_owned(),
                    ClassifyError::EmptyQuery => replies::fallback(persona).to_owned(),
                };
                return Ok(Completion { text, intent: None, persona: None, clarification: Some(err) });
            }
        };
        let name = |id: &str| scene.object(id).map(|o| o.display_name.clone()).unwrap_or_default();
        let mut text = match &intent {
            Intent::HolisticDescription => replies::holistic(persona, scene, &req.user),
            Intent::VisualQuestion { subject: Some(id) } => match scene.object(id) {
                Some(obj) => replies::visual_answer(persona, scene, &req.user, obj),
                None => replies::in_view(persona, &req.first_person),
            },
            Intent::VisualQuestion { subject: None } => replies::in_view(persona, &req.first_person),
            Intent::GoTo { .. } => replies::acknowledge(persona).to_owned(),
            Intent::AddBeacon { object } => replies::beacon_placed(persona, &name(object)),
            Intent::Other => Self::other_reply(persona, query),
        };
        if let Some(action) = render_action(&intent, scene) {
            text.push('\n');
            text.push_str(ACTION_MARKER);
            text.push(' ');
            text.push_str(&action);
        }
        Ok(Completion { text, intent: Some(intent), persona: None, clarification: None })
    }
}

/// Replays canned replies in order; errors once they run out.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { replies: Mutex::new(replies.into_iter().map(Into::into).collect()) }
    }

    /// One reply per JSON array element.
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        let replies: Vec<String> = serde_json::from_slice(bytes)?;
        Ok(Self::new(replies))
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().map(|q| q.len()).unwrap_or(0)
    }
}

impl LlmClient for ScriptedBackend {
    fn backend_id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _req: &CompletionRequest) -> Result<Completion, BackendError> {
        let mut queue = self.replies.lock().map_err(|_| BackendError::Unavailable("reply queue poisoned".into()))?;
        queue.pop_front().map(Completion::text).ok_or_else(|| BackendError::Unavailable("no scripted replies left".into()))
    }
}
