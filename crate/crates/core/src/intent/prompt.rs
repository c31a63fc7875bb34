use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::persona::Persona;
use crate::scene::{birds_eye_view, first_person_view, Pose, Scene, SceneView, ViewSettings};

use super::classify::ACTION_MARKER;

/// Seconds between context captures.
pub const CONTEXT_REFRESH_INTERVAL: f64 = 10.0;

/// True when a new pair of views is due at `clock`.
pub fn refresh_context(clock: f64, last_capture: Option<f64>) -> bool {
    match last_capture {
        None => true,
        // slack absorbs fixed-step clock accumulation error
        Some(last) => clock - last >= CONTEXT_REFRESH_INTERVAL - 1e-9,
    }
}

/// The latest pair of captures and where the player stood when they were taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextViews {
    pub birds_eye: SceneView,
    pub first_person: SceneView,
    pub viewer: Pose,
    pub captured_at: f64,
}

pub fn capture_context(scene: &Scene, user: &Pose, settings: ViewSettings, now: f64) -> ContextViews {
    ContextViews {
        birds_eye: birds_eye_view(scene, now),
        first_person: first_person_view(scene, user, settings, now),
        viewer: *user,
        captured_at: now,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub context_blocks: Vec<ContextBlock>,
    pub user_query: String,
}

impl PromptBundle {
    /// The user turn as sent to a chat model: context blocks, then the query.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        for block in &self.context_blocks {
            let _ = writeln!(out, "[{}]\n{}", block.label, block.text);
        }
        let _ = write!(out, "[Player's question]\n{}", self.user_query);
        out
    }
}

/// Instructions sent with every request: persona register, two-view framing,
/// the object list with alt text, the action-line contract and the fallback.
pub fn build_system_prompt(persona: &Persona, scene: &Scene) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "You are an AI sighted guide in the form of a {}, helping a blind or low vision player explore a video game. \
         Speak as a {}.",
        persona.display_name.to_lowercase(),
        persona.descriptor
    );
    p.push('\n');
    p.push_str(
        "We are sending you screenshots of a game, written out as text descriptions instead of images. \
         The two photos you are seeing are two views of a video game. \
         One of these photos is the bird's eye view of the entire scene. \
         The other photo is the player's current perspective and what they are currently looking at in the scene. \
         Use the bird's eye view to work out where the player is and which objects they are most likely looking at.\n\n",
    );
    p.push_str("Imagine as though a player in the game asked the question that follows, and answer it for them.\n\n");
    let _ = writeln!(p, "Major objects in the scene \"{}\" (name: description):", scene.name);
    if scene.objects.is_empty() {
        p.push_str("- (no objects are listed for this scene)\n");
    }
    for o in &scene.objects {
        let _ = writeln!(p, "- {}: {}", o.display_name, o.description);
    }
    p.push('\n');
    p.push_str(
        "Questions fall into five kinds: a holistic description of the scene, a specific visual question, \
         a request to go to a particular object, a request to add an audio beacon to a particular object, \
         or any other query.\n\n",
    );
    let _ = writeln!(
        p,
        "Tell us whether it seems like the player wants to teleport, walk, or add a sound to one of the objects above. \
         If so, finish your reply with one line of the form\n{ACTION_MARKER} <object name>, <teleport|walk|sound>\n\
         naming the object exactly as it is written in the list above, pulling the name from the list provided."
    );
    p.push('\n');
    p.push_str("For any other question, address the player's question as best as you can.\n");
    p
}

pub fn build_bundle(persona: &Persona, scene: &Scene, views: &ContextViews, query: &str) -> PromptBundle {
    let mut birds_eye = views.birds_eye.render();
    let _ = writeln!(
        birds_eye,
        "- The player stands at x={:.1}, z={:.1}, facing {:.0} degrees clockwise from north.",
        views.viewer.position.x,
        views.viewer.position.z,
        views.viewer.yaw.to_degrees()
    );
    PromptBundle {
        system_prompt: build_system_prompt(persona, scene),
        context_blocks: vec![
            ContextBlock { label: "Bird's eye view".into(), text: birds_eye },
            ContextBlock { label: "Player's current perspective".into(), text: views.first_person.render() },
        ],
        user_query: query.to_owned(),
    }
}
