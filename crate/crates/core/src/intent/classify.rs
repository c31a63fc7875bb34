//! Deterministic keyword classifier and the action-line contract.

use std::collections::BTreeSet;

use crate::guide::TravelMode;
use crate::persona::{PersonaId, PersonaRegistry};
use crate::scene::{Scene, SceneObject, SceneView};

use super::{ActionError, ClassifyError, Intent};

const NAVIGATION: &[&str] = &[
    "take me", "go to", "walk me", "teleport", "bring me", "lead me", "guide me to", "get me to", "navigate to",
];
const BEACON: &[&str] = &["add a sound", "beacon", "put a sound", "add sound", "place a sound", "add an audio"];
const HOLISTIC: &[&str] = &[
    "what's going on",
    "whats going on",
    "what is going on",
    "describe",
    "what does this place look like",
    "what does it look like here",
    "where am i",
    "where are we",
    "look around",
    "what's around",
    "what is around",
    "what's here",
    "what is here",
];
const DEICTIC: &[&str] = &["this", "that", "in front of me", "ahead of me", "over there", "right there"];
const INTERROGATIVE_OPENERS: &[&str] = &[
    "what", "what's", "whats", "where", "which", "who", "how", "is", "are", "can you tell", "could you tell",
    "tell me", "do you see", "can you see", "describe",
];
const VISUAL_WORDS: &[&str] = &["color", "colour", "look like", "how far", "how big", "see", "shape", "near me"];

/// Lowercased word sequence with typographic apostrophes folded.
#[derive(Debug, Clone)]
pub(crate) struct Normalized {
    words: Vec<String>,
    padded: String,
    question: bool,
}

impl Normalized {
    pub(crate) fn new(text: &str) -> Self {
        let lowered = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
        let words: Vec<String> = lowered
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .map(|w| w.trim_matches('\''))
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect();
        let padded = format!(" {} ", words.join(" "));
        Self { words, padded, question: text.contains('?') }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub(crate) fn has(&self, phrase: &str) -> bool {
        let p = Normalized::new(phrase);
        !p.is_empty() && self.padded.contains(&p.padded)
    }

    fn has_any(&self, phrases: &[&str]) -> bool {
        phrases.iter().any(|p| self.has(p))
    }

    fn starts_with_any(&self, phrases: &[&str]) -> bool {
        phrases.iter().any(|p| {
            let p = Normalized::new(p);
            self.words.starts_with(&p.words)
        })
    }

    fn has_word(&self, w: &str) -> bool {
        self.words.iter().any(|x| x == w || x.strip_suffix('s') == Some(w))
    }

    pub(crate) fn words(&self) -> &[String] {
        &self.words
    }
}

/// Outcome of reference resolution against the registry.
#[derive(Debug, Clone, PartialEq)]
enum Reference {
    /// The query does not point at anything.
    Absent,
    Resolved(String),
}

fn explicit_name_match<'a>(q: &Normalized, scene: &'a Scene) -> Result<Option<&'a SceneObject>, ClassifyError> {
    let mut hits: Vec<&SceneObject> = scene.objects.iter().filter(|o| q.has(&o.display_name)).collect();
    if hits.is_empty() {
        return Ok(None);
    }
    // "Tall Building" beats a bare "Building"-style overlap
    let longest = hits.iter().map(|o| Normalized::new(&o.display_name).words.len()).max().unwrap_or(0);
    hits.retain(|o| Normalized::new(&o.display_name).words.len() == longest);
    match hits.as_slice() {
        [one] => Ok(Some(one)),
        many => Err(ClassifyError::AmbiguousReference { candidates: many.iter().map(|o| o.id.clone()).collect() }),
    }
}

/// Nearest entry of the first-person view among `allowed`; a distance tie is ambiguous.
fn nearest_visible(view: &SceneView, allowed: &dyn Fn(&str) -> bool) -> Result<Option<String>, ClassifyError> {
    let visible: Vec<_> = view.relative_entries().iter().filter(|e| allowed(&e.id)).collect();
    match visible.as_slice() {
        [] => Ok(None),
        [first, second, ..] if first.distance == second.distance => Err(ClassifyError::AmbiguousReference {
            candidates: visible.iter().take_while(|e| e.distance == first.distance).map(|e| e.id.clone()).collect(),
        }),
        [first, ..] => Ok(Some(first.id.clone())),
    }
}

fn resolve(q: &Normalized, scene: &Scene, view: &SceneView) -> Result<Reference, ClassifyError> {
    if let Some(obj) = explicit_name_match(q, scene)? {
        return Ok(Reference::Resolved(obj.id.clone()));
    }
    let colors: BTreeSet<&str> =
        scene.objects.iter().map(|o| o.color_tag.as_str()).filter(|c| q.has_word(c)).collect();
    let shapes: BTreeSet<&str> =
        scene.objects.iter().map(|o| o.shape_tag.as_str()).filter(|s| q.has_word(s)).collect();
    let deictic = q.has_any(DEICTIC);

    if colors.is_empty() && shapes.is_empty() {
        if !deictic {
            return Ok(Reference::Absent);
        }
        return match nearest_visible(view, &|_| true)? {
            Some(id) => Ok(Reference::Resolved(id)),
            None => Err(ClassifyError::UnknownReference { query: q.words.join(" ") }),
        };
    }

    let candidates: Vec<&SceneObject> = scene
        .objects
        .iter()
        .filter(|o| colors.is_empty() || colors.contains(o.color_tag.as_str()))
        .filter(|o| shapes.is_empty() || shapes.contains(o.shape_tag.as_str()))
        .collect();
    match candidates.as_slice() {
        [] => Err(ClassifyError::UnknownReference { query: q.words.join(" ") }),
        [one] => Ok(Reference::Resolved(one.id.clone())),
        many => {
            let ids: Vec<String> = many.iter().map(|o| o.id.clone()).collect();
            if deictic {
                if let Some(id) = nearest_visible(view, &|id| ids.iter().any(|c| c == id))? {
                    return Ok(Reference::Resolved(id));
                }
            }
            Err(ClassifyError::AmbiguousReference { candidates: ids })
        }
    }
}

fn require(reference: Reference, q: &Normalized) -> Result<String, ClassifyError> {
    match reference {
        Reference::Resolved(id) => Ok(id),
        Reference::Absent => Err(ClassifyError::UnknownReference { query: q.words.join(" ") }),
    }
}

/// Sorts a query into one of the five categories and resolves its object.
///
/// `view` is the user's first-person capture; it breaks ties for deictic
/// phrases ("this", "that", "in front of me") by picking the nearest visible
/// candidate.
pub fn classify_rule_based(query: &str, scene: &Scene, view: &SceneView) -> Result<Intent, ClassifyError> {
    let q = Normalized::new(query);
    if q.is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }

    if q.has_any(NAVIGATION) {
        let object = require(resolve(&q, scene, view)?, &q)?;
        let mode = if q.has("teleport") { TravelMode::Teleport } else { TravelMode::Walk };
        return Ok(Intent::GoTo { object, mode });
    }
    if q.has_any(BEACON) {
        let object = require(resolve(&q, scene, view)?, &q)?;
        return Ok(Intent::AddBeacon { object });
    }
    if q.has_any(HOLISTIC) {
        // only an explicit name or attribute turns a holistic opener into a question
        let explicit = explicit_name_match(&q, scene)?.is_some()
            || scene.objects.iter().any(|o| q.has_word(&o.color_tag) || q.has_word(&o.shape_tag));
        if !explicit {
            return Ok(Intent::HolisticDescription);
        }
    }
    if q.question || q.starts_with_any(INTERROGATIVE_OPENERS) {
        return match resolve(&q, scene, view)? {
            Reference::Resolved(id) => Ok(Intent::VisualQuestion { subject: Some(id) }),
            Reference::Absent if q.has_any(VISUAL_WORDS) => Ok(Intent::VisualQuestion { subject: None }),
            Reference::Absent => Ok(Intent::Other),
        };
    }
    Ok(Intent::Other)
}

/// Recognizes "become the bird"-style persona switch requests.
pub fn persona_request(query: &str, registry: &PersonaRegistry) -> Option<PersonaId> {
    let q = Normalized::new(query);
    let verbs = ["become", "turn into", "change into", "switch to", "transform into"];
    for p in registry.iter() {
        let names = [p.display_name.to_lowercase(), p.id.as_str().replace('_', " ")];
        for verb in verbs {
            for article in ["the ", "a ", "an ", ""] {
                for name in &names {
                    if q.has(&format!("{verb} {article}{name}")) {
                        return Some(p.id.clone());
                    }
                }
            }
        }
    }
    None
}

/// Action line for an intent: `<Display Name>, <teleport|walk|sound>`.
pub fn render_action(intent: &Intent, scene: &Scene) -> Option<String> {
    let (id, word) = match intent {
        Intent::GoTo { object, mode } => (object, mode.to_string()),
        Intent::AddBeacon { object } => (object, "sound".to_owned()),
        _ => return None,
    };
    scene.object(id).map(|o| format!("{}, {}", o.display_name, word))
}

/// Marker that introduces the action line in a model reply.
pub const ACTION_MARKER: &str = "ACTION:";

/// Parses `<Display Name>, <teleport|walk|sound>`, optionally prefixed by the
/// action marker. Names must match a registry display name exactly (ignoring case).
pub fn parse_action_response(text: &str, scene: &Scene) -> Result<Intent, ActionError> {
    let line = text.trim();
    let line = line
        .get(..ACTION_MARKER.len())
        .filter(|p| p.eq_ignore_ascii_case(ACTION_MARKER))
        .map_or(line, |_| line[ACTION_MARKER.len()..].trim());
    let (name, action) = line.rsplit_once(',').ok_or_else(|| ActionError::Malformed(line.to_owned()))?;
    let name = name.trim().trim_matches(|c| c == '"' || c == '\'');
    let action = action.trim().trim_end_matches('.').to_lowercase();
    let intent_for = |object: String| match action.as_str() {
        "teleport" => Ok(Intent::GoTo { object, mode: TravelMode::Teleport }),
        "walk" => Ok(Intent::GoTo { object, mode: TravelMode::Walk }),
        "sound" | "add a sound" | "beacon" => Ok(Intent::AddBeacon { object }),
        _ => Err(ActionError::UnknownAction(action.clone())),
    };
    match scene.object_by_display_name(name) {
        Some(obj) => intent_for(obj.id.clone()),
        None => Err(ActionError::NonCanonicalName { given: name.to_owned(), suggestion: suggest_object(name, scene) }),
    }
}

/// Best registry match for a paraphrased name: the object whose name words
/// and color/shape tags cover the most of the given words.
pub fn suggest_object(given: &str, scene: &Scene) -> Option<String> {
    let q = Normalized::new(given);
    if q.is_empty() {
        return None;
    }
    let mut best: Option<(usize, usize, &SceneObject)> = None;
    for o in &scene.objects {
        let name = Normalized::new(&o.display_name);
        let mut vocab: BTreeSet<&str> = name.words().iter().map(String::as_str).collect();
        vocab.insert(&o.color_tag);
        vocab.insert(&o.shape_tag);
        vocab.extend(o.id.split('_'));
        let covered = q.words().iter().filter(|w| vocab.contains(w.as_str())).count();
        let name_hits = q.words().iter().filter(|w| name.words().contains(w)).count();
        if covered == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((c, n, _)) => (covered, name_hits) > (c, n),
        };
        if better {
            best = Some((covered, name_hits, o));
        }
    }
    best.map(|(_, _, o)| o.id.clone())
}
