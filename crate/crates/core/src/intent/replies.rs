//! Reply templates for the rule backend, one register per voice profile.

use std::fmt::Write as _;

use crate::persona::{Persona, VoiceProfile};
use crate::scene::{object_range_and_bearing, Pose, Scene, SceneObject, SceneView};

struct Register {
    hello: &'static str,
    ack: &'static str,
    outro: &'static str,
    small_talk: &'static str,
    thanks: &'static str,
    fallback: &'static str,
    apology: &'static str,
}

fn register(voice: VoiceProfile) -> Register {
    match voice {
        VoiceProfile::LightFriendly => Register {
            hello: "Hello! Nice to meet you.",
            ack: "Okay.",
            outro: "Let me know if you want to explore any of these or need help finding something.",
            small_talk: "I'm doing well, thanks for asking! Where would you like to go today?",
            thanks: "You're welcome. Just ask whenever you need anything else.",
            fallback: "I'm not sure I can help with that here, but I can describe things around you or take you somewhere.",
            apology: "Sorry, I couldn't come up with an answer just now. Could you ask me again?",
        },
        VoiceProfile::AiryEnthusiastic => Register {
            hello: "Hi hi! I'm so happy you're here!",
            ack: "Yes! Let's go!",
            outro: "Ooh, want to go see one of them? I can take you!",
            small_talk: "I'm great! Even better now that you asked!",
            thanks: "Anytime! I love helping you!",
            fallback: "Hmm, I don't know that one! But I can show you around or take you somewhere fun!",
            apology: "Oh no, I lost my train of thought! Can you ask me one more time?",
        },
        VoiceProfile::SeriousMonotone => Register {
            hello: "Ready.",
            ack: "Understood.",
            outro: "Name an object to go there or to add a sound.",
            small_talk: "Operational. Ask about the scene.",
            thanks: "Acknowledged.",
            fallback: "No answer available. Ask about objects or destinations.",
            apology: "Request failed. Repeat the question.",
        },
        VoiceProfile::RoboticMonotone => Register {
            hello: "Greetings. Guide unit online.",
            ack: "Command accepted.",
            outro: "State a destination or request an audio beacon.",
            small_talk: "All systems nominal. Awaiting your instruction.",
            thanks: "Gratitude received. Awaiting further instruction.",
            fallback: "Query outside operating parameters. Reformulate the request.",
            apology: "Error. Response generation failed. Please repeat the query.",
        },
        VoiceProfile::BritishSophisticated => Register {
            hello: "Good day to thee, traveller.",
            ack: "Very well.",
            outro: "Shouldst thou wish to visit any of these, merely say the word.",
            small_talk: "I fare quite well, thank thee kindly. And how fares thy journey?",
            thanks: "Think nothing of it. I remain at thy service.",
            fallback: "Alas, that lies beyond my ken, though I may yet describe thy surroundings or lead thee onward.",
            apology: "Forgive me, my thoughts have wandered. Pray, ask once more.",
        },
        VoiceProfile::SoftAiry => Register {
            hello: "Hi.",
            ack: "Sure.",
            outro: "Just say where.",
            small_talk: "Good, thanks.",
            thanks: "Anytime.",
            fallback: "Not sure, sorry.",
            apology: "Sorry, say again?",
        },
    }
}

fn place(scene: &Scene, user: &Pose, obj: &SceneObject) -> String {
    match object_range_and_bearing(scene, user, &obj.id) {
        Ok((d, clock)) => format!("{d:.0} meters away at {clock} o'clock"),
        Err(_) => "somewhere nearby".to_owned(),
    }
}

pub fn greeting(persona: &Persona) -> &'static str {
    register(persona.voice_profile).hello
}

/// Scene overview naming every object with its description.
pub fn holistic(persona: &Persona, scene: &Scene, user: &Pose) -> String {
    let r = register(persona.voice_profile);
    let mut out = format!("{} You are in {}.", r.hello, scene.name);
    if scene.objects.is_empty() {
        out.push_str(" There is nothing notable around you.");
        return out;
    }
    let mut by_distance: Vec<&SceneObject> = scene.objects.iter().collect();
    by_distance.sort_by(|a, b| {
        let da = user.position.horizontal_distance(a.position);
        let db = user.position.horizontal_distance(b.position);
        da.total_cmp(&db).then_with(|| a.id.cmp(&b.id))
    });
    for o in by_distance {
        let _ = write!(out, " {}, {}: {}", o.display_name, place(scene, user, o), o.description);
    }
    let _ = write!(out, " {}", r.outro);
    out
}

pub fn visual_answer(persona: &Persona, scene: &Scene, user: &Pose, obj: &SceneObject) -> String {
    let lead = match persona.voice_profile {
        VoiceProfile::SeriousMonotone | VoiceProfile::RoboticMonotone => "Object identified:",
        VoiceProfile::SoftAiry => "That's",
        VoiceProfile::BritishSophisticated => "Behold, that is",
        _ => "That is",
    };
    format!("{lead} {}, {}. {}", obj.display_name, place(scene, user, obj), obj.description)
}

/// Answer to a visual question without a resolved subject: what is in view.
pub fn in_view(persona: &Persona, view: &SceneView) -> String {
    let entries = view.relative_entries();
    if entries.is_empty() {
        return format!("{} I don't see anything in front of you right now.", register(persona.voice_profile).ack);
    }
    let names: Vec<String> =
        entries.iter().map(|e| format!("{} at {} o'clock", e.display_name, e.clock_bearing)).collect();
    format!("In front of you: {}.", names.join(", "))
}

pub fn acknowledge(persona: &Persona) -> &'static str {
    register(persona.voice_profile).ack
}

/// Required wording; the session appends it to every accepted walk or teleport request.
pub fn grab_invitation(name: &str) -> String {
    format!("Grab onto me and I will take you to {name}.")
}

pub fn beacon_placed(persona: &Persona, name: &str) -> String {
    format!("{} I added a sound to {name}. Follow it to find your way.", register(persona.voice_profile).ack)
}

pub fn small_talk(persona: &Persona) -> &'static str {
    register(persona.voice_profile).small_talk
}

pub fn thanks(persona: &Persona) -> &'static str {
    register(persona.voice_profile).thanks
}

pub fn identity(persona: &Persona) -> String {
    format!("I'm your guide, here as the {}. I can describe things, take you places, or add sounds to objects.", persona.display_name.to_lowercase())
}

pub fn fallback(persona: &Persona) -> &'static str {
    register(persona.voice_profile).fallback
}

pub fn apology(persona: &Persona) -> &'static str {
    register(persona.voice_profile).apology
}

pub fn clarify(names: &[String]) -> String {
    format!("Which one do you mean: {}?", names.join(" or "))
}

pub fn unknown_reference() -> &'static str {
    "I couldn't find that here. Ask me what's around to hear the objects I know."
}

pub fn busy(name: &str) -> String {
    format!("I'm already taking you to {name}. Let go of me first if you want to go somewhere else.")
}

pub fn unreachable(name: &str) -> String {
    format!("I can't find a way to walk to {name} from here.")
}

pub fn persona_switched(persona: &Persona) -> String {
    format!("{} I'm the {} now.", register(persona.voice_profile).ack, persona.display_name.to_lowercase())
}
