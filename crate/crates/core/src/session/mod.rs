//! One user, one guide, one scene, advanced on a fixed time step.

pub mod script;
pub mod server;
pub mod transcript;

use std::sync::mpsc;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::audio::{attenuate, AudioEvent, AudioKind, BeaconSet, BeaconSettings, MovementCues};
use crate::guide::{GuideAgent, GuideCommand, GuideError, MotionConfig};
use crate::intent::{
    build_bundle, capture_context, parse_action_response, refresh_context, replies, split_action_line, BackendError,
    Completion, CompletionRequest, ContextViews, Intent, LlmClient, PromptBundle,
};
use crate::persona::{Persona, PersonaError, PersonaId, PersonaRegistry};
use crate::scene::{Pose, Scene, SceneError, Vec3, ViewSettings};

pub use transcript::{EntryKind, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub view: ViewSettings,
    pub motion: MotionConfig,
    /// Fixed step in seconds.
    pub dt: f64,
    pub beacon: BeaconSettings,
    /// Distance at which spatial sounds fade to silence.
    pub audio_range: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            view: ViewSettings::default(),
            motion: MotionConfig::default(),
            dt: 1.0 / 30.0,
            beacon: BeaconSettings::default(),
            audio_range: 50.0,
        }
    }
}

impl SessionConfig {
    fn to_json(self) -> Value {
        json!({
            "fov_deg": self.view.fov_deg,
            "max_range": self.view.max_range,
            "walk_speed": self.motion.walk_speed,
            "stride": self.motion.stride,
            "dt": self.dt,
            "beacon_duration": self.beacon.duration,
            "beacon_ping_interval": self.beacon.ping_interval,
            "audio_range": self.audio_range,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Walking intent in m/s along the user's facing and right axes; holds until replaced.
    Move {
        forward: f64,
        #[serde(default)]
        strafe: f64,
    },
    TurnBy { radians: f64 },
    TeleportSelf { position: Vec3 },
    Query { text: String },
    Grab,
    Release,
    Cancel,
    SwitchPersona { id: String },
    Quit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Move { .. } => "move",
            Command::TurnBy { .. } => "turn_by",
            Command::TeleportSelf { .. } => "teleport_self",
            Command::Query { .. } => "query",
            Command::Grab => "grab",
            Command::Release => "release",
            Command::Cancel => "cancel",
            Command::SwitchPersona { .. } => "switch_persona",
            Command::Quit => "quit",
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("invalid session config: {0}")]
    Config(String),
}

struct PendingQuery {
    query: String,
    bundle: PromptBundle,
    submitted_at: f64,
    rx: mpsc::Receiver<Result<Completion, BackendError>>,
}

pub struct Session {
    scene: Arc<Scene>,
    personas: PersonaRegistry,
    persona: Persona,
    backend: Arc<dyn LlmClient>,
    config: SessionConfig,
    seed: u64,
    user: Pose,
    velocity: (f64, f64),
    guide: GuideAgent,
    beacons: BeaconSet,
    cues: MovementCues,
    steps: u64,
    clock: f64,
    views: ContextViews,
    captures: Vec<f64>,
    transcript: Vec<TranscriptEntry>,
    pending: Option<PendingQuery>,
    ended: bool,
}

fn pose_json(p: &Pose) -> Value {
    json!({ "pos": p.position.to_array(), "yaw": p.yaw })
}

/// The guide joins the user at spawn, following, with a first context capture at t = 0.
pub fn create_session(
    scene: Arc<Scene>,
    personas: PersonaRegistry,
    persona: &str,
    backend: Arc<dyn LlmClient>,
    config: SessionConfig,
    seed: u64,
) -> Result<Session, SessionError> {
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(SessionError::Config(format!("dt must be positive, got {}", config.dt)));
    }
    if config.audio_range.is_nan() || config.audio_range <= 0.0 {
        return Err(SessionError::Config("audio_range must be positive".into()));
    }
    let persona = personas.get(persona)?.clone();
    let user = scene.spawn;
    let guide = GuideAgent::join(&user, &persona, config.motion);
    let views = capture_context(&scene, &user, config.view, 0.0);
    let mut session = Session {
        scene,
        personas,
        persona,
        backend,
        config,
        seed,
        user,
        velocity: (0.0, 0.0),
        guide,
        beacons: BeaconSet::new(),
        cues: MovementCues::new(),
        steps: 0,
        clock: 0.0,
        views,
        captures: vec![0.0],
        transcript: Vec::new(),
        pending: None,
        ended: false,
    };
    let start = json!({
        "scene": session.scene.name,
        "objects": session.scene.objects.len(),
        "persona": session.persona.id.as_str(),
        "backend": session.backend.backend_id(),
        "seed": seed,
        "config": config.to_json(),
        "user": pose_json(&session.user),
        "guide": session.guide_json(),
    });
    session.push(0.0, EntryKind::SessionStart, start);
    Ok(session)
}

impl Session {
    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn persona(&self) -> &Persona {
        &self.persona
    }

    pub fn user(&self) -> Pose {
        self.user
    }

    pub fn guide(&self) -> &GuideAgent {
        &self.guide
    }

    pub fn beacons(&self) -> &BeaconSet {
        &self.beacons
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Latest pair of context captures.
    pub fn views(&self) -> &ContextViews {
        &self.views
    }

    /// Clock value of every context capture so far.
    pub fn capture_times(&self) -> &[f64] {
        &self.captures
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn query_in_flight(&self) -> bool {
        self.pending.is_some()
    }

    fn push(&mut self, t: f64, kind: EntryKind, payload: Value) {
        self.transcript.push(TranscriptEntry::new(t, kind, payload));
    }

    fn push_event(&mut self, e: &AudioEvent) {
        let heard = attenuate(e, &self.user, self.config.audio_range);
        let mut payload = e.to_json();
        payload["heard"] = json!({ "gain": heard.gain, "pan": heard.pan });
        self.push(e.t, EntryKind::Event, payload);
    }

    fn push_error(&mut self, command: &str, code: &str, message: impl Into<String>) {
        let t = self.clock;
        self.push(t, EntryKind::Error, json!({ "command": command, "code": code, "message": message.into() }));
    }

    fn guide_json(&self) -> Value {
        let pose = self.guide.pose();
        json!({
            "pos": pose.position.to_array(),
            "yaw": pose.yaw,
            "state": self.guide.state().name(),
            "target": self.guide.state().target(),
            "grabbable": self.guide.is_grabbable(),
            "persona": self.persona.id.as_str(),
            "visible": self.persona.visible,
        })
    }

    /// Wire snapshot of the session state.
    pub fn snapshot(&self) -> Value {
        let beacons: Vec<Value> = self
            .beacons
            .iter()
            .map(|b| json!({ "object": b.object, "position": b.position.to_array(), "expires_at": b.expires_at() }))
            .collect();
        let objects: Vec<Value> = self
            .scene
            .objects
            .iter()
            .map(|o| json!({ "id": o.id, "display_name": o.display_name, "position": o.position.to_array(), "radius": o.radius }))
            .collect();
        json!({
            "type": "snapshot",
            "t": self.clock,
            "user": pose_json(&self.user),
            "guide": self.guide_json(),
            "beacons": beacons,
            "objects": objects,
            "query_in_flight": self.pending.is_some(),
        })
    }

    /// Applies `commands` at the current tick boundary, then advances the
    /// clock by one step. Returns the entries appended by this call.
    pub fn step(&mut self, commands: &[Command]) -> &[TranscriptEntry] {
        let first = self.transcript.len();
        if self.ended {
            return &self.transcript[first..];
        }
        self.poll_pending();
        for cmd in commands {
            if self.ended {
                break;
            }
            self.apply(cmd);
        }
        if !self.ended {
            self.tick();
        }
        &self.transcript[first..]
    }

    /// Blocks until an in-flight background query resolves and injects it.
    pub fn await_pending(&mut self) {
        if let Some(p) = self.pending.take() {
            let result = p.rx.recv().unwrap_or_else(|_| Err(BackendError::Unavailable("backend thread died".into())));
            self.finish_query(p.query, p.bundle, result, self.clock - p.submitted_at);
        }
    }

    /// Ends the session; the guide leaves with the user.
    pub fn end(&mut self, reason: &str) {
        if self.ended {
            return;
        }
        self.pending = None;
        self.ended = true;
        let t = self.clock;
        self.push(t, EntryKind::SessionEnd, json!({ "reason": reason }));
    }

    fn poll_pending(&mut self) {
        let ready = match &self.pending {
            Some(p) => match p.rx.try_recv() {
                Ok(r) => Some(r),
                Err(mpsc::TryRecvError::Empty) => None,
                Err(mpsc::TryRecvError::Disconnected) => Some(Err(BackendError::Unavailable("backend thread died".into()))),
            },
            None => None,
        };
        if let Some(result) = ready {
            let p = self.pending.take().expect("checked above");
            self.finish_query(p.query, p.bundle, result, self.clock - p.submitted_at);
        }
    }

    fn apply(&mut self, cmd: &Command) {
        let t = self.clock;
        match cmd {
            Command::Move { forward, strafe } => {
                if forward.is_finite() && strafe.is_finite() {
                    self.velocity = (*forward, *strafe);
                } else {
                    self.push_error(cmd.name(), "invalid_command", "velocity must be finite");
                }
            }
            Command::TurnBy { radians } => {
                if !radians.is_finite() {
                    self.push_error(cmd.name(), "invalid_command", "turn must be finite");
                    return;
                }
                let prev = self.user;
                self.user = prev.turned(*radians);
                for e in self.cues.update(&prev, &self.user, t) {
                    self.push_event(&e);
                }
            }
            Command::TeleportSelf { position } => {
                if self.guide.is_grabbed() {
                    self.push_error(cmd.name(), "escorting", "let go of the guide before teleporting");
                } else if !self.scene.grid.is_walkable_point(*position) {
                    self.push_error(cmd.name(), "not_walkable", format!("{position} is not walkable"));
                } else {
                    self.user = Pose::new(*position, self.user.yaw);
                    self.cues.reset();
                    self.push_event(&AudioEvent::new(t, AudioKind::Teleport, *position));
                    if self.guide.state().target().is_none() {
                        let anchor = crate::pathfinding::follow_anchor(&self.user, &self.persona.placement);
                        self.guide.set_pose(Pose::new(anchor, self.user.yaw));
                    }
                }
            }
            Command::Query { text } => self.submit_query(text),
            Command::Grab => self.guide_command(GuideCommand::Grab, "grab"),
            Command::Release => self.guide_command(GuideCommand::Release, "release"),
            Command::Cancel => self.guide_command(GuideCommand::CancelNavigation, "cancel"),
            Command::SwitchPersona { id } => {
                if let Err(e) = self.switch_persona(id) {
                    self.push_error(cmd.name(), "unknown_persona", e.to_string());
                }
            }
            Command::Quit => self.end("quit"),
        }
    }

    fn guide_command(&mut self, cmd: GuideCommand, name: &str) {
        let t = self.clock;
        match self.guide.apply_command(&cmd, &self.scene, self.user, t) {
            Ok(out) => {
                if out.teleported {
                    self.user = out.user_pose;
                    self.cues.reset();
                }
                for e in &out.events {
                    self.push_event(e);
                }
                let payload = json!({
                    "command": name,
                    "state": self.guide.state().name(),
                    "target": self.guide.state().target(),
                });
                self.push(t, EntryKind::Action, payload);
            }
            Err(e) => {
                let code = guide_error_code(&e);
                self.push_error(name, code, e.to_string());
            }
        }
    }

    /// Switching to the current persona only records the request.
    pub fn switch_persona(&mut self, id: &str) -> Result<(), PersonaError> {
        let next = self.personas.get(id)?.clone();
        let from = self.persona.id.clone();
        if next.id != from && self.guide.state().target().is_some() {
            let _ = self.guide.apply_command(&GuideCommand::CancelNavigation, &self.scene, self.user, self.clock);
        }
        let t = self.clock;
        self.persona = next;
        self.push(t, EntryKind::PersonaChanged, json!({ "from": from.as_str(), "to": id }));
        Ok(())
    }

    fn submit_query(&mut self, text: &str) {
        let t = self.clock;
        self.push(t, EntryKind::UserQuery, json!({ "text": text }));
        if self.pending.is_some() {
            self.push_error("query", "query_in_flight", "the guide is still answering the previous question");
            return;
        }
        if text.trim().is_empty() {
            self.push_error("query", "empty_query", "the query is empty");
            return;
        }
        self.push_event(&AudioEvent::new(t, AudioKind::Processing, self.user.position));
        if refresh_context(t, self.captures.last().copied()) {
            self.capture(t);
        }
        let bundle = build_bundle(&self.persona, &self.scene, &self.views, text);
        let request = CompletionRequest {
            bundle: bundle.clone(),
            scene: Arc::clone(&self.scene),
            persona: self.persona.clone(),
            user: self.user,
            first_person: self.views.first_person.clone(),
        };
        if self.backend.runs_in_background() {
            let (tx, rx) = mpsc::channel();
            let backend = Arc::clone(&self.backend);
            thread::spawn(move || {
                let _ = tx.send(backend.complete(&request));
            });
            self.pending = Some(PendingQuery { query: text.to_owned(), bundle, submitted_at: t, rx });
        } else {
            let result = self.backend.complete(&request);
            self.finish_query(text.to_owned(), bundle, result, 0.0);
        }
    }

    fn finish_query(
        &mut self,
        query: String,
        bundle: PromptBundle,
        result: Result<Completion, BackendError>,
        latency: f64,
    ) {
        let t = self.clock;
        let mut response = json!({
            "query": query,
            "intent": null,
            "clarification": null,
            "action_error": null,
            "backend_error": null,
        });
        let (raw, completion) = match result {
            Ok(c) => (c.text.clone(), Some(c)),
            Err(e) => {
                response["backend_error"] = json!(e.to_string());
                (String::new(), None)
            }
        };
        let mut text;
        let mut intent = None;
        let mut persona_switch = None;
        match completion {
            None => text = replies::apology(&self.persona).to_owned(),
            Some(c) => {
                let (surfaced, action_line) = split_action_line(&c.text);
                text = surfaced;
                if let Some(err) = &c.clarification {
                    response["clarification"] = json!(err.code());
                }
                intent = c.intent;
                if let (None, Some(line)) = (&intent, action_line) {
                    match parse_action_response(&line, &self.scene) {
                        Ok(i) => intent = Some(i),
                        Err(e) => response["action_error"] = json!(e.to_string()),
                    }
                }
                persona_switch = c.persona;
            }
        }

        let mut actions = Vec::new();
        match &intent {
            Some(Intent::GoTo { object, mode }) => {
                let cmd = GuideCommand::RequestNavigation { target: object.clone(), mode: *mode };
                let name = self.scene.object(object).map(|o| o.display_name.clone()).unwrap_or_default();
                match self.guide.apply_command(&cmd, &self.scene, self.user, t) {
                    Ok(_) => {
                        let invitation = replies::grab_invitation(&name);
                        if !text.ends_with(&invitation) {
                            if !text.is_empty() {
                                text.push(' ');
                            }
                            text.push_str(&invitation);
                        }
                        actions.push(json!({
                            "command": "request_navigation",
                            "target": object,
                            "mode": mode.to_string(),
                            "state": self.guide.state().name(),
                        }));
                    }
                    Err(GuideError::AlreadyEscorting(current)) => {
                        let current = self.scene.object(&current).map_or(current.clone(), |o| o.display_name.clone());
                        text = replies::busy(&current);
                        response["clarification"] = json!("already_escorting");
                    }
                    Err(e) => {
                        text = replies::unknown_reference().to_owned();
                        response["action_error"] = json!(e.to_string());
                    }
                }
            }
            Some(Intent::AddBeacon { object }) => {
                match self.beacons.place(&self.scene, object, t, self.config.beacon) {
                    Ok(b) => actions.push(json!({
                        "command": "place_beacon",
                        "target": object,
                        "expires_at": b.expires_at(),
                    })),
                    Err(e) => response["action_error"] = json!(e.to_string()),
                }
            }
            _ => {}
        }

        response["intent"] = intent.as_ref().map_or(Value::Null, |i| serde_json::to_value(i).expect("intent json"));
        response["text"] = json!(text);
        response["exchange"] = json!({
            "request": bundle,
            "response_text": raw,
            "latency": latency,
            "backend": self.backend.backend_id(),
        });
        self.push_event(&AudioEvent::new(t, AudioKind::ResponseReady, self.user.position));
        self.push(t, EntryKind::GuideResponse, response);
        for a in actions {
            self.push(t, EntryKind::Action, a);
        }
        if let Some(id) = persona_switch {
            if let Err(e) = self.switch_persona(id.as_str()) {
                self.push_error("query", "unknown_persona", e.to_string());
            }
        }
    }

    fn capture(&mut self, t: f64) {
        self.views = capture_context(&self.scene, &self.user, self.config.view, t);
        self.captures.push(t);
    }

    fn tick(&mut self) {
        let from = self.clock;
        self.steps += 1;
        let now = self.steps as f64 * self.config.dt;
        let dt = now - from;
        let mut events = Vec::new();

        if !self.guide.is_grabbed() && self.velocity != (0.0, 0.0) {
            let prev = self.user;
            let (forward, strafe) = self.velocity;
            let next = prev.local_to_world(strafe * dt, forward * dt);
            if self.scene.grid.is_walkable_point(next) {
                self.user = Pose::new(next, prev.yaw);
                events.extend(self.cues.update(&prev, &self.user, now));
            }
        }

        let prev = self.user;
        let out = self.guide.tick(&self.scene, self.user, &self.persona, dt, now);
        if out.user_pose != prev {
            self.user = out.user_pose;
            events.extend(self.cues.update(&prev, &self.user, now));
        }
        events.extend(out.events);
        events.extend(self.beacons.tick(from, now));
        events.sort_by(|a, b| a.t.total_cmp(&b.t));

        self.clock = now;
        for e in &events {
            self.push_event(e);
        }
        if refresh_context(now, self.captures.last().copied()) {
            self.capture(now);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn personas(&self) -> &PersonaRegistry {
        &self.personas
    }

    pub fn persona_id(&self) -> &PersonaId {
        &self.persona.id
    }
}

fn guide_error_code(e: &GuideError) -> &'static str {
    match e {
        GuideError::NotGrabbable => "not_grabbable",
        GuideError::UnknownTarget(_) => "unknown_target",
        GuideError::Unreachable(_) => "unreachable",
        GuideError::AlreadyEscorting(_) => "already_escorting",
    }
}
