//! Line-oriented command scripts for headless runs.
//!
//! ```text
//! # comment
//! query Can you take me to Sideways Building?
//! wait 1.5
//! grab
//! wait-until-following 60
//! turn -90
//! move 1.0 0 2.5
//! teleport 0.5 0 3.5
//! persona guide_dog
//! release | cancel | quit
//! ```
//!
//! Every command line occupies one step. `wait` and `move` run for the given
//! number of seconds, rounded to whole steps.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::transcript::write_transcript;
use super::{create_session, Command, EntryKind, Session, SessionConfig, SessionError, TranscriptEntry};
use crate::intent::LlmClient;
use crate::persona::PersonaRegistry;
use crate::scene::{load_scene, SceneError, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep {
    Command(Command),
    Wait(f64),
    WaitUntilFollowing(f64),
    Move { forward: f64, strafe: f64, duration: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn number(word: Option<&str>, what: &str) -> Result<f64, String> {
    let w = word.ok_or_else(|| format!("missing {what}"))?;
    let v: f64 = w.parse().map_err(|_| format!("`{w}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be finite"))
    }
}

fn seconds(word: Option<&str>, what: &str) -> Result<f64, String> {
    let v = number(word, what)?;
    if v < 0.0 {
        return Err(format!("{what} must not be negative"));
    }
    Ok(v)
}

/// Parses one non-blank, non-comment line.
pub fn parse_line(line: &str) -> Result<ScriptStep, String> {
    let line = line.trim();
    let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    let mut args = rest.split_whitespace();
    let step = match keyword {
        "query" | "say" => {
            if rest.is_empty() {
                return Err("query needs text".into());
            }
            ScriptStep::Command(Command::Query { text: rest.to_owned() })
        }
        "wait" => ScriptStep::Wait(seconds(args.next(), "duration")?),
        "wait-until-following" => ScriptStep::WaitUntilFollowing(seconds(args.next(), "timeout")?),
        "turn" => ScriptStep::Command(Command::TurnBy { radians: number(args.next(), "degrees")?.to_radians() }),
        "move" => ScriptStep::Move {
            forward: number(args.next(), "forward speed")?,
            strafe: number(args.next(), "strafe speed")?,
            duration: seconds(args.next(), "duration")?,
        },
        "teleport" => {
            let x = number(args.next(), "x")?;
            let y = number(args.next(), "y")?;
            let z = number(args.next(), "z")?;
            ScriptStep::Command(Command::TeleportSelf { position: Vec3::new(x, y, z) })
        }
        "persona" => ScriptStep::Command(Command::SwitchPersona {
            id: args.next().ok_or("persona needs an id")?.to_owned(),
        }),
        "grab" => ScriptStep::Command(Command::Grab),
        "release" => ScriptStep::Command(Command::Release),
        "cancel" => ScriptStep::Command(Command::Cancel),
        "quit" => ScriptStep::Command(Command::Quit),
        other => return Err(format!("unknown command `{other}`")),
    };
    if !matches!(keyword, "query" | "say") && args.next().is_some() {
        return Err(format!("too many arguments for `{keyword}`"));
    }
    Ok(step)
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>, ScriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .map(|(i, l)| parse_line(l).map_err(|message| ScriptError { line: i + 1, message }))
        .collect()
}

fn steps_for(duration: f64, dt: f64) -> u64 {
    (duration / dt).round() as u64
}

/// Runs one script step against the session.
pub fn execute(session: &mut Session, step: &ScriptStep) {
    let dt = session.config().dt;
    match step {
        ScriptStep::Command(cmd) => {
            session.step(std::slice::from_ref(cmd));
        }
        ScriptStep::Wait(duration) => {
            for _ in 0..steps_for(*duration, dt) {
                session.step(&[]);
            }
        }
        ScriptStep::WaitUntilFollowing(timeout) => {
            let mut budget = steps_for(*timeout, dt);
            while budget > 0 && session.guide().state().target().is_some() && !session.is_ended() {
                session.step(&[]);
                budget -= 1;
            }
        }
        ScriptStep::Move { forward, strafe, duration } => {
            let n = steps_for(*duration, dt);
            if n > 0 {
                session.step(&[Command::Move { forward: *forward, strafe: *strafe }]);
                for _ in 1..n {
                    session.step(&[]);
                }
                session.step(&[Command::Move { forward: 0.0, strafe: 0.0 }]);
            }
        }
    }
    if session.query_in_flight() {
        session.await_pending();
    }
}

/// Executes all steps and closes the session with reason `script_end`.
pub fn run_steps(session: &mut Session, steps: &[ScriptStep]) {
    for step in steps {
        if session.is_ended() {
            break;
        }
        execute(session, step);
    }
    session.await_pending();
    session.end("script_end");
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scene: PathBuf,
    pub script: PathBuf,
    pub persona: String,
    pub seed: u64,
    pub out: PathBuf,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub entries: usize,
    pub errors: usize,
    pub arrivals: usize,
}

impl RunReport {
    pub fn from_entries(entries: &[TranscriptEntry]) -> Self {
        Self {
            entries: entries.len(),
            errors: entries.iter().filter(|e| e.kind == EntryKind::Error).count(),
            arrivals: entries.iter().filter(|e| e.kind == EntryKind::Event && e.payload["kind"] == "arrival").count(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, RunError> {
    fs::read(path).map_err(|source| RunError::Read { path: path.to_owned(), source })
}

/// Loads scene and script files, runs them headlessly and writes the transcript.
pub fn run_script(
    opts: &RunOptions,
    personas: PersonaRegistry,
    backend: Arc<dyn LlmClient>,
) -> Result<RunReport, RunError> {
    let scene = Arc::new(load_scene(&read(&opts.scene)?)?);
    let text = String::from_utf8_lossy(&read(&opts.script)?).into_owned();
    let steps = parse_script(&text)?;
    let mut session = create_session(scene, personas, &opts.persona, backend, opts.config, opts.seed)?;
    run_steps(&mut session, &steps);
    write_transcript(&opts.out, session.transcript())
        .map_err(|source| RunError::Write { path: opts.out.clone(), source })?;
    Ok(RunReport::from_entries(session.transcript()))
}
