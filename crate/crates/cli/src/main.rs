use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use guide_core::intent::{LlmClient, RemoteBackend, RuleBackend, ScriptedBackend};
use guide_core::pathfinding::plan_path;
use guide_core::persona::PersonaRegistry;
use guide_core::scene::{load_scene, Scene};
use guide_core::session::script::{self, RunOptions, ScriptStep};
use guide_core::session::server::{ServeOptions, Server};
use guide_core::session::transcript::write_transcript;
use guide_core::session::{create_session, Command, EntryKind, SessionConfig, TranscriptEntry};

#[derive(Parser)]
#[command(name = "guide", version, about = "Headless sighted-guide engine")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Rule,
    Scripted,
    Remote,
}

#[derive(clap::Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "rule")]
    backend: BackendKind,
    /// JSON array of canned replies for the scripted backend.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Extra personas: JSON `{"personas": [...]}`.
    #[arg(long)]
    persona_pack: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a scene file and report unreachable object anchors.
    ValidateScene { file: PathBuf },
    /// Run a command script headlessly and write the transcript.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "human")]
        persona: String,
        #[arg(long)]
        script: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Exit 0 even when the transcript contains errors.
        #[arg(long)]
        allow_errors: bool,
    },
    /// Interactive line mode: script commands, or plain text as a query.
    Repl {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "human")]
        persona: String,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Serve one interactive client over newline-delimited JSON.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "human")]
        persona: String,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn read_scene(path: &Path) -> Result<Scene> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_scene(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn personas(args: &BackendArgs) -> Result<PersonaRegistry> {
    let mut registry = PersonaRegistry::with_builtins();
    if let Some(pack) = &args.persona_pack {
        let bytes = std::fs::read(pack).with_context(|| format!("reading {}", pack.display()))?;
        registry.register_pack(&bytes)?;
    }
    Ok(registry)
}

fn backend(args: &BackendArgs, registry: &PersonaRegistry) -> Result<Arc<dyn LlmClient>> {
    Ok(match args.backend {
        BackendKind::Rule => Arc::new(RuleBackend::new(registry.clone())),
        BackendKind::Scripted => {
            let Some(path) = &args.responses else { bail!("--backend scripted needs --responses <file>") };
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Arc::new(ScriptedBackend::from_json(&bytes).context("responses must be a JSON array of strings")?)
        }
        BackendKind::Remote => Arc::new(RemoteBackend::from_env()?),
    })
}

fn validate(file: &Path) -> Result<ExitCode> {
    let scene = read_scene(file)?;
    let g = &scene.grid;
    println!(
        "{}: {} objects, {}x{} grid of {} m cells, {} blocked",
        scene.name,
        scene.objects.len(),
        g.width,
        g.height,
        g.cell_size,
        g.blocked_cells().count()
    );
    let mut unreachable = 0;
    for o in &scene.objects {
        match plan_path(g, scene.spawn.position, o.anchor) {
            Ok(p) => println!("  {} ({}): {:.2} m from spawn", o.display_name, o.id, p.length(g.cell_size)),
            Err(e) => {
                unreachable += 1;
                println!("  {} ({}): {e}", o.display_name, o.id);
            }
        }
    }
    if unreachable > 0 {
        println!("warning: {unreachable} object(s) cannot be walked to from spawn");
    }
    Ok(ExitCode::SUCCESS)
}

fn print_entries(entries: &[TranscriptEntry]) {
    for e in entries {
        let p = &e.payload;
        match e.kind {
            EntryKind::GuideResponse => println!("guide: {}", p["text"].as_str().unwrap_or_default()),
            EntryKind::Action => println!(
                "  [{} -> {}]",
                p["command"].as_str().unwrap_or_default(),
                p["state"].as_str().or(p["target"].as_str()).unwrap_or_default()
            ),
            EntryKind::Error => println!("  error: {}", p["message"].as_str().unwrap_or_default()),
            EntryKind::PersonaChanged => println!("  [persona: {}]", p["to"].as_str().unwrap_or_default()),
            EntryKind::Event if matches!(p["kind"].as_str(), Some("arrival" | "teleport")) => {
                println!("  [{} at t={:.1}]", p["kind"].as_str().unwrap_or_default(), e.t)
            }
            _ => {}
        }
    }
}

fn repl(scene: &Path, persona: &str, args: &BackendArgs, transcript: Option<&Path>) -> Result<ExitCode> {
    let scene = Arc::new(read_scene(scene)?);
    let registry = personas(args)?;
    let backend = backend(args, &registry)?;
    let mut session = create_session(scene, registry, persona, backend, SessionConfig::default(), 0)?;
    println!("{} with the {} guide. Type a question, or a script command (wait, grab, turn, quit).", session.scene().name, session.persona().display_name);
    let stdin = io::stdin();
    let mut out = io::stdout();
    loop {
        print!("> ");
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let step = script::parse_line(line).unwrap_or_else(|_| ScriptStep::Command(Command::Query { text: line.to_owned() }));
        let before = session.transcript().len();
        script::execute(&mut session, &step);
        if matches!(step, ScriptStep::Command(Command::Grab)) {
            script::execute(&mut session, &ScriptStep::WaitUntilFollowing(120.0));
        }
        print_entries(&session.transcript()[before..]);
        if session.is_ended() {
            break;
        }
    }
    session.end("repl_closed");
    if let Some(path) = transcript {
        write_transcript(path, session.transcript())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Cmd::ValidateScene { file } => validate(&file),
        Cmd::Run { scene, persona, script: script_path, backend: args, seed, out, allow_errors } => {
            let registry = personas(&args)?;
            let client = backend(&args, &registry)?;
            let opts = RunOptions { scene, script: script_path, persona, seed, out, config: SessionConfig::default() };
            let report = script::run_script(&opts, registry, client)?;
            println!(
                "wrote {} entries to {} ({} errors, {} arrivals)",
                report.entries,
                opts.out.display(),
                report.errors,
                report.arrivals
            );
            Ok(if report.errors > 0 && !allow_errors { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Cmd::Repl { scene, persona, backend: args, transcript } => repl(&scene, &persona, &args, transcript.as_deref()),
        Cmd::Serve { scene, port, host, persona, backend: args, seed, transcript } => {
            let scene = Arc::new(read_scene(&scene)?);
            let registry = personas(&args)?;
            let client = backend(&args, &registry)?;
            let session = create_session(scene, registry, &persona, client, SessionConfig::default(), seed)?;
            let server = Server::bind((host.as_str(), port))?;
            println!("listening on {}", server.local_addr()?);
            let opts = ServeOptions { transcript, ..ServeOptions::default() };
            let session = server.serve_one(session, &opts)?;
            println!("session ended after {:.1} s, {} transcript entries", session.clock(), session.transcript().len());
            Ok(ExitCode::SUCCESS)
        }
    }
}
