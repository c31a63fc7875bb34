//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use guide_core::audio::{attenuate, AudioEvent, AudioKind, BeaconSet, BeaconSettings};
use guide_core::guide::{GuideAgent, GuideCommand, GuideError, GuideState, MotionConfig, TravelMode};
use guide_core::intent::{
    build_system_prompt, classify_rule_based, parse_action_response, render_action, ActionError, ClassifyError, Intent,
    RuleBackend,
};
use guide_core::pathfinding::{plan_path, validate_path, OctileCost, PathError};
use guide_core::persona::PersonaRegistry;
use guide_core::scene::{
    first_person_view, load_scene, Cell, Pose, Scene, SceneObject, Vec3, ViewSettings, WalkGrid,
};
use guide_core::session::script::{run_script, RunOptions};
use guide_core::session::transcript::read_transcript;
use guide_core::session::{create_session, EntryKind, SessionConfig, TranscriptEntry};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn town() -> Scene {
    load_scene(&std::fs::read(root().join("scenes/town.json")).unwrap()).unwrap()
}

// ---------------------------------------------------------------- FSM

fn fixture_object(id: &str, name: &str, position: Vec3, anchor: Vec3) -> SceneObject {
    SceneObject {
        id: id.into(),
        display_name: name.into(),
        description: format!("{name} in the fixture."),
        color_tag: "grey".into(),
        shape_tag: "cube".into(),
        position,
        radius: 0.4,
        anchor,
    }
}

/// 5x5 cells with a full wall at column 3: `near` is on the spawn side,
/// `far` can only be teleported to.
fn fixture() -> Scene {
    let wall = (0..5).map(|r| Cell::new(3, r));
    let grid = WalkGrid::new(Vec3::new(0.0, 0.0, 0.0), 1.0, 5, 5, wall).unwrap();
    let objects = vec![
        fixture_object("near", "Near Post", Vec3::new(1.5, 0.0, 4.5), Vec3::new(1.5, 0.0, 3.5)),
        fixture_object("far", "Far Post", Vec3::new(4.5, 0.0, 4.5), Vec3::new(4.5, 0.0, 2.5)),
    ];
    Scene::new("Fixture", objects, grid, Pose::new(Vec3::new(0.5, 0.0, 1.5), 0.0)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Request(&'static str, TravelMode),
    Grab,
    Release,
    Cancel,
    Tick,
}

const OPS: [Op; 8] = [
    Op::Request("near", TravelMode::Walk),
    Op::Request("far", TravelMode::Walk),
    Op::Request("far", TravelMode::Teleport),
    Op::Request("ghost", TravelMode::Walk),
    Op::Grab,
    Op::Release,
    Op::Cancel,
    Op::Tick,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    West,
    East,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Abstract {
    Following,
    Awaiting(&'static str, TravelMode),
    Escorting(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reply {
    Ok,
    NotGrabbable,
    UnknownTarget,
    Unreachable,
    AlreadyEscorting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Model {
    state: Abstract,
    side: Side,
}

fn side_of(target: &str) -> Side {
    if target == "far" {
        Side::East
    } else {
        Side::West
    }
}

/// Transition table written from the state diagram, independent of the engine.
/// Returns the next model, the reply, and the Arrival count.
fn oracle(m: Model, op: Op) -> (Model, Reply, usize) {
    use Abstract::*;
    let same = |r| (m, r, 0);
    match (m.state, op) {
        (_, Op::Request("ghost", _)) => same(Reply::UnknownTarget),
        (Escorting(_), Op::Request(..)) => same(Reply::AlreadyEscorting),
        (_, Op::Request(t, mode)) => (Model { state: Awaiting(t, mode), ..m }, Reply::Ok, 0),
        (Awaiting(t, TravelMode::Teleport), Op::Grab) => (Model { state: Following, side: side_of(t) }, Reply::Ok, 1),
        (Awaiting(t, TravelMode::Walk), Op::Grab) if side_of(t) == m.side => {
            (Model { state: Escorting(t), ..m }, Reply::Ok, 0)
        }
        (Awaiting(_, TravelMode::Walk), Op::Grab) => (Model { state: Following, ..m }, Reply::Unreachable, 0),
        (_, Op::Grab) => same(Reply::NotGrabbable),
        (Awaiting(..), Op::Release) => same(Reply::Ok),
        (_, Op::Release | Op::Cancel) => (Model { state: Following, ..m }, Reply::Ok, 0),
        // a 10 s tick finishes any escort on a 5x5 grid
        (Escorting(_), Op::Tick) => (Model { state: Following, ..m }, Reply::Ok, 1),
        (_, Op::Tick) => same(Reply::Ok),
    }
}

#[derive(Clone)]
struct Engine {
    guide: GuideAgent,
    user: Pose,
}

fn engine_step(e: &mut Engine, op: Op, scene: &Scene, persona: &guide_core::persona::Persona) -> (Reply, usize) {
    let arrivals = |events: &[AudioEvent]| events.iter().filter(|ev| ev.kind == AudioKind::Arrival).count();
    let cmd = match op {
        Op::Request(t, mode) => GuideCommand::RequestNavigation { target: t.into(), mode },
        Op::Grab => GuideCommand::Grab,
        Op::Release => GuideCommand::Release,
        Op::Cancel => GuideCommand::CancelNavigation,
        Op::Tick => {
            let out = e.guide.tick(scene, e.user, persona, 10.0, 0.0);
            e.user = out.user_pose;
            return (Reply::Ok, arrivals(&out.events));
        }
    };
    match e.guide.apply_command(&cmd, scene, e.user, 0.0) {
        Ok(out) => {
            if out.teleported {
                e.user = out.user_pose;
            }
            (Reply::Ok, arrivals(&out.events))
        }
        Err(GuideError::NotGrabbable) => (Reply::NotGrabbable, 0),
        Err(GuideError::UnknownTarget(_)) => (Reply::UnknownTarget, 0),
        Err(GuideError::Unreachable(_)) => (Reply::Unreachable, 0),
        Err(GuideError::AlreadyEscorting(_)) => (Reply::AlreadyEscorting, 0),
    }
}

fn abstract_of(s: &GuideState) -> Result<Abstract, String> {
    let name = |t: &str| -> Result<&'static str, String> {
        match t {
            "near" => Ok("near"),
            "far" => Ok("far"),
            other => Err(format!("unexpected target {other}")),
        }
    };
    Ok(match s {
        GuideState::Following => Abstract::Following,
        GuideState::AwaitingGrab { target, mode } => Abstract::Awaiting(name(target)?, *mode),
        GuideState::Escorting { target, .. } => Abstract::Escorting(name(target)?),
    })
}

struct Walk<'a> {
    scene: &'a Scene,
    persona: &'a guide_core::persona::Persona,
    nodes: u64,
    seen: [bool; 3],
}

fn explore(w: &mut Walk, engine: &Engine, model: Model, depth: usize, trail: &mut Vec<Op>) -> Result<(), String> {
    w.nodes += 1;
    let got = abstract_of(engine.guide.state())?;
    ensure!(got == model.state, "after {trail:?}: engine {got:?}, oracle {:?}", model.state);
    let st = engine.guide.state();
    ensure!(st.grabbable() == matches!(got, Abstract::Awaiting(..)), "grabbable flag wrong after {trail:?}");
    ensure!(st.grabbed() == matches!(got, Abstract::Escorting(_)), "grabbed flag wrong after {trail:?}");
    ensure!(engine.guide.is_grabbable() == st.grabbable(), "agent and state disagree after {trail:?}");
    let east = engine.user.position.x > 3.0;
    ensure!(east == (model.side == Side::East), "user on wrong side after {trail:?}");
    w.seen[match got {
        Abstract::Following => 0,
        Abstract::Awaiting(..) => 1,
        Abstract::Escorting(_) => 2,
    }] = true;
    if depth == 8 {
        return Ok(());
    }
    for op in OPS {
        let mut next = engine.clone();
        let (reply, arrivals) = engine_step(&mut next, op, w.scene, w.persona);
        let (expected, expected_reply, expected_arrivals) = oracle(model, op);
        trail.push(op);
        ensure!(reply == expected_reply, "after {trail:?}: reply {reply:?}, oracle {expected_reply:?}");
        ensure!(arrivals == expected_arrivals, "after {trail:?}: {arrivals} arrivals, oracle {expected_arrivals}");
        explore(w, &next, expected, depth + 1, trail)?;
        trail.pop();
    }
    Ok(())
}

fn fsm_model_check() -> Outcome {
    let start = Instant::now();
    let scene = fixture();
    let registry = PersonaRegistry::with_builtins();
    let persona = registry.get("human").unwrap();
    let user = scene.spawn;
    let engine = Engine { guide: GuideAgent::join(&user, persona, MotionConfig::default()), user };
    let mut walk = Walk { scene: &scene, persona, nodes: 0, seen: [false; 3] };
    let model = Model { state: Abstract::Following, side: Side::West };
    explore(&mut walk, &engine, model, 0, &mut Vec::new())?;
    ensure!(walk.seen == [true; 3], "not every state was visited: {:?}", walk.seen);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:.2?}");
    Ok(format!("{} sequences of length <= 8, {elapsed:.2?}", walk.nodes))
}

// ---------------------------------------------------------------- pathfinding

fn dijkstra(grid: &WalkGrid, start: Cell, goal: Cell) -> Option<OctileCost> {
    let key = |c: OctileCost| c.straight as f64 + c.diagonal as f64 * std::f64::consts::SQRT_2;
    let open = |col: i32, row: i32| grid.is_walkable(Cell::new(col, row));
    let mut best: BTreeMap<Cell, OctileCost> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start, OctileCost::ZERO);
    heap.push(Reverse((ordered(0.0), start.row, start.col, 0u32, 0u32)));
    while let Some(Reverse((_, row, col, s, d))) = heap.pop() {
        let here = Cell::new(col, row);
        let cost = OctileCost { straight: s, diagonal: d };
        if best.get(&here).is_some_and(|b| key(*b) < key(cost)) {
            continue;
        }
        if here == goal {
            return Some(cost);
        }
        for dc in -1..=1 {
            for dr in -1..=1 {
                if (dc, dr) == (0, 0) || !open(col + dc, row + dr) {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal && !(open(col + dc, row) && open(col, row + dr)) {
                    continue;
                }
                let next = if diagonal {
                    OctileCost { straight: s, diagonal: d + 1 }
                } else {
                    OctileCost { straight: s + 1, diagonal: d }
                };
                let n = Cell::new(col + dc, row + dr);
                if best.get(&n).is_none_or(|b| key(next) < key(*b)) {
                    best.insert(n, next);
                    heap.push(Reverse((ordered(key(next)), n.row, n.col, next.straight, next.diagonal)));
                }
            }
        }
    }
    None
}

/// Total order on finite costs for the heap.
fn ordered(x: f64) -> u64 {
    x.to_bits()
}

fn pathfinding_oracle() -> Outcome {
    let start_time = Instant::now();
    let (mut solved, mut unreachable) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocked = Vec::new();
        let mut open = Vec::new();
        for row in 0..20 {
            for col in 0..20 {
                if rng.random_bool(0.3) {
                    blocked.push(Cell::new(col, row));
                } else {
                    open.push(Cell::new(col, row));
                }
            }
        }
        let grid = WalkGrid::new(Vec3::new(0.0, 0.0, 0.0), 1.0, 20, 20, blocked).unwrap();
        for _ in 0..10 {
            let a = open[rng.random_range(0..open.len())];
            let b = open[rng.random_range(0..open.len())];
            let planned = plan_path(&grid, grid.cell_center(a), grid.cell_center(b));
            match (planned, dijkstra(&grid, a, b)) {
                (Ok(path), Some(cost)) => {
                    ensure!(path.cost == cost, "seed {seed} {a}->{b}: A* {} vs Dijkstra {}", path.cost, cost);
                    validate_path(&grid, &path).map_err(|e| format!("seed {seed}: {e}"))?;
                    solved += 1;
                }
                (Err(PathError::Unreachable { .. }), None) => unreachable += 1,
                (p, d) => return Err(format!("seed {seed} {a}->{b}: A* {p:?} vs Dijkstra {d:?}")),
            }
        }
    }
    let elapsed = start_time.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:.2?}");
    Ok(format!("{solved} solved, {unreachable} unreachable on 100 grids, {elapsed:.2?}"))
}

// ---------------------------------------------------------------- dialogue

fn run_rule(script: &str, out: &Path, persona: &str) -> Result<Vec<TranscriptEntry>, String> {
    let opts = RunOptions {
        scene: root().join("scenes/town.json"),
        script: root().join(script),
        persona: persona.into(),
        seed: 1,
        out: out.to_owned(),
        config: SessionConfig::default(),
    };
    let registry = PersonaRegistry::with_builtins();
    run_script(&opts, registry.clone(), Arc::new(RuleBackend::new(registry))).map_err(|e| e.to_string())?;
    read_transcript(out).map_err(|e| e.to_string())
}

fn dialogue_golden_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let entries = run_rule("scripts/town_dialogue.script", &a, "human")?;
    run_rule("scripts/town_dialogue.script", &b, "human")?;
    ensure!(std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap(), "transcripts differ between runs");

    let scene = town();
    let responses: Vec<&TranscriptEntry> = entries.iter().filter(|e| e.kind == EntryKind::GuideResponse).collect();
    ensure!(responses.len() == 4, "expected 4 responses, got {}", responses.len());
    let intent = |i: usize| serde_json::from_value::<Intent>(responses[i].payload["intent"].clone()).ok();
    let text = |i: usize| responses[i].payload["text"].as_str().unwrap_or_default().to_owned();

    ensure!(intent(0) == Some(Intent::HolisticDescription), "turn 1 intent {:?}", intent(0));
    for o in &scene.objects {
        ensure!(text(0).contains(&o.display_name), "turn 1 does not name {}", o.display_name);
    }
    ensure!(
        intent(1) == Some(Intent::VisualQuestion { subject: Some("sideways_building".into()) }),
        "turn 2 intent {:?}",
        intent(1)
    );
    ensure!(text(1).contains("Sideways Building"), "turn 2 does not name Sideways Building");
    ensure!(
        intent(2) == Some(Intent::GoTo { object: "sideways_building".into(), mode: TravelMode::Walk }),
        "turn 3 intent {:?}",
        intent(2)
    );
    ensure!(
        text(2).contains("Grab onto me and I will take you to Sideways Building."),
        "turn 3 lacks the grab invitation: {}",
        text(2)
    );
    ensure!(intent(3) == Some(Intent::Other), "turn 4 intent {:?}", intent(3));

    let pos = |pred: &dyn Fn(&TranscriptEntry) -> bool| entries.iter().position(pred);
    let awaiting = pos(&|e| e.kind == EntryKind::Action && e.payload["state"] == "awaiting_grab");
    let escorting = pos(&|e| e.kind == EntryKind::Action && e.payload["command"] == "grab" && e.payload["state"] == "escorting");
    let arrivals: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EntryKind::Event && e.payload["kind"] == "arrival")
        .map(|(i, _)| i)
        .collect();
    let last_query = entries.iter().rposition(|e| e.kind == EntryKind::UserQuery);
    ensure!(arrivals.len() == 1, "{} arrival events", arrivals.len());
    ensure!(
        awaiting < escorting && escorting < Some(arrivals[0]) && Some(arrivals[0]) < last_query,
        "out of order: awaiting {awaiting:?}, escorting {escorting:?}, arrival {arrivals:?}, final query {last_query:?}"
    );
    let errors = entries.iter().filter(|e| e.kind == EntryKind::Error).count();
    ensure!(errors == 0, "{errors} error entries");
    Ok(format!("{} entries, byte-identical", entries.len()))
}

// ---------------------------------------------------------------- classifier

fn label(result: &Result<Intent, ClassifyError>) -> (String, Option<String>, Option<String>) {
    match result {
        Ok(i) => (
            i.category().as_str().to_owned(),
            i.object().map(str::to_owned),
            i.mode().map(|m| m.to_string()),
        ),
        Err(e) => (e.code().to_owned(), None, None),
    }
}

fn classifier_corpus() -> Outcome {
    let scene = town();
    let corpus: Vec<Value> =
        serde_json::from_slice(&std::fs::read(root().join("corpus/town_queries.json")).unwrap()).unwrap();
    ensure!(corpus.len() == 25, "corpus has {} entries", corpus.len());
    let view = first_person_view(&scene, &scene.spawn, ViewSettings::default(), 0.0);
    let mut mismatches = Vec::new();
    for row in &corpus {
        let q = row["query"].as_str().unwrap();
        let got = label(&classify_rule_based(q, &scene, &view));
        let want = (
            row["expected_intent"].as_str().unwrap().to_owned(),
            row["expected_object"].as_str().map(str::to_owned),
            row["expected_mode"].as_str().map(str::to_owned),
        );
        if got != want {
            mismatches.push(format!("{q:?}: got {got:?}, want {want:?}"));
        }
    }
    ensure!(mismatches.is_empty(), "{} mismatches: {}", mismatches.len(), mismatches.join("; "));

    let mut pairs = 0;
    for o in &scene.objects {
        for intent in [
            Intent::GoTo { object: o.id.clone(), mode: TravelMode::Walk },
            Intent::GoTo { object: o.id.clone(), mode: TravelMode::Teleport },
            Intent::AddBeacon { object: o.id.clone() },
        ] {
            let line = render_action(&intent, &scene).ok_or("render_action returned nothing")?;
            ensure!(parse_action_response(&line, &scene) == Ok(intent.clone()), "round trip failed for {line}");
            pairs += 1;
        }
    }
    match parse_action_response("sideways yellow building, teleport", &scene) {
        Err(ActionError::NonCanonicalName { suggestion: Some(s), .. }) if s == "sideways_building" => {}
        other => return Err(format!("paraphrased name not rejected with a suggestion: {other:?}")),
    }
    ensure!(
        parse_action_response("Sideways Building, teleport", &scene)
            == Ok(Intent::GoTo { object: "sideways_building".into(), mode: TravelMode::Teleport }),
        "canonical name rejected"
    );
    Ok(format!("25/25 queries, {pairs} action pairs round-trip"))
}

// ---------------------------------------------------------------- prompts

fn prompt_assertions() -> Outcome {
    let scene = town();
    let registry = PersonaRegistry::with_builtins();
    let descriptors = [
        ("human", "warm, friendly, but still professional sighted guide"),
        ("guide_dog", "very friendly, excited companion, who is eager to please who you're talking to"),
        ("white_cane", "computer-like, succinct assistant, who gives the straight facts"),
        ("robot", "formal and assertive assistant, who talks like a robot"),
        ("bird", "wise, old-fashioned, slightly Shakespearean-sounding mentor"),
        (
            "invisible",
            "gentle, soft-spoken assistant who gives very brief statements, as though slipping in words to someone without trying to interrupt what they're doing",
        ),
    ];
    ensure!(registry.len() == 6, "{} built-in personas", registry.len());
    let fixed = [
        "One of these photos is the bird's eye view of the entire scene. The other photo is the player's current perspective",
        "teleport, walk, or add a sound",
        "it seems",
        "address the player's question as best as you can",
    ];
    let mut checks = 0;
    for (id, descriptor) in descriptors {
        let prompt = build_system_prompt(registry.get(id).map_err(|e| e.to_string())?, &scene);
        ensure!(prompt.contains(descriptor), "{id}: descriptor missing");
        for o in &scene.objects {
            ensure!(prompt.contains(&o.display_name), "{id}: {} missing", o.display_name);
            ensure!(prompt.contains(&o.description), "{id}: description of {} missing", o.id);
            checks += 2;
        }
        for s in fixed {
            ensure!(prompt.contains(s), "{id}: missing {s:?}");
            checks += 1;
        }
        checks += 1;
    }
    Ok(format!("6 personas, {checks} substring checks"))
}

// ---------------------------------------------------------------- context cadence

fn context_cadence() -> Outcome {
    let registry = PersonaRegistry::with_builtins();
    let mut session = create_session(
        Arc::new(town()),
        registry.clone(),
        "human",
        Arc::new(RuleBackend::new(registry)),
        SessionConfig::default(),
        0,
    )
    .map_err(|e| e.to_string())?;
    let steps = (25.0 / session.config().dt).round() as usize;
    for _ in 0..steps {
        session.step(&[]);
    }
    let times = session.capture_times().to_vec();
    ensure!((session.clock() - 25.0).abs() < 1e-9, "clock at {}", session.clock());
    ensure!(times.len() == 3, "captures at {times:?}");
    for (t, want) in times.iter().zip([0.0, 10.0, 20.0]) {
        ensure!((t - want).abs() < 1e-6, "captures at {times:?}");
    }
    Ok(format!("captures at {times:.3?}"))
}

// ---------------------------------------------------------------- audio

fn audio_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA0D10);
    let max = 30.0;
    let ping = |p: Vec3| AudioEvent::new(0.0, AudioKind::BeaconPing { beacon: "x".into() }, p);
    for i in 0..1000 {
        let listener = Pose::new(
            Vec3::new(rng.random_range(-50.0..50.0), 0.0, rng.random_range(-50.0..50.0)),
            rng.random_range(-7.0..7.0),
        );
        let bearing = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (d1, d2) = {
            let a: f64 = rng.random_range(0.0..45.0);
            let b: f64 = rng.random_range(0.0..45.0);
            (a.min(b), a.max(b))
        };
        let at = |d: f64| {
            listener.local_to_world(bearing.sin() * d, bearing.cos() * d)
        };
        let (g1, g2) = (attenuate(&ping(at(d1)), &listener, max).gain, attenuate(&ping(at(d2)), &listener, max).gain);
        ensure!(d1 >= d2 || g1 >= g2, "pair {i}: gain({d1}) = {g1} < gain({d2}) = {g2}");
        if d2 >= max {
            ensure!(g2 == 0.0, "pair {i}: gain({d2}) = {g2} beyond range");
        }
        ensure!(attenuate(&ping(listener.position), &listener, max).gain == 1.0, "gain(0) != 1");
        let (r, f) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let p = attenuate(&ping(listener.local_to_world(r, f)), &listener, max).pan;
        let q = attenuate(&ping(listener.local_to_world(-r, f)), &listener, max).pan;
        ensure!((p + q).abs() <= 1e-9, "pair {i}: pan {p} vs mirrored {q}");
    }

    let scene = town();
    let mut lifetimes = 0;
    for (duration, interval) in [(30.0, 1.0), (10.0, 3.0), (5.0, 0.7), (2.5, 2.5)] {
        let settings = BeaconSettings { duration, ping_interval: interval };
        let mut beacons = BeaconSet::new();
        let created = 3.2;
        let b = beacons.place(&scene, "red_car", created, settings).map_err(|e| e.to_string())?;
        let expires = b.expires_at();
        let dt = 1.0 / 30.0;
        let mut pings = Vec::new();
        for k in 0..((duration + 10.0) / dt) as usize {
            let from = created + k as f64 * dt;
            pings.extend(beacons.tick(from, from + dt));
        }
        let want = (duration / interval + 1e-9).floor() as usize;
        ensure!(pings.len() == want, "{duration}/{interval}: {} pings, want {want}", pings.len());
        ensure!(pings.iter().all(|p| p.t <= expires + 1e-9), "{duration}/{interval}: ping after expiry");
        ensure!(beacons.is_empty(), "{duration}/{interval}: beacon outlived its expiry");
        lifetimes += 1;
    }
    Ok(format!("1000 seeded pairs, {lifetimes} beacon lifetimes"))
}

// ---------------------------------------------------------------- determinism

fn guide_run_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["first.jsonl", "second.jsonl"] {
        let out = dir.path().join(name);
        let status = Process::new(env!("CARGO_BIN_EXE_guide"))
            .args(["run", "--persona", "guide_dog", "--backend", "rule", "--seed", "42", "--scene"])
            .arg(root().join("scenes/town.json"))
            .arg("--script")
            .arg(root().join("scripts/town_corpus.script"))
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.success(), "guide run failed: {}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(!outputs[0].is_empty() && outputs[0] == outputs[1], "transcripts differ");
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("FSM model check", fsm_model_check),
        ("Pathfinding oracle", pathfinding_oracle),
        ("Dialogue golden replay", dialogue_golden_replay),
        ("Classifier corpus", classifier_corpus),
        ("Prompt assertions", prompt_assertions),
        ("Context cadence", context_cadence),
        ("Audio properties", audio_properties),
        ("Determinism", guide_run_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
