//! Newline-delimited JSON over one TCP connection.
//!
//! Client frames: `{"type":"cmd","cmd":{"kind":"query","text":"..."}}`.
//! Server frames: `{"type":"snapshot",...}` once per step, `{"type":"event","event":<entry>}`
//! for every transcript entry, and `{"type":"error","message":...}` for frames
//! that could not be parsed.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::mpsc::{self, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use super::transcript::write_transcript;
use super::{Command, Session};

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ClientFrame {
    Cmd { cmd: Command },
}

enum Inbound {
    Command(Command),
    Malformed(String),
    Closed,
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Written when the session ends, however it ends.
    pub transcript: Option<PathBuf>,
    /// Sleep so that steps run in real time.
    pub pace: bool,
    /// Capacity of the inbound command queue.
    pub queue: usize,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { transcript: None, pace: true, queue: 256 }
    }
}

pub struct Server {
    listener: TcpListener,
}

fn parse_frame(line: &str) -> Inbound {
    match serde_json::from_str::<ClientFrame>(line) {
        Ok(ClientFrame::Cmd { cmd }) => Inbound::Command(cmd),
        Err(e) => Inbound::Malformed(format!("malformed frame: {e}")),
    }
}

fn read_frames(stream: TcpStream, tx: mpsc::SyncSender<Inbound>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if tx.send(parse_frame(&line)).is_err() {
            return;
        }
    }
    let _ = tx.send(Inbound::Closed);
}

fn send(out: &mut impl Write, frame: &Value) -> io::Result<()> {
    serde_json::to_writer(&mut *out, frame)?;
    out.write_all(b"\n")
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)? })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves a single client until it quits or disconnects, then returns the
    /// ended session. The transcript is flushed on every exit path.
    pub fn serve_one(&self, mut session: Session, opts: &ServeOptions) -> io::Result<Session> {
        let (stream, _) = self.listener.accept()?;
        let _ = stream.set_nodelay(true);
        let (tx, rx) = mpsc::sync_channel(opts.queue.max(1));
        let reader = stream.try_clone()?;
        thread::spawn(move || read_frames(reader, tx));
        let mut out = BufWriter::new(stream.try_clone()?);

        let dt = Duration::from_secs_f64(session.config().dt);
        let mut deadline = Instant::now();
        let mut sent = 0;
        let result = loop {
            let mut commands = Vec::new();
            let mut errors = Vec::new();
            let mut closed = false;
            loop {
                match rx.try_recv() {
                    Ok(Inbound::Command(c)) => commands.push(c),
                    Ok(Inbound::Malformed(m)) => errors.push(m),
                    Ok(Inbound::Closed) | Err(TryRecvError::Disconnected) => {
                        closed = true;
                        break;
                    }
                    Err(TryRecvError::Empty) => break,
                }
            }
            session.step(&commands);
            if closed {
                session.end("disconnect");
            }
            let write = (|| {
                for m in errors {
                    send(&mut out, &json!({ "type": "error", "message": m }))?;
                }
                for e in &session.transcript()[sent..] {
                    send(&mut out, &json!({ "type": "event", "event": e }))?;
                }
                send(&mut out, &session.snapshot())?;
                out.flush()
            })();
            sent = session.transcript().len();
            if write.is_err() {
                session.end("disconnect");
            }
            if session.is_ended() {
                break Ok(());
            }
            if opts.pace {
                deadline += dt;
                let now = Instant::now();
                if deadline > now {
                    thread::sleep(deadline - now);
                } else {
                    deadline = now;
                }
            }
        };
        let _ = stream.shutdown(Shutdown::Both);
        if let Some(path) = &opts.transcript {
            write_transcript(path, session.transcript())?;
        }
        result.map(|()| session)
    }
}
