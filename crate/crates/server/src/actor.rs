//! Session owner: one thread per authenticated user that owns the lab
//! session, applies commands in arrival order and paces simulated time to
//! the wall clock while running.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use chrono::Utc;
use roblab_core::config::LabConfig;
use roblab_core::plugin::Workspace;
use roblab_core::session::{BackendKind, Mode, Session, SessionError, Snapshot};
use roblab_core::SimTime;
use serde_json::{json, Value};
use tokio::sync::{oneshot, watch};

use crate::frame::Reason;

const PACE_STEP: Duration = Duration::from_millis(10);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LifecycleOp {
    Open,
    Run,
    Stop,
    Close,
}

impl LifecycleOp {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(Self::Open),
            "run" => Some(Self::Run),
            "stop" => Some(Self::Stop),
            "close" => Some(Self::Close),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Request {
    Lifecycle(LifecycleOp),
    SetControl(f64, f64),
    SetMode(Mode),
    SetBackend(BackendKind),
}

pub type Reply = Result<Value, (Reason, String)>;

struct Msg {
    req: Request,
    reply: oneshot::Sender<Reply>,
}

/// Latest client-visible state of an open session.
#[derive(Clone, Debug)]
pub struct Published {
    pub snapshot: Snapshot,
    pub running: bool,
}

pub struct ActorHandle {
    tx: Option<mpsc::Sender<Msg>>,
    join: Option<JoinHandle<()>>,
}

pub struct ActorChannels {
    pub state: watch::Receiver<Option<Arc<Published>>>,
    pub events: tokio::sync::mpsc::UnboundedReceiver<Value>,
}

impl ActorHandle {
    pub fn spawn(user: String, workspace: Workspace, lab: LabConfig) -> (Self, ActorChannels) {
        let (tx, rx) = mpsc::channel();
        let (state_tx, state_rx) = watch::channel(None);
        let (event_tx, event_rx) = tokio::sync::mpsc::unbounded_channel();
        let join = thread::Builder::new()
            .name(format!("session-{user}"))
            .spawn(move || {
                let mut actor = Actor { user, workspace, lab, open: None, state_tx, event_tx, seen_events: 0 };
                actor.run(rx);
            })
            .expect("spawn session thread");
        (
            Self { tx: Some(tx), join: Some(join) },
            ActorChannels { state: state_rx, events: event_rx },
        )
    }

    pub async fn call(&self, req: Request) -> Reply {
        let (reply, rx) = oneshot::channel();
        let sent = self.tx.as_ref().is_some_and(|tx| tx.send(Msg { req, reply }).is_ok());
        if !sent {
            return Err((Reason::Internal, "session owner is gone".into()));
        }
        rx.await.unwrap_or_else(|_| Err((Reason::Internal, "session owner is gone".into())))
    }

    /// Stops the owner, finalizing an open session, and waits for it.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.tx = None;
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

impl Drop for ActorHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

struct OpenSession {
    session: Session,
    running: Option<(Instant, SimTime)>,
}

struct Actor {
    user: String,
    workspace: Workspace,
    lab: LabConfig,
    open: Option<OpenSession>,
    state_tx: watch::Sender<Option<Arc<Published>>>,
    event_tx: tokio::sync::mpsc::UnboundedSender<Value>,
    seen_events: usize,
}

fn session_error(e: SessionError) -> (Reason, String) {
    let reason = match e {
        SessionError::NoPlugin(_) => Reason::NoPlugin,
        SessionError::NotManual => Reason::NotManual,
        SessionError::Unsupported(_) => Reason::Unsupported,
        _ => Reason::Internal,
    };
    (reason, e.to_string())
}

fn illegal(msg: &str) -> Reply {
    Err((Reason::IllegalTransition, msg.to_string()))
}

impl Actor {
    fn run(&mut self, rx: mpsc::Receiver<Msg>) {
        loop {
            let running = self.open.as_ref().is_some_and(|o| o.running.is_some());
            let msg = if running {
                match rx.recv_timeout(PACE_STEP) {
                    Ok(m) => Some(m),
                    Err(RecvTimeoutError::Timeout) => None,
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            } else {
                match rx.recv() {
                    Ok(m) => Some(m),
                    Err(_) => break,
                }
            };
            if let Some(Msg { req, reply }) = msg {
                let r = self.handle(req);
                let _ = reply.send(r);
            }
            self.pace();
            self.publish();
        }
        if self.open.is_some() {
            let _ = self.close();
        }
    }

    fn pace(&mut self) {
        let Some(open) = self.open.as_mut() else { return };
        let Some((wall, sim)) = open.running else { return };
        let target = sim + SimTime::from_micros(wall.elapsed().as_micros() as u64);
        if target > open.session.now() {
            let dt = target - open.session.now();
            open.session.advance(dt);
        }
    }

    fn publish(&mut self) {
        let Some(open) = self.open.as_ref() else { return };
        let events = &open.session.events()[self.seen_events..];
        for e in events {
            let _ = self.event_tx.send(serde_json::to_value(e).expect("event serializes"));
        }
        self.seen_events = open.session.events().len();
        let published = Published { snapshot: open.session.snapshot(), running: open.running.is_some() };
        self.state_tx.send_replace(Some(Arc::new(published)));
    }

    fn handle(&mut self, req: Request) -> Reply {
        if let Request::Lifecycle(op) = req {
            return self.lifecycle(op);
        }
        // apply pending simulated time first so the command lands at "now"
        self.pace();
        let Some(open) = self.open.as_mut() else {
            return illegal("session is not open");
        };
        let s = &mut open.session;
        match req {
            Request::SetControl(u1, u2) => s.manual_command(u1, u2).map(|_| json!({})).map_err(session_error),
            Request::SetMode(m) => s.set_mode(m).map(|_| json!({ "mode": m })).map_err(session_error),
            Request::SetBackend(b) => s.set_backend(b).map(|_| json!({ "backend": b })).map_err(session_error),
            Request::Lifecycle(_) => unreachable!(),
        }
    }

    fn lifecycle(&mut self, op: LifecycleOp) -> Reply {
        match (op, self.open.as_mut()) {
            (LifecycleOp::Open, None) => {
                let mut session = Session::new(&self.user, self.lab.clone()).map_err(session_error)?;
                let plugin = session.load_plugin(&self.workspace);
                self.seen_events = 0;
                self.open = Some(OpenSession { session, running: None });
                Ok(match plugin {
                    Ok(()) => json!({ "state": "open", "plugin": true }),
                    Err(e) => json!({ "state": "open", "plugin": false, "plugin_error": e }),
                })
            }
            (LifecycleOp::Open, Some(_)) => illegal("session already open"),
            (LifecycleOp::Run, Some(o)) if o.running.is_none() => {
                o.running = Some((Instant::now(), o.session.now()));
                Ok(json!({ "state": "running" }))
            }
            (LifecycleOp::Stop, Some(o)) if o.running.is_some() => {
                self.pace();
                if let Some(o) = self.open.as_mut() {
                    o.running = None;
                }
                Ok(json!({ "state": "stopped" }))
            }
            (LifecycleOp::Close, Some(_)) => self.close(),
            (LifecycleOp::Run, _) => illegal("run needs an open, stopped session"),
            (LifecycleOp::Stop, _) => illegal("stop needs a running session"),
            (LifecycleOp::Close, None) => illegal("session is not open"),
        }
    }

    fn close(&mut self) -> Reply {
        self.pace();
        self.publish();
        let mut open = self.open.take().expect("open session");
        let dir = open
            .session
            .finalize(self.workspace.dir(), Utc::now())
            .map_err(|e| (Reason::Internal, format!("writing history: {e}")))?;
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for e in &open.session.events()[self.seen_events..] {
            let _ = self.event_tx.send(serde_json::to_value(e).expect("event serializes"));
        }
        self.seen_events = 0;
        self.state_tx.send_replace(None);
        log::info!("session of {} closed, history {}", self.user, name);
        Ok(json!({ "state": "closed", "history": name }))
    }
}
