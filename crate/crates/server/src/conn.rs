//! Protocol state machine for one connection, independent of transport.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use roblab_core::booking::{BookingStore, Denial};
use roblab_core::plugin::Workspace;
use roblab_core::session::{BackendKind, Mode};
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::actor::{ActorChannels, ActorHandle, LifecycleOp, Published, Request};
use crate::config::ServerConfig;
use crate::frame::{Frame, FrameType, Reason};
use crate::layout::{MapFrame, StateFrame};
use crate::queue::OutQueue;
use crate::registry::{self, Direction};
use crate::transfer::{download, Upload};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// State shared by every connection of a server.
pub struct Shared {
    pub config: ServerConfig,
    pub booking: Mutex<BookingStore>,
    pub active: Mutex<HashSet<String>>,
    pub clock: Clock,
    pub audit: Mutex<Vec<String>>,
}

impl Shared {
    pub fn new(config: ServerConfig, booking: BookingStore) -> Self {
        Self {
            config,
            booking: Mutex::new(booking),
            active: Mutex::new(HashSet::new()),
            clock: Arc::new(Utc::now),
            audit: Mutex::new(Vec::new()),
        }
    }

    fn audit(&self, user: &str, what: &str) {
        log::warn!("audit: {user}: {what}");
        self.audit.lock().unwrap().push(format!("{user}: {what}"));
    }

    /// Re-reads the store file so operator changes apply without a restart.
    fn refresh_booking(&self) {
        let path = &self.config.booking_path;
        if !path.exists() {
            return;
        }
        match BookingStore::load(path) {
            Ok(store) => *self.booking.lock().unwrap() = store,
            Err(e) => log::error!("keeping previous booking store: {e}"),
        }
    }
}

/// Releases the user's exclusive session when the connection ends.
struct ActiveGuard {
    shared: Arc<Shared>,
    user: String,
}

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        self.shared.active.lock().unwrap().remove(&self.user);
    }
}

struct Authed {
    user: String,
    workspace: Workspace,
    actor: Option<ActorHandle>,
    channels: ActorChannels,
    upload: Option<Upload>,
    last_map: Option<(u64, Instant)>,
    _guard: ActiveGuard,
}

pub struct Connection {
    shared: Arc<Shared>,
    out: Arc<OutQueue>,
    authed: Option<Authed>,
}

fn seq_of(v: &Value) -> Option<Value> {
    v.get("seq").cloned()
}

fn with_seq(mut body: Value, seq: &Option<Value>) -> Value {
    if let (Some(s), Some(obj)) = (seq, body.as_object_mut()) {
        obj.insert("seq".into(), s.clone());
    }
    body
}

fn error_frame(reason: Reason, message: &str, seq: &Option<Value>) -> Frame {
    Frame::json(FrameType::Error, &with_seq(json!({ "reason": reason.code(), "message": message }), seq))
}

impl Connection {
    pub fn new(shared: Arc<Shared>, out: Arc<OutQueue>) -> Self {
        Self { shared, out, authed: None }
    }

    /// Runs until the inbound stream ends, then finalizes any open session.
    pub async fn run(mut self, mut inbound: mpsc::Receiver<Frame>) {
        let mut push = tokio::time::interval(Duration::from_millis(self.shared.config.state_period_ms));
        push.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                frame = inbound.recv() => match frame {
                    Some(f) => self.handle(f).await,
                    None => break,
                },
                ev = next_event(&mut self.authed) => {
                    if let Some(ev) = ev {
                        self.out.push(Frame::json(FrameType::Event, &ev));
                    }
                }
                _ = push.tick() => self.push_state(),
            }
        }
        if let Some(mut a) = self.authed.take() {
            if let Some(actor) = a.actor.take() {
                let _ = tokio::task::spawn_blocking(move || actor.shutdown()).await;
            }
        }
        self.out.close();
    }

    fn push_state(&mut self) {
        let Some(a) = self.authed.as_mut() else { return };
        let Some(p) = a.channels.state.borrow().clone() else {
            a.last_map = None;
            return;
        };
        let p: Arc<Published> = p;
        let state = StateFrame::from_snapshot(&p.snapshot, p.running, self.out.dropped());
        self.out.push_droppable(Frame::new(FrameType::State, state.encode()));
        let rev = p.snapshot.map_revision;
        let min_gap = Duration::from_millis(self.shared.config.map_min_period_ms);
        let due = match a.last_map {
            None => true,
            Some((last_rev, at)) => last_rev != rev && at.elapsed() >= min_gap,
        };
        if due {
            let map = MapFrame { t_us: p.snapshot.t.as_micros(), revision: rev, world: (*p.snapshot.map).clone() };
            self.out.push_droppable(Frame::new(FrameType::Map, map.encode()));
            a.last_map = Some((rev, Instant::now()));
        }
    }

    async fn handle(&mut self, frame: Frame) {
        if self.authed.is_none() {
            if frame.frame_type() == Some(FrameType::Auth) {
                self.authenticate(&frame);
            } else {
                self.out.push(error_frame(Reason::Unauthenticated, "authenticate first", &None));
            }
            return;
        }
        let Some(kind) = frame.frame_type() else {
            self.out.push(error_frame(Reason::UnknownFrame, &format!("unknown frame type 0x{:02x}", frame.kind), &None));
            return;
        };
        let reply = match kind {
            FrameType::PutChunk => self.put_chunk(&frame.payload),
            _ => {
                let Some(body) = frame.payload_json() else {
                    self.out.push(error_frame(Reason::BadPayload, "payload is not JSON", &None));
                    return;
                };
                let seq = seq_of(&body);
                match self.dispatch(kind, &body).await {
                    Ok(Some(v)) => Some(Ok((v, seq))),
                    Ok(None) => None,
                    Err(e) => Some(Err((e, seq))),
                }
            }
        };
        match reply {
            Some(Ok((v, seq))) => self.out.push(Frame::json(FrameType::Ack, &with_seq(v, &seq))),
            Some(Err(((reason, msg), seq))) => self.out.push(error_frame(reason, &msg, &seq)),
            None => {}
        }
    }

    fn authenticate(&mut self, frame: &Frame) {
        let body = frame.payload_json().unwrap_or(Value::Null);
        let (Some(user), Some(password)) = (body.get("user").and_then(Value::as_str), body.get("password").and_then(Value::as_str)) else {
            self.out.push(error_frame(Reason::BadPayload, "auth needs user and password", &None));
            return;
        };
        let reject = |reason: Reason, msg: &str| {
            Frame::json(FrameType::AuthReject, &json!({ "reason": reason.code(), "message": msg }))
        };
        self.shared.refresh_booking();
        let (verdict, ws_name) = {
            let store = self.shared.booking.lock().unwrap();
            let verdict = store.authenticate(user, password, (self.shared.clock)());
            (verdict, store.workspace_of(user).map(str::to_string))
        };
        match verdict {
            Err(Denial::BadCredentials) => return self.out.push(reject(Reason::BadCredentials, "unknown user or wrong password")),
            Err(Denial::NoSlot) => return self.out.push(reject(Reason::NoSlot, "no booked slot covers the current time")),
            Ok(()) => {}
        }
        if !self.shared.active.lock().unwrap().insert(user.to_string()) {
            return self.out.push(reject(Reason::Busy, "user already has an active session"));
        }
        let guard = ActiveGuard { shared: Arc::clone(&self.shared), user: user.to_string() };
        let ws_name = ws_name.unwrap_or_else(|| user.to_string());
        let workspace = match Workspace::open(&self.shared.config.data_dir, user, &ws_name) {
            Ok(w) => w,
            Err(e) => {
                drop(guard);
                return self.out.push(error_frame(Reason::Internal, &format!("workspace: {e}"), &None));
            }
        };
        let (actor, channels) = ActorHandle::spawn(user.to_string(), workspace.clone(), self.shared.config.lab.clone());
        let vars: Vec<Value> = registry::VARIABLES.iter().map(|v| serde_json::to_value(v).unwrap()).collect();
        self.out.push(Frame::json(FrameType::AuthOk, &json!({ "user": user, "workspace": ws_name, "variables": vars })));
        log::info!("{user} authenticated");
        self.authed = Some(Authed {
            user: user.to_string(),
            workspace,
            actor: Some(actor),
            channels,
            upload: None,
            last_map: None,
            _guard: guard,
        });
    }

    async fn call(&self, req: Request) -> Result<Option<Value>, (Reason, String)> {
        let a = self.authed.as_ref().expect("authenticated");
        a.actor.as_ref().expect("actor").call(req).await.map(Some)
    }

    async fn dispatch(&mut self, kind: FrameType, body: &Value) -> Result<Option<Value>, (Reason, String)> {
        let bad = |m: &str| (Reason::BadPayload, m.to_string());
        match kind {
            FrameType::Auth => Err((Reason::IllegalTransition, "already authenticated".into())),
            FrameType::Lifecycle => {
                let op = body.get("op").and_then(Value::as_str).and_then(LifecycleOp::parse).ok_or_else(|| bad("op must be open, run, stop or close"))?;
                self.call(Request::Lifecycle(op)).await
            }
            FrameType::SetControl => {
                let u1 = body.get("u1").and_then(Value::as_f64).ok_or_else(|| bad("u1 must be a number"))?;
                let u2 = body.get("u2").and_then(Value::as_f64).ok_or_else(|| bad("u2 must be a number"))?;
                self.call(Request::SetControl(u1, u2)).await
            }
            FrameType::SetMode => {
                let mode = parse_mode(body.get("mode")).ok_or_else(|| bad("mode must be manual or automatic"))?;
                self.call(Request::SetMode(mode)).await
            }
            FrameType::SetBackend => {
                let b = parse_backend(body.get("backend")).ok_or_else(|| bad("backend must be virtual or real"))?;
                self.call(Request::SetBackend(b)).await
            }
            FrameType::WriteVar => self.write_var(body).await,
            FrameType::PutBegin => self.put_begin(body),
            FrameType::PutEnd => self.put_end(),
            FrameType::Get => self.get(body),
            _ => Err((Reason::UnknownFrame, format!("{kind:?} is not a client frame"))),
        }
    }

    async fn write_var(&mut self, body: &Value) -> Result<Option<Value>, (Reason, String)> {
        let name = body.get("name").and_then(Value::as_str).ok_or((Reason::BadPayload, "name missing".to_string()))?;
        let Some(var) = registry::lookup(name) else {
            return Err((Reason::UnknownVariable, format!("no variable {name:?}")));
        };
        if var.direction == Direction::Indicator {
            let user = self.authed.as_ref().map(|a| a.user.clone()).unwrap_or_default();
            self.shared.audit(&user, &format!("write to indicator {name}"));
            return Err((Reason::IndicatorWrite, format!("{name} is an indicator")));
        }
        let value = body.get("value").cloned().unwrap_or(Value::Null);
        let bad = |m: &str| (Reason::BadPayload, m.to_string());
        let req = match name {
            "command" => {
                let pair = value.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("command is [u1, u2]"))?;
                let u1 = pair[0].as_f64().ok_or_else(|| bad("u1 must be a number"))?;
                let u2 = pair[1].as_f64().ok_or_else(|| bad("u2 must be a number"))?;
                Request::SetControl(u1, u2)
            }
            "mode" => Request::SetMode(parse_mode(Some(&value)).ok_or_else(|| bad("mode must be manual or automatic"))?),
            "backend" => Request::SetBackend(parse_backend(Some(&value)).ok_or_else(|| bad("backend must be virtual or real"))?),
            _ => return Err((Reason::UnknownVariable, format!("no handler for {name}"))),
        };
        self.call(req).await
    }

    fn resolve(&self, body: &Value) -> Result<(String, std::path::PathBuf), (Reason, String)> {
        let a = self.authed.as_ref().expect("authenticated");
        let rel = body.get("path").and_then(Value::as_str).ok_or((Reason::BadPayload, "path missing".to_string()))?;
        match a.workspace.resolve(rel) {
            Ok(p) => Ok((rel.to_string(), p)),
            Err(e) => {
                self.shared.audit(&a.user, &format!("rejected path {rel:?}"));
                Err((Reason::PathEscape, e.to_string()))
            }
        }
    }

    fn put_begin(&mut self, body: &Value) -> Result<Option<Value>, (Reason, String)> {
        let (rel, path) = self.resolve(body)?;
        let size = body.get("size").and_then(Value::as_u64).ok_or((Reason::BadPayload, "size missing".to_string()))?;
        let digest = body.get("sha256").and_then(Value::as_str).ok_or((Reason::BadPayload, "sha256 missing".to_string()))?;
        let up = Upload::begin(&rel, path, size, digest)?;
        self.authed.as_mut().unwrap().upload = Some(up);
        Ok(Some(json!({ "path": rel, "ready": true })))
    }

    fn put_chunk(&mut self, bytes: &[u8]) -> Option<Result<(Value, Option<Value>), ((Reason, String), Option<Value>)>> {
        let a = self.authed.as_mut().unwrap();
        let result = match a.upload.as_mut() {
            None => Err((Reason::TransferState, "no upload in progress".to_string())),
            Some(up) => up.chunk(bytes),
        };
        match result {
            Ok(()) => None,
            Err(e) => {
                a.upload = None;
                Some(Err((e, None)))
            }
        }
    }

    fn put_end(&mut self) -> Result<Option<Value>, (Reason, String)> {
        let a = self.authed.as_mut().unwrap();
        let up = a.upload.take().ok_or((Reason::TransferState, "no upload in progress".to_string()))?;
        let rel = up.rel.clone();
        let digest = up.finish()?;
        Ok(Some(json!({ "path": rel, "sha256": digest })))
    }

    fn get(&mut self, body: &Value) -> Result<Option<Value>, (Reason, String)> {
        let (rel, path) = self.resolve(body)?;
        for f in download(&rel, &path)? {
            self.out.push(f);
        }
        Ok(None)
    }
}

async fn next_event(authed: &mut Option<Authed>) -> Option<Value> {
    match authed {
        Some(a) => a.channels.events.recv().await,
        None => std::future::pending().await,
    }
}

fn parse_mode(v: Option<&Value>) -> Option<Mode> {
    match v?.as_str()? {
        "manual" => Some(Mode::Manual),
        "automatic" => Some(Mode::Automatic),
        _ => None,
    }
}

fn parse_backend(v: Option<&Value>) -> Option<BackendKind> {
    match v?.as_str()? {
        "virtual" => Some(BackendKind::Virtual),
        "real" => Some(BackendKind::Real),
        _ => None,
    }
}
