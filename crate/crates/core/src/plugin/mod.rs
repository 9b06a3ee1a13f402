//! User controller hosting: the four-hook lifecycle (`init`,
//! `compute_world`, `control`, `close`), the per-tick time budget and the
//! per-user workspace.

mod guest;
pub mod history;
mod process;
pub mod wire;
mod workspace;

use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::world::{CompressedWorld, OccupancyGrid, WIRE_THRESHOLD};

pub use guest::Guest;
pub use history::{History, HistoryRow};
pub use process::{CallError, ProcessPlugin};
pub use wire::PROTOCOL_VERSION;
pub use workspace::{PathError, Workspace, ARTIFACT_NAME};

/// User name served by the built-in reference controller.
pub const EXAMPLE_USER: &str = "example";

/// What a controller sees at a tick. Pose and velocities are the vision
/// estimate, never ground truth; `d` is the latest range in cm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
    pub th: f64,
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
    pub d: f64,
    pub t: f64,
}

/// New log-odds value for one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellUpdate {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// In-process controller. The example user's reference solution implements
/// this directly.
pub trait Controller: Send {
    fn init(&mut self) -> Result<(), String> {
        Ok(())
    }

    /// Returns cell changes only; the pose is not the controller's to edit.
    fn compute_world(&mut self, world: &OccupancyGrid, obs: &Observation) -> Result<Vec<CellUpdate>, String>;

    /// Wheel commands in [-1, 1].
    fn control(&mut self, world: &OccupancyGrid, obs: &Observation) -> Result<(f64, f64), String>;

    fn close(&mut self, _history: &History) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetPolicy {
    /// Shared by `compute_world` and `control` within one tick.
    pub deadline_ms: u64,
    pub overrun_limit: u32,
    /// Handshake, `init` and `close` each get this long.
    pub lifecycle_timeout_ms: u64,
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        Self {
            deadline_ms: 200,
            overrun_limit: 3,
            lifecycle_timeout_ms: 1000,
        }
    }
}

impl BudgetPolicy {
    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.deadline_ms)
    }

    pub fn lifecycle_timeout(&self) -> Duration {
        Duration::from_millis(self.lifecycle_timeout_ms)
    }
}

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("no controller artifact in workspace of {0}")]
    MissingArtifact(String),
    #[error("could not start controller: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("init failed: {0}")]
    Init(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hook {
    ComputeWorld,
    Control,
}

impl Hook {
    pub fn name(self) -> &'static str {
        match self {
            Hook::ComputeWorld => "compute_world",
            Hook::Control => "control",
        }
    }
}

/// Everything the host reports to the session about a tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PluginEvent {
    /// The hook missed the tick budget; the rest of the tick ran without it.
    Overrun { hook: Hook, consecutive: u32 },
    Warning { message: String },
    /// The plugin is out for the rest of the session.
    Disabled { reason: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TickOutcome {
    /// Number of cells changed by `compute_world`.
    pub cells_changed: usize,
    /// `Some` only when `control` ran and answered in time.
    pub command: Option<(f64, f64)>,
    pub events: Vec<PluginEvent>,
}

enum Backend {
    BuiltIn(Box<dyn Controller>),
    Process(ProcessPlugin),
}

enum Failure {
    Overrun,
    Fatal(String),
}

pub struct PluginHost {
    backend: Option<Backend>,
    label: String,
    policy: BudgetPolicy,
    consecutive: u32,
    total_overruns: u32,
    disabled: Option<String>,
}

impl PluginHost {
    /// Runs `controller` in-process. Built-in controllers are trusted and
    /// not wall-clock timed, which keeps headless runs reproducible.
    pub fn builtin(label: &str, mut controller: Box<dyn Controller>, policy: BudgetPolicy) -> Result<Self, LaunchError> {
        controller.init().map_err(LaunchError::Init)?;
        Ok(Self::with_backend(label, Backend::BuiltIn(controller), policy))
    }

    /// Starts an external controller and performs the handshake and `init`.
    pub fn spawn(program: &Path, workdir: &Path, stderr_log: Option<&Path>, policy: BudgetPolicy) -> Result<Self, LaunchError> {
        let mut proc = ProcessPlugin::spawn(program, workdir, stderr_log)?;
        let timeout = policy.lifecycle_timeout();
        let hello = proc
            .call("hello", json!({ "version": PROTOCOL_VERSION }), Instant::now() + timeout)
            .map_err(|e| LaunchError::Handshake(describe(&e)))?;
        match hello.get("version").and_then(Value::as_u64) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            other => return Err(LaunchError::Handshake(format!("unsupported protocol version {other:?}"))),
        }
        let shape = json!({
            "rows": crate::world::GRID_ROWS,
            "cols": crate::world::GRID_COLS,
            "resolution": crate::world::CELL_SIZE,
        });
        proc.call("init", shape, Instant::now() + timeout)
            .map_err(|e| LaunchError::Init(describe(&e)))?;
        let label = program.display().to_string();
        Ok(Self::with_backend(&label, Backend::Process(proc), policy))
    }

    /// The example user gets the reference controller; anyone else needs an
    /// uploaded artifact in their workspace.
    pub fn launch(workspace: &Workspace, policy: BudgetPolicy) -> Result<Self, LaunchError> {
        if workspace.user() == EXAMPLE_USER {
            return Self::builtin(EXAMPLE_USER, Box::new(crate::mapping::ExampleController::default()), policy);
        }
        if !workspace.has_artifact() {
            return Err(LaunchError::MissingArtifact(workspace.user().to_string()));
        }
        let log = workspace.dir().join("controller.log");
        Self::spawn(&workspace.artifact_path(), workspace.dir(), Some(&log), policy)
    }

    fn with_backend(label: &str, backend: Backend, policy: BudgetPolicy) -> Self {
        Self {
            backend: Some(backend),
            label: label.to_string(),
            policy,
            consecutive: 0,
            total_overruns: 0,
            disabled: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn policy(&self) -> &BudgetPolicy {
        &self.policy
    }

    pub fn is_active(&self) -> bool {
        self.backend.is_some()
    }

    pub fn disabled_reason(&self) -> Option<&str> {
        self.disabled.as_deref()
    }

    pub fn overruns(&self) -> u32 {
        self.total_overruns
    }

    pub fn consecutive_overruns(&self) -> u32 {
        self.consecutive
    }

    /// One tick: `compute_world`, then `control` when `with_control`, both
    /// against a single deadline measured from the call. A late
    /// `compute_world` skips `control` for this tick.
    pub fn run_tick(&mut self, grid: &mut OccupancyGrid, obs: &Observation, with_control: bool) -> TickOutcome {
        let mut out = TickOutcome::default();
        if self.backend.is_none() {
            return out;
        }
        let deadline = Instant::now() + self.policy.deadline();

        match self.compute_world(grid, obs, deadline) {
            Ok(delta) => match apply_delta(grid, &delta) {
                Ok(n) => out.cells_changed = n,
                Err(why) => {
                    self.disable(why, &mut out.events);
                    return out;
                }
            },
            Err(Failure::Overrun) => {
                self.overrun(Hook::ComputeWorld, &mut out.events);
                return out;
            }
            Err(Failure::Fatal(why)) => {
                self.disable(format!("compute_world: {why}"), &mut out.events);
                return out;
            }
        }

        if with_control {
            match self.control(grid, obs, deadline) {
                Ok((u1, u2)) => {
                    let u1 = sanitize(u1, "u1", &mut out.events);
                    let u2 = sanitize(u2, "u2", &mut out.events);
                    out.command = Some((u1, u2));
                }
                Err(Failure::Overrun) => {
                    self.overrun(Hook::Control, &mut out.events);
                    return out;
                }
                Err(Failure::Fatal(why)) => {
                    self.disable(format!("control: {why}"), &mut out.events);
                    return out;
                }
            }
        }
        self.consecutive = 0;
        out
    }

    /// Invokes `close` and shuts the plugin down. Returns the hook's error,
    /// if any; the caller writes history either way.
    pub fn finalize(&mut self, history: &History) -> Option<String> {
        let timeout = self.policy.lifecycle_timeout();
        let result = match self.backend.take()? {
            Backend::BuiltIn(mut c) => c.close(history),
            Backend::Process(mut p) => {
                let r = p
                    .call("close", json!({ "history": history.to_json() }), Instant::now() + timeout)
                    .map(|_| ())
                    .map_err(|e| describe(&e));
                p.kill();
                r
            }
        };
        result.err()
    }

    fn compute_world(&mut self, grid: &OccupancyGrid, obs: &Observation, deadline: Instant) -> Result<Vec<CellUpdate>, Failure> {
        match self.backend.as_mut() {
            Some(Backend::BuiltIn(c)) => c.compute_world(grid, obs).map_err(Failure::Fatal),
            Some(Backend::Process(p)) => {
                let mut args = world_args(grid);
                for (k, v) in [("x", obs.x), ("y", obs.y), ("th", obs.th), ("d", obs.d)] {
                    args[k] = json!(v);
                }
                let reply = p.call("compute_world", args, deadline).map_err(failure)?;
                parse_delta(&reply).map_err(Failure::Fatal)
            }
            None => Ok(Vec::new()),
        }
    }

    fn control(&mut self, grid: &OccupancyGrid, obs: &Observation, deadline: Instant) -> Result<(f64, f64), Failure> {
        match self.backend.as_mut() {
            Some(Backend::BuiltIn(c)) => c.control(grid, obs).map_err(Failure::Fatal),
            Some(Backend::Process(p)) => {
                let mut args = world_args(grid);
                let obs_json = serde_json::to_value(obs).expect("plain struct");
                for (k, v) in obs_json.as_object().expect("object") {
                    args[k] = v.clone();
                }
                let reply = p.call("control", args, deadline).map_err(failure)?;
                parse_command(&reply).map_err(Failure::Fatal)
            }
            None => Ok((0.0, 0.0)),
        }
    }

    fn overrun(&mut self, hook: Hook, events: &mut Vec<PluginEvent>) {
        self.consecutive += 1;
        self.total_overruns += 1;
        events.push(PluginEvent::Overrun { hook, consecutive: self.consecutive });
        if self.consecutive >= self.policy.overrun_limit {
            let reason = format!("{} consecutive overruns of the {} ms budget", self.consecutive, self.policy.deadline_ms);
            self.disable(reason, events);
        }
    }

    fn disable(&mut self, reason: String, events: &mut Vec<PluginEvent>) {
        if let Some(Backend::Process(mut p)) = self.backend.take() {
            p.kill();
        }
        log::warn!("plugin {} disabled: {reason}", self.label);
        events.push(PluginEvent::Disabled { reason: reason.clone() });
        self.disabled = Some(reason);
    }
}

fn describe(e: &CallError) -> String {
    match e {
        CallError::Timeout => "timed out".into(),
        CallError::Exited => "plugin exited".into(),
        CallError::Malformed(m) => format!("malformed reply: {m}"),
        CallError::Hook(m) => format!("hook error: {m}"),
    }
}

fn failure(e: CallError) -> Failure {
    match e {
        CallError::Timeout => Failure::Overrun,
        other => Failure::Fatal(describe(&other)),
    }
}

fn sanitize(u: f64, name: &str, events: &mut Vec<PluginEvent>) -> f64 {
    if !u.is_finite() {
        events.push(PluginEvent::Warning { message: format!("{name} = {u} replaced by 0") });
        0.0
    } else if u.abs() > 1.0 {
        let c = u.clamp(-1.0, 1.0);
        events.push(PluginEvent::Warning { message: format!("{name} = {u} clamped to {c}") });
        c
    } else {
        u
    }
}

fn apply_delta(grid: &mut OccupancyGrid, delta: &[CellUpdate]) -> Result<usize, String> {
    if let Some(bad) = delta.iter().find(|c| c.row >= grid.rows() || c.col >= grid.cols()) {
        return Err(format!("compute_world: cell ({}, {}) outside the grid", bad.row, bad.col));
    }
    let mut changed = 0;
    for c in delta {
        let before = grid.get(c.row, c.col);
        grid.set(c.row, c.col, c.value);
        if grid.get(c.row, c.col).to_bits() != before.to_bits() {
            changed += 1;
        }
    }
    Ok(changed)
}

/// Grid arguments sent with every tick request: the binarized world as
/// base64 CompressedWorld bytes plus the digest of the full log-odds grid.
pub fn world_args(grid: &OccupancyGrid) -> Value {
    let bytes = CompressedWorld::compress(grid, WIRE_THRESHOLD).to_bytes();
    json!({
        "world": base64::engine::general_purpose::STANDARD.encode(bytes),
        "digest": grid.digest(),
    })
}

/// A delta is an array of `[row, col, log_odds]` triples.
pub fn parse_delta(v: &Value) -> Result<Vec<CellUpdate>, String> {
    let items = v.as_array().ok_or("delta must be an array")?;
    items
        .iter()
        .map(|item| {
            let t = item.as_array().filter(|a| a.len() == 3).ok_or("delta entry must be [row, col, value]")?;
            let row = t[0].as_u64().ok_or("row must be a non-negative integer")? as usize;
            let col = t[1].as_u64().ok_or("col must be a non-negative integer")? as usize;
            let value = t[2].as_f64().ok_or("value must be a number")?;
            Ok(CellUpdate { row, col, value })
        })
        .collect()
}

/// A command is `[u1, u2]`; `null` stands for a non-finite value.
pub fn parse_command(v: &Value) -> Result<(f64, f64), String> {
    let pair = v.as_array().filter(|a| a.len() == 2).ok_or("command must be [u1, u2]")?;
    let num = |x: &Value| -> Result<f64, String> {
        match x {
            Value::Null => Ok(f64::NAN),
            Value::Number(n) => n.as_f64().ok_or_else(|| "bad number".to_string()),
            _ => Err("command entries must be numbers".to_string()),
        }
    };
    Ok((num(&pair[0])?, num(&pair[1])?))
}
