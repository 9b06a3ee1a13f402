//! Session orchestration: one simulated clock driving physics, vision and
//! the map/control tick, mode gating between manual and plugin control, and
//! the client-visible snapshot.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::clock::SimTime;
use crate::config::LabConfig;
use crate::plugin::history::write_history;
use crate::plugin::{History, HistoryRow, Observation, PluginEvent, PluginHost, Workspace};
use crate::robot::{Command, Robot};
use crate::vision::{PoseEstimate, VisionError, VisionPipeline};
use crate::world::{seed_for_user, CompressedWorld, HiddenWorld, OccupancyGrid, WorldError, START_POSE, WIRE_THRESHOLD};

const PHYSICS_STREAM: u64 = 1;
const VISION_STREAM: u64 = 2;
const LINK_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Manual,
    Automatic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Manual => "manual",
            Mode::Automatic => "automatic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Virtual,
    Real,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("automatic mode needs a running plugin: {0}")]
    NoPlugin(String),
    #[error("manual commands are refused in automatic mode")]
    NotManual,
    #[error("backend {0:?} is not supported")]
    Unsupported(BackendKind),
    #[error("vision setup failed: {0}")]
    Vision(#[from] VisionError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    PluginLoaded { label: String },
    PluginLaunchFailed { reason: String },
    ModeRequested { mode: Mode },
    ModeChanged { mode: Mode },
    ModeRejected { reason: String },
    CommandRejected { reason: String },
    CommandLost { u1: f64, u2: f64 },
    Plugin(PluginEvent),
    CloseFailed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t: SimTime,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// One completed map/control cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub index: u64,
    pub t: SimTime,
    pub command: Command,
    pub range_cm: u8,
    pub estimate: PoseEstimate,
    pub mode: Mode,
}

/// What clients may see. Built from the vision estimate only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: SimTime,
    pub tick: u64,
    pub mode: Mode,
    pub backend: BackendKind,
    pub x: f64,
    pub y: f64,
    pub th: f64,
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
    pub estimate_valid: bool,
    pub d: u8,
    pub battery_mv: f64,
    pub command: Command,
    pub overruns: u32,
    pub plugin_active: bool,
    pub map_revision: u64,
    #[serde(skip)]
    pub map: Arc<CompressedWorld>,
}

/// How many of each scheduled activity have run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub physics_steps: u64,
    pub vision_frames: u64,
    pub ticks: u64,
}

pub struct Session {
    user: String,
    config: LabConfig,
    seed: u64,
    world: HiddenWorld,
    robot: Robot,
    vision: VisionPipeline,
    grid: OccupancyGrid,
    plugin: Option<PluginHost>,
    plugin_error: Option<String>,
    mode: Mode,
    pending_mode: Option<Mode>,
    backend: BackendKind,
    now: SimTime,
    counters: Counters,
    estimate: PoseEstimate,
    command: Command,
    physics_rng: ChaCha8Rng,
    vision_rng: ChaCha8Rng,
    link_rng: ChaCha8Rng,
    history: History,
    ticks: Vec<TickRecord>,
    events: Vec<SessionEvent>,
    map_cache: (u64, Arc<CompressedWorld>),
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Session {
    /// Creates the session at t = 0 and takes the first camera frame.
    pub fn new(user: &str, config: LabConfig) -> Result<Self, SessionError> {
        let seed = config.seed.unwrap_or_else(|| seed_for_user(user));
        let world = match &config.shapes {
            Some(shapes) => HiddenWorld { seed, shapes: shapes.clone() },
            None => HiddenWorld::from_seed(seed),
        };
        let mut vision = VisionPipeline::new(config.vision.clone())?;
        let mut vision_rng = stream(seed, VISION_STREAM);
        let estimate = vision.tick(&START_POSE, &mut vision_rng, SimTime::ZERO);
        let grid = OccupancyGrid::new(config.prior)?;
        let map_cache = (grid.revision(), Arc::new(CompressedWorld::compress(&grid, WIRE_THRESHOLD)));
        Ok(Self {
            user: user.to_string(),
            seed,
            world,
            robot: Robot::new(config.robot.clone(), START_POSE),
            vision,
            grid,
            plugin: None,
            plugin_error: None,
            mode: Mode::Manual,
            pending_mode: None,
            backend: BackendKind::Virtual,
            now: SimTime::ZERO,
            counters: Counters { vision_frames: 1, ..Counters::default() },
            estimate,
            command: (0.0, 0.0),
            physics_rng: stream(seed, PHYSICS_STREAM),
            vision_rng,
            link_rng: stream(seed, LINK_STREAM),
            history: History::default(),
            ticks: Vec::new(),
            events: Vec::new(),
            map_cache,
            config,
        })
    }

    /// Launches the workspace's plugin. Failure leaves the session usable in
    /// manual mode and is recorded as an event.
    pub fn load_plugin(&mut self, workspace: &Workspace) -> Result<(), String> {
        match PluginHost::launch(workspace, self.config.plugin.clone()) {
            Ok(host) => {
                self.attach_plugin(host);
                Ok(())
            }
            Err(e) => {
                let reason = e.to_string();
                self.plugin_error = Some(reason.clone());
                self.push(EventKind::PluginLaunchFailed { reason: reason.clone() });
                Err(reason)
            }
        }
    }

    pub fn attach_plugin(&mut self, host: PluginHost) {
        self.push(EventKind::PluginLoaded { label: host.label().to_string() });
        self.plugin_error = None;
        self.plugin = Some(host);
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &LabConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn tick_log(&self) -> &[TickRecord] {
        &self.ticks
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn plugin(&self) -> Option<&PluginHost> {
        self.plugin.as_ref()
    }

    /// Ground truth, for the lab's own evaluation. Never exported to clients.
    pub fn hidden_world(&self) -> &HiddenWorld {
        &self.world
    }

    /// Ground-truth robot state, for evaluation only.
    pub fn robot(&self) -> &Robot {
        &self.robot
    }

    fn push(&mut self, kind: EventKind) {
        self.events.push(SessionEvent { t: self.now, kind });
    }

    fn plugin_ready(&self) -> Result<(), String> {
        match &self.plugin {
            Some(p) if p.is_active() => Ok(()),
            Some(p) => Err(p.disabled_reason().unwrap_or("plugin disabled").to_string()),
            None => Err(self.plugin_error.clone().unwrap_or_else(|| "no plugin loaded".to_string())),
        }
    }

    /// Requests a mode change, effective at the next tick boundary.
    pub fn set_mode(&mut self, mode: Mode) -> Result<(), SessionError> {
        if mode == Mode::Automatic {
            if let Err(reason) = self.plugin_ready() {
                self.push(EventKind::ModeRejected { reason: reason.clone() });
                return Err(SessionError::NoPlugin(reason));
            }
        }
        self.pending_mode = (mode != self.mode).then_some(mode);
        self.push(EventKind::ModeRequested { mode });
        Ok(())
    }

    pub fn set_backend(&mut self, backend: BackendKind) -> Result<(), SessionError> {
        match backend {
            BackendKind::Virtual => {
                self.backend = backend;
                Ok(())
            }
            BackendKind::Real => Err(SessionError::Unsupported(backend)),
        }
    }

    /// Queues a manual command on the lossy link at the current time.
    pub fn manual_command(&mut self, u1: f64, u2: f64) -> Result<(), SessionError> {
        if self.mode != Mode::Manual {
            self.push(EventKind::CommandRejected { reason: "automatic mode".into() });
            return Err(SessionError::NotManual);
        }
        let cmd = (crate::robot::clamp_command(u1), crate::robot::clamp_command(u2));
        self.command = cmd;
        if !self.robot.send_command(self.now, cmd, &mut self.link_rng) {
            self.push(EventKind::CommandLost { u1: cmd.0, u2: cmd.1 });
        }
        Ok(())
    }

    /// Runs every physics step, camera frame and tick in (now, now + dt].
    pub fn advance(&mut self, dt: SimTime) -> &[SessionEvent] {
        let first_event = self.events.len();
        let end = self.now + dt;
        let physics = SimTime::from_millis(self.config.physics_period_ms);
        let frame = self.vision.frame_period();
        let tick = SimTime::from_millis(self.config.tick_period_ms);
        loop {
            let next = self
                .now
                .next_multiple_after(physics)
                .min(self.now.next_multiple_after(frame))
                .min(self.now.next_multiple_after(tick));
            if next > end {
                break;
            }
            self.now = next;
            if next.is_multiple_of(physics) {
                self.physics_step(physics, next);
            }
            if next.is_multiple_of(frame) {
                self.vision_frame(next);
            }
            if next.is_multiple_of(tick) {
                self.run_tick(next, tick);
            }
        }
        self.now = end;
        if self.map_cache.0 != self.grid.revision() {
            self.map_cache = (self.grid.revision(), Arc::new(CompressedWorld::compress(&self.grid, WIRE_THRESHOLD)));
        }
        &self.events[first_event..]
    }

    fn physics_step(&mut self, period: SimTime, t: SimTime) {
        // the robot integrates whole steps ending on this boundary
        while self.robot.state().t < t {
            self.robot.step(period, &self.world, &mut self.physics_rng);
            self.counters.physics_steps += 1;
        }
    }

    fn vision_frame(&mut self, t: SimTime) {
        let truth = self.robot.state().pose();
        self.estimate = self.vision.tick(&truth, &mut self.vision_rng, t);
        self.counters.vision_frames += 1;
    }

    fn run_tick(&mut self, t: SimTime, period: SimTime) {
        let index = t.as_micros() / period.as_micros();
        if let Some(mode) = self.pending_mode.take() {
            self.switch_mode(mode, t);
        }

        let range = self.robot.delayed_range(t);
        let e = self.estimate;
        let obs = Observation {
            x: e.x,
            y: e.y,
            th: e.theta,
            vx: e.vx,
            vy: e.vy,
            w: e.omega,
            d: range as f64,
            t: t.as_secs_f64(),
        };

        let automatic = self.mode == Mode::Automatic;
        let mut outcome = None;
        if let Some(host) = self.plugin.as_mut() {
            if host.is_active() {
                outcome = Some(host.run_tick(&mut self.grid, &obs, automatic));
            }
        }
        let mut disabled = false;
        if let Some(out) = outcome {
            for ev in out.events {
                disabled |= matches!(ev, PluginEvent::Disabled { .. });
                self.push(EventKind::Plugin(ev));
            }
            if automatic && !disabled {
                if let Some(cmd) = out.command {
                    self.command = cmd;
                    if !self.robot.send_command(t, cmd, &mut self.link_rng) {
                        self.push(EventKind::CommandLost { u1: cmd.0, u2: cmd.1 });
                    }
                }
            }
        }
        if disabled && self.mode == Mode::Automatic {
            self.switch_mode(Mode::Manual, t);
        }

        self.counters.ticks += 1;
        let battery = self.robot.state().battery_mv;
        self.history.push(HistoryRow {
            t: obs.t,
            x: obs.x,
            y: obs.y,
            th: obs.th,
            vx: obs.vx,
            vy: obs.vy,
            w: obs.w,
            d: obs.d,
            u1: self.command.0,
            u2: self.command.1,
            battery,
        });
        self.ticks.push(TickRecord {
            index,
            t,
            command: self.command,
            range_cm: range,
            estimate: e,
            mode: self.mode,
        });
    }

    fn switch_mode(&mut self, mode: Mode, t: SimTime) {
        if mode == self.mode {
            return;
        }
        if mode == Mode::Automatic && self.plugin_ready().is_err() {
            self.push(EventKind::ModeRejected { reason: "plugin no longer available".into() });
            return;
        }
        self.mode = mode;
        if mode == Mode::Manual {
            self.command = (0.0, 0.0);
            self.robot.halt(t);
        }
        self.push(EventKind::ModeChanged { mode });
    }

    pub fn snapshot(&self) -> Snapshot {
        let e = &self.estimate;
        let last_range = self.ticks.last().map_or(crate::robot::MAX_READING_CM, |r| r.range_cm);
        Snapshot {
            t: self.now,
            tick: self.counters.ticks,
            mode: self.mode,
            backend: self.backend,
            x: e.x,
            y: e.y,
            th: e.theta,
            vx: e.vx,
            vy: e.vy,
            w: e.omega,
            estimate_valid: e.valid,
            d: last_range,
            battery_mv: self.robot.state().battery_mv,
            command: self.command,
            overruns: self.plugin.as_ref().map_or(0, PluginHost::overruns),
            plugin_active: self.plugin.as_ref().is_some_and(PluginHost::is_active),
            map_revision: self.grid.revision(),
            map: Arc::clone(&self.map_cache.1),
        }
    }

    /// Calls the close hook and writes the history directory under `dir`.
    pub fn finalize(&mut self, dir: &Path, at: DateTime<Utc>) -> std::io::Result<PathBuf> {
        if let Some(host) = self.plugin.as_mut() {
            if let Some(reason) = host.finalize(&self.history) {
                log::warn!("close hook failed: {reason}");
                self.push(EventKind::CloseFailed { reason });
            }
        }
        let meta = json!({
            "user": self.user,
            "seed": self.seed,
            "config": self.config,
            "ticks": self.counters.ticks,
            "overruns": self.plugin.as_ref().map_or(0, PluginHost::overruns),
            "plugin": self.plugin.as_ref().map(|p| p.label().to_string()),
            "plugin_disabled": self.plugin.as_ref().and_then(|p| p.disabled_reason().map(str::to_string)),
            "duration_s": self.now.as_secs_f64(),
        });
        write_history(dir, &self.history, &self.grid, &meta, at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_counts() {
        let mut s = Session::new("alice", LabConfig::default()).unwrap();
        s.advance(SimTime::from_secs_f64(1.0));
        assert_eq!(s.counters(), Counters { physics_steps: 100, vision_frames: 17, ticks: 5 });
        assert_eq!(s.robot().state().t, SimTime::from_millis(1000));
    }

    #[test]
    fn split_advances_match_single() {
        let mut a = Session::new("alice", LabConfig::default()).unwrap();
        let mut b = Session::new("alice", LabConfig::default()).unwrap();
        a.manual_command(1.0, 1.0).unwrap();
        b.manual_command(1.0, 1.0).unwrap();
        a.advance(SimTime::from_millis(2000));
        for _ in 0..7 {
            b.advance(SimTime::from_micros(285_714));
        }
        b.advance(SimTime::from_millis(2000) - b.now());
        assert_eq!(a.counters(), b.counters());
        assert_eq!(a.robot().state(), b.robot().state());
        assert_eq!(a.history(), b.history());
    }

    #[test]
    fn automatic_without_plugin_is_rejected() {
        let mut s = Session::new("alice", LabConfig::default()).unwrap();
        assert!(matches!(s.set_mode(Mode::Automatic), Err(SessionError::NoPlugin(_))));
        assert_eq!(s.mode(), Mode::Manual);
    }

    #[test]
    fn real_backend_is_unsupported() {
        let mut s = Session::new("alice", LabConfig::default()).unwrap();
        assert_eq!(s.set_backend(BackendKind::Real), Err(SessionError::Unsupported(BackendKind::Real)));
        assert!(s.set_backend(BackendKind::Virtual).is_ok());
    }

    #[test]
    fn fresh_snapshot_has_prior_map_and_first_frame() {
        let s = Session::new("alice", LabConfig::default()).unwrap();
        let snap = s.snapshot();
        assert_eq!(snap.tick, 0);
        assert!(snap.estimate_valid);
        assert!((snap.x - START_POSE.x).abs() < 0.02);
        assert_eq!(snap.map.decompress().unwrap().occupied_count(), 0);
    }
}
