//! Reference controller for the `example` user: a stop-and-scan lawn-mower
//! sweep. The robot drives a serpentine over fixed waypoints and at each one
//! turns in place in short pulses, taking a sonar reading whenever it has
//! been standing still long enough for the delayed range to match its pose.

use std::f64::consts::TAU;

use super::inverse_model::InverseSonarModel;
use crate::geometry::{wrap_angle, Pose2};
use crate::plugin::{CellUpdate, Controller, Observation};
use crate::robot::MAX_READING_CM;
use crate::world::{cell_of, OccupancyGrid};

/// Zero commands needed before a reading is trusted: command delay,
/// stopping time and range delay all have to pass.
const SETTLE_TICKS: u32 = 4;
const TURN_TICKS: u32 = 3;
const TURN_SPEED: f64 = 0.5;
const ALIGN_TOLERANCE: f64 = 0.12;
const ARRIVE_RADIUS: f64 = 0.06;
const HEADING_GAIN: f64 = 0.8;
const DRIVE_TIMEOUT_TICKS: u32 = 250;
/// Rotation covered by one scan, leaving out the last cone width.
const SCAN_SPAN: f64 = TAU - 0.3;

const WAYPOINTS: [(f64, f64); 6] = [(0.6, 0.7), (2.0, 0.7), (3.4, 0.7), (3.4, 2.3), (2.0, 2.3), (0.6, 2.3)];

#[derive(Clone, Debug, PartialEq)]
enum Phase {
    /// Standing still, waiting for a reading.
    Scan { rotated: f64, last_heading: Option<f64> },
    /// Turning in place for `left` more ticks, then scanning or aligning.
    Turn { left: u32, sign: f64, then_scan: Option<(f64, f64)> },
    /// Stopped, re-checking the bearing to the next waypoint.
    Align,
    Drive { ticks: u32 },
    Done,
}

#[derive(Clone, Debug)]
pub struct ExampleController {
    model: InverseSonarModel,
    waypoints: Vec<(f64, f64)>,
    next: usize,
    phase: Phase,
    zero_streak: u32,
    measured: bool,
    origin: (f64, f64),
}

impl Default for ExampleController {
    fn default() -> Self {
        Self::new(WAYPOINTS.to_vec())
    }
}

impl ExampleController {
    pub fn new(waypoints: Vec<(f64, f64)>) -> Self {
        Self {
            model: InverseSonarModel::default(),
            waypoints,
            next: 0,
            phase: Phase::Align,
            zero_streak: SETTLE_TICKS,
            measured: false,
            origin: (0.0, 0.0),
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn settled(&self) -> bool {
        self.zero_streak >= SETTLE_TICKS
    }

    fn stop(&mut self) -> (f64, f64) {
        self.zero_streak += 1;
        (0.0, 0.0)
    }

    fn go(&mut self, u: (f64, f64)) -> (f64, f64) {
        self.zero_streak = 0;
        u
    }

    fn advance_waypoint(&mut self, grid: &OccupancyGrid) {
        self.next += 1;
        while let Some(&(x, y)) = self.waypoints.get(self.next) {
            let blocked = cell_of(x, y).map(|(r, c)| grid.probability(r, c) > 0.5).unwrap_or(true);
            if !blocked {
                break;
            }
            log::debug!("example: skipping blocked waypoint ({x}, {y})");
            self.next += 1;
        }
        self.phase = if self.next < self.waypoints.len() { Phase::Align } else { Phase::Done };
    }

    fn scan_step(&mut self, grid: &OccupancyGrid, obs: &Observation, rotated: f64, last: Option<f64>) -> (f64, f64) {
        if !self.measured {
            self.phase = Phase::Scan { rotated, last_heading: last };
            return self.stop();
        }
        self.measured = false;
        let rotated = rotated + last.map_or(0.0, |h| wrap_angle(obs.th - h).abs());
        if rotated >= SCAN_SPAN {
            self.advance_waypoint(grid);
            return self.control_step(grid, obs);
        }
        self.phase = Phase::Turn { left: TURN_TICKS, sign: 1.0, then_scan: Some((rotated, obs.th)) };
        self.turn_tick(grid, obs)
    }

    fn turn_tick(&mut self, grid: &OccupancyGrid, obs: &Observation) -> (f64, f64) {
        let Phase::Turn { left, sign, then_scan } = self.phase.clone() else { unreachable!() };
        if left == 0 {
            self.phase = match then_scan {
                Some((rotated, heading)) => Phase::Scan { rotated, last_heading: Some(heading) },
                None => Phase::Align,
            };
            return self.control_step(grid, obs);
        }
        self.phase = Phase::Turn { left: left - 1, sign, then_scan };
        self.go((-sign * TURN_SPEED, sign * TURN_SPEED))
    }

    fn control_step(&mut self, grid: &OccupancyGrid, obs: &Observation) -> (f64, f64) {
        match self.phase.clone() {
            Phase::Done => self.stop(),
            Phase::Scan { rotated, last_heading } => self.scan_step(grid, obs, rotated, last_heading),
            Phase::Turn { .. } => self.turn_tick(grid, obs),
            Phase::Align => {
                if !self.settled() {
                    return self.stop();
                }
                let (tx, ty) = self.waypoints[self.next];
                if (tx - obs.x).hypot(ty - obs.y) < ARRIVE_RADIUS {
                    self.phase = Phase::Scan { rotated: 0.0, last_heading: None };
                    return self.stop();
                }
                let err = wrap_angle((ty - obs.y).atan2(tx - obs.x) - obs.th);
                if err.abs() > ALIGN_TOLERANCE {
                    // about 0.15 rad per tick at TURN_SPEED
                    let ticks = ((err.abs() / 0.15).round() as u32).clamp(1, 4);
                    self.phase = Phase::Turn { left: ticks, sign: err.signum(), then_scan: None };
                    return self.turn_tick(grid, obs);
                }
                self.origin = (obs.x, obs.y);
                self.phase = Phase::Drive { ticks: 0 };
                self.control_step(grid, obs)
            }
            Phase::Drive { ticks } => {
                let (tx, ty) = self.waypoints[self.next];
                let (dx, dy) = (tx - obs.x, ty - obs.y);
                let dist = dx.hypot(dy);
                let (px, py) = (tx - self.origin.0, ty - self.origin.1);
                let passed = dx * px + dy * py < 0.0;
                if dist < ARRIVE_RADIUS || passed || ticks >= DRIVE_TIMEOUT_TICKS {
                    self.phase = Phase::Scan { rotated: 0.0, last_heading: None };
                    return self.stop();
                }
                let err = wrap_angle(dy.atan2(dx) - obs.th);
                let base = if dist > 0.25 { 1.0 } else { 0.5 };
                let k = (HEADING_GAIN * err).clamp(-0.5, 0.5);
                self.phase = Phase::Drive { ticks: ticks + 1 };
                self.go(((base - k).clamp(-1.0, 1.0), (base + k).clamp(-1.0, 1.0)))
            }
        }
    }
}

impl Controller for ExampleController {
    fn compute_world(&mut self, grid: &OccupancyGrid, obs: &Observation) -> Result<Vec<CellUpdate>, String> {
        let waiting = matches!(self.phase, Phase::Scan { .. });
        if !waiting || !self.settled() || self.measured {
            return Ok(Vec::new());
        }
        self.measured = true;
        let d = obs.d.round().clamp(0.0, MAX_READING_CM as f64) as u8;
        let pose = Pose2::new(obs.x, obs.y, obs.th);
        let mut delta = Vec::new();
        self.model.for_each_increment(&pose, d, |row, col, inc| {
            delta.push(CellUpdate { row, col, value: grid.get(row, col) + inc });
        });
        Ok(delta)
    }

    fn control(&mut self, grid: &OccupancyGrid, obs: &Observation) -> Result<(f64, f64), String> {
        Ok(self.control_step(grid, obs))
    }
}
