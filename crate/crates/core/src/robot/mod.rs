//! Differential-drive robot simulator with the defects a real vehicle shows:
//! motor dead zone and acceleration limit, wheel slip, noisy ranging with
//! outliers, lost commands and 250 ms link delays.

mod delay;
pub mod kinematics;
mod motor;
mod sonar;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use delay::DelayLine;
pub use motor::{clamp_command, MotorModel};
pub use sonar::{UltrasonicModel, MAX_READING_CM};

use crate::clock::SimTime;
use crate::geometry::{wrap_angle, Pose2};
use crate::world::{HiddenWorld, FLOOR_DEPTH, FLOOR_WIDTH};

/// Normalized wheel command pair `(u_left, u_right)`, each in [-1, 1].
pub type Command = (f64, f64);

/// Tunables of the vehicle and its radio link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    pub motor: MotorModel,
    pub sonar: UltrasonicModel,
    /// m
    pub wheel_base: f64,
    pub battery_start_mv: f64,
    /// Battery drain per meter travelled by each wheel.
    pub battery_drain_mv_per_m: f64,
    /// Probability that a command never reaches the robot.
    pub command_loss: f64,
    pub command_delay_ms: u64,
    pub range_delay_ms: u64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            motor: MotorModel::default(),
            sonar: UltrasonicModel::default(),
            wheel_base: 0.12,
            battery_start_mv: 8200.0,
            battery_drain_mv_per_m: 5.0,
            command_loss: 0.02,
            command_delay_ms: 250,
            range_delay_ms: 250,
        }
    }
}

impl RobotParams {
    /// Every defect disabled: no dead zone, acceleration limit, slip, noise,
    /// loss or delay.
    pub fn ideal() -> Self {
        Self {
            motor: MotorModel::ideal(),
            sonar: UltrasonicModel::noiseless(),
            command_loss: 0.0,
            command_delay_ms: 0,
            range_delay_ms: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.motor.validate()?;
        self.sonar.validate()?;
        if !(self.wheel_base > 0.0) {
            return Err("robot.wheel_base must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.command_loss) {
            return Err("robot.command_loss must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Ground truth of the simulated vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// rad, in (-π, π]
    pub theta: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub battery_mv: f64,
    pub t: SimTime,
}

impl RobotState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

/// What onboard sensors could observe during one physics step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Wheel surface speeds as the encoders see them (slip is invisible).
    pub encoder: (f64, f64),
    /// Actual yaw rate (rad/s).
    pub yaw_rate: f64,
    /// Actual forward acceleration (m/s²).
    pub forward_accel: f64,
    pub slipped: bool,
}

/// Returns true when a command should be lost in transit.
pub fn drop_command<R: Rng + ?Sized>(rng: &mut R, loss_probability: f64) -> bool {
    let p = loss_probability.clamp(0.0, 1.0);
    if p == 0.0 {
        return false;
    }
    rng.random_bool(p)
}

/// The simulated vehicle together with its delayed command and range links.
#[derive(Clone, Debug)]
pub struct Robot {
    params: RobotParams,
    state: RobotState,
    commands: DelayLine<Command>,
    ranges: DelayLine<u8>,
    last_forward_speed: f64,
}

impl Robot {
    pub fn new(params: RobotParams, start: Pose2) -> Self {
        let state = RobotState {
            x: start.x,
            y: start.y,
            theta: wrap_angle(start.theta),
            v_left: 0.0,
            v_right: 0.0,
            battery_mv: params.battery_start_mv,
            t: SimTime::ZERO,
        };
        Self {
            commands: DelayLine::new(SimTime::from_millis(params.command_delay_ms), (0.0, 0.0)),
            ranges: DelayLine::new(SimTime::from_millis(params.range_delay_ms), MAX_READING_CM),
            params,
            state,
            last_forward_speed: 0.0,
        }
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    /// Sends a command over the lossy link. Returns false if it was lost, in
    /// which case the previous command stays in force.
    pub fn send_command<R: Rng + ?Sized>(&mut self, at: SimTime, cmd: Command, rng: &mut R) -> bool {
        if drop_command(rng, self.params.command_loss) {
            return false;
        }
        self.send_command_reliable(at, cmd);
        true
    }

    /// Queues a command that bypasses the loss model (safety stops).
    pub fn send_command_reliable(&mut self, at: SimTime, cmd: Command) {
        self.commands.push(at, (clamp_command(cmd.0), clamp_command(cmd.1)));
    }

    /// Range reading (cm) as delivered by the delayed link at `now`.
    pub fn delayed_range(&mut self, now: SimTime) -> u8 {
        self.ranges.value_at(now)
    }

    /// Takes a range reading at the current pose and queues it on the link.
    pub fn sample_range<R: Rng + ?Sized>(&mut self, world: &HiddenWorld, rng: &mut R) {
        let d = self.params.sonar.measure(world, &self.state.pose(), rng);
        self.ranges.push(self.state.t, d);
    }

    /// Advances the truth by `dt`, using the command visible at the start of
    /// the step, then samples the ranger at the new pose.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: SimTime, world: &HiddenWorld, rng: &mut R) -> StepReport {
        let dt_s = dt.as_secs_f64();
        let (u_left, u_right) = self.commands.value_at(self.state.t);
        let motor = &self.params.motor;
        let v_left = motor.apply(u_left, self.state.v_left, dt_s);
        let v_right = motor.apply(u_right, self.state.v_right, dt_s);

        let mut slipped = false;
        let mut slip = |v: f64, rng: &mut R| {
            if motor.slip_probability > 0.0 && rng.random_bool(motor.slip_probability) {
                slipped = true;
                let [lo, hi] = motor.slip_factor;
                v * if hi > lo { rng.random_range(lo..=hi) } else { lo }
            } else {
                v
            }
        };
        let eff_left = slip(v_left, rng);
        let eff_right = slip(v_right, rng);

        let before = self.state.pose();
        let mut pose = kinematics::integrate(before, eff_left, eff_right, self.params.wheel_base, dt_s);
        let (mut v_left, mut v_right) = (v_left, v_right);
        let max_x = FLOOR_WIDTH - 1e-9;
        let max_y = FLOOR_DEPTH - 1e-9;
        if pose.x < 0.0 || pose.x > max_x || pose.y < 0.0 || pose.y > max_y {
            pose.x = pose.x.clamp(0.0, max_x);
            pose.y = pose.y.clamp(0.0, max_y);
            v_left = 0.0;
            v_right = 0.0;
        }

        let forward = 0.5 * (eff_left + eff_right);
        let report = StepReport {
            encoder: (v_left, v_right),
            yaw_rate: wrap_angle(pose.theta - before.theta) / dt_s,
            forward_accel: (forward - self.last_forward_speed) / dt_s,
            slipped,
        };
        self.last_forward_speed = forward;

        let travelled = (eff_left.abs() + eff_right.abs()) * dt_s;
        self.state = RobotState {
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            v_left,
            v_right,
            battery_mv: (self.state.battery_mv - self.params.battery_drain_mv_per_m * travelled).max(0.0),
            t: self.state.t + dt,
        };
        self.sample_range(world, rng);
        report
    }

    /// Zeroes everything in flight on the command link.
    pub fn halt(&mut self, at: SimTime) {
        self.send_command_reliable(at, (0.0, 0.0));
    }
}
