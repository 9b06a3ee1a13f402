use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::robot::{kinematics, StepReport};

/// Which onboard sensors drive the integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdometrySource {
    Encoders,
    Inertial,
}

/// One reading from the motion sensors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotionSample {
    /// Wheel surface speeds (m/s).
    Encoders { v_left: f64, v_right: f64 },
    /// Forward acceleration (m/s²) and yaw rate (rad/s).
    Inertial { forward_accel: f64, yaw_rate: f64 },
}

/// Noise applied when turning true motion into sensor samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdometryNoise {
    /// m/s per wheel
    pub encoder_sigma: f64,
    /// rad/s
    pub gyro_sigma: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s²
    pub accel_sigma: f64,
    /// m/s²
    pub accel_bias: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            encoder_sigma: 0.002,
            gyro_sigma: 0.01,
            gyro_bias: 0.002,
            accel_sigma: 0.02,
            accel_bias: 0.005,
        }
    }
}

impl OdometryNoise {
    pub fn none() -> Self {
        Self {
            encoder_sigma: 0.0,
            gyro_sigma: 0.0,
            gyro_bias: 0.0,
            accel_sigma: 0.0,
            accel_bias: 0.0,
        }
    }

    /// Sensor sample for one simulator step.
    pub fn sample<R: Rng + ?Sized>(&self, source: OdometrySource, step: &StepReport, rng: &mut R) -> MotionSample {
        let mut gauss = |sigma: f64| {
            if sigma > 0.0 {
                Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
            } else {
                0.0
            }
        };
        match source {
            OdometrySource::Encoders => MotionSample::Encoders {
                v_left: step.encoder.0 + gauss(self.encoder_sigma),
                v_right: step.encoder.1 + gauss(self.encoder_sigma),
            },
            OdometrySource::Inertial => MotionSample::Inertial {
                forward_accel: step.forward_accel + self.accel_bias + gauss(self.accel_sigma),
                yaw_rate: step.yaw_rate + self.gyro_bias + gauss(self.gyro_sigma),
            },
        }
    }
}

/// Pose integration from motion sensors alone.
#[derive(Clone, Debug, PartialEq)]
pub struct DeadReckoning {
    pub source: OdometrySource,
    pub pose: Pose2,
    pub wheel_base: f64,
    /// Integrated forward speed (inertial source only).
    pub forward_speed: f64,
}

impl DeadReckoning {
    pub fn new(source: OdometrySource, start: Pose2, wheel_base: f64) -> Self {
        Self { source, pose: start, wheel_base, forward_speed: 0.0 }
    }

    /// Integrates one sample through the simulator's unicycle equations.
    pub fn step(&mut self, sample: MotionSample, dt: f64) {
        debug_assert!(dt > 0.0);
        let (v_left, v_right) = match sample {
            MotionSample::Encoders { v_left, v_right } => (v_left, v_right),
            MotionSample::Inertial { forward_accel, yaw_rate } => {
                self.forward_speed += forward_accel * dt;
                let half = 0.5 * yaw_rate * self.wheel_base;
                (self.forward_speed - half, self.forward_speed + half)
            }
        };
        self.pose = kinematics::integrate(self.pose, v_left, v_right, self.wheel_base, dt);
    }
}
