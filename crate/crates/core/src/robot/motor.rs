use serde::{Deserialize, Serialize};

/// Wheel drive nonlinearities. Speeds in m/s, commands normalized to [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorModel {
    /// Wheel speed at full motor power.
    pub v_max: f64,
    /// Share of `v_max` a full command maps to.
    pub speed_fraction: f64,
    /// Commands with a smaller magnitude produce no motion.
    pub dead_zone: f64,
    /// Wheel acceleration limit (m/s²); `inf` disables it.
    pub a_max: f64,
    /// Per-step, per-wheel chance of slipping.
    pub slip_probability: f64,
    /// Displacement multiplier range applied to a slipping wheel.
    pub slip_factor: [f64; 2],
}

impl Default for MotorModel {
    fn default() -> Self {
        Self {
            v_max: 0.3,
            speed_fraction: 0.3,
            dead_zone: 0.08,
            a_max: 0.5,
            slip_probability: 0.02,
            slip_factor: [0.6, 0.95],
        }
    }
}

impl MotorModel {
    /// Motors with no dead zone, acceleration limit or slip.
    pub fn ideal() -> Self {
        Self {
            dead_zone: 0.0,
            a_max: f64::INFINITY,
            slip_probability: 0.0,
            ..Self::default()
        }
    }

    /// Largest wheel speed any command can produce.
    pub fn speed_cap(&self) -> f64 {
        self.speed_fraction * self.v_max
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_max > 0.0) {
            return Err("motor.v_max must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.speed_fraction) {
            return Err("motor.speed_fraction must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.dead_zone) {
            return Err("motor.dead_zone must lie in [0, 1)".into());
        }
        if !(self.a_max > 0.0) {
            return Err("motor.a_max must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.slip_probability) {
            return Err("motor.slip_probability must lie in [0, 1]".into());
        }
        let [lo, hi] = self.slip_factor;
        if !(0.0 <= lo && lo <= hi) {
            return Err("motor.slip_factor must be an ordered non-negative pair".into());
        }
        Ok(())
    }

    /// Target speed for a normalized command, after clamping and the dead zone.
    pub fn target_speed(&self, u: f64) -> f64 {
        let u = clamp_command(u);
        if u.abs() < self.dead_zone {
            0.0
        } else {
            self.speed_fraction * u * self.v_max
        }
    }

    /// Moves `speed` toward the command's target, limited to `a_max * dt`.
    pub fn apply(&self, u: f64, speed: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        if u.abs() > 1.0 {
            log::debug!("motor command {u} clamped to [-1, 1]");
        }
        let target = self.target_speed(u);
        let step = self.a_max * dt;
        speed + (target - speed).clamp(-step, step)
    }
}

/// Clamps a command into [-1, 1]; non-finite values become 0.
pub fn clamp_command(u: f64) -> f64 {
    if u.is_finite() {
        u.clamp(-1.0, 1.0)
    } else {
        0.0
    }
}
