use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::world::HiddenWorld;

/// Reading reported when nothing is in range (cm).
pub const MAX_READING_CM: u8 = 255;

/// Cone-shaped ultrasonic ranger mounted at the robot center, facing forward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UltrasonicModel {
    pub cone_half_angle_deg: f64,
    /// Odd number of rays spread evenly across the cone.
    pub ray_count: usize,
    /// m
    pub max_range: f64,
    /// m
    pub noise_sigma: f64,
    pub outlier_probability: f64,
}

impl Default for UltrasonicModel {
    fn default() -> Self {
        Self {
            cone_half_angle_deg: 15.0,
            ray_count: 9,
            max_range: 2.55,
            noise_sigma: 0.01,
            outlier_probability: 0.02,
        }
    }
}

impl UltrasonicModel {
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            outlier_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn cone_half_angle(&self) -> f64 {
        self.cone_half_angle_deg.to_radians()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.ray_count == 0 || self.ray_count % 2 == 0 {
            return Err("sonar.ray_count must be odd".into());
        }
        if !(self.cone_half_angle_deg >= 0.0 && self.cone_half_angle_deg < 90.0) {
            return Err("sonar.cone_half_angle_deg must lie in [0, 90)".into());
        }
        if !(self.max_range > 0.0 && self.max_range <= 2.55) {
            return Err("sonar.max_range must lie in (0, 2.55]".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return Err("sonar.noise_sigma must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.outlier_probability) {
            return Err("sonar.outlier_probability must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Bearings of the individual rays relative to the heading.
    pub fn ray_offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let half = self.cone_half_angle();
        let n = self.ray_count;
        (0..n).map(move |i| {
            if n == 1 {
                0.0
            } else {
                -half + 2.0 * half * i as f64 / (n - 1) as f64
            }
        })
    }

    /// Noise-free distance (m) to the nearest obstacle within the cone, if any
    /// lies within `max_range`.
    pub fn true_range(&self, world: &HiddenWorld, pose: &Pose2) -> Option<f64> {
        self.ray_offsets()
            .filter_map(|off| {
                let (s, c) = (pose.theta + off).sin_cos();
                world.ray_distance((pose.x, pose.y), (c, s))
            })
            .min_by(f64::total_cmp)
            .filter(|&d| d <= self.max_range)
    }

    /// One reading in integer centimeters within [0, 255].
    pub fn measure<R: Rng + ?Sized>(&self, world: &HiddenWorld, pose: &Pose2, rng: &mut R) -> u8 {
        let mut d = self.true_range(world, pose).unwrap_or(self.max_range);
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma).expect("sigma is finite and positive");
            d += normal.sample(rng);
        }
        if self.outlier_probability > 0.0 && rng.random_bool(self.outlier_probability) {
            d = rng.random_range(0.0..=self.max_range);
        }
        let cm = (d.clamp(0.0, self.max_range) * 100.0).round();
        cm.clamp(0.0, MAX_READING_CM as f64) as u8
    }
}
