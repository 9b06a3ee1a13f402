use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::dead_reckoning::{DeadReckoning, MotionSample, OdometrySource};
use super::ekf::{kalman_predict, kalman_update, FilterError, FilterState, OdometryDelta};
use crate::geometry::Pose2;
use crate::vision::PoseEstimate;

/// Noise levels assumed by the fusion filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionTuning {
    /// Translation noise as a fraction of distance travelled per step.
    pub translation_fraction: f64,
    /// Heading noise (rad) per meter travelled.
    pub heading_per_meter: f64,
    /// Heading noise as a fraction of the rotation per step.
    pub rotation_fraction: f64,
    /// Floor on per-step variance.
    pub min_variance: f64,
    /// Vision fix standard deviations.
    pub fix_sigma_xy: f64,
    pub fix_sigma_theta: f64,
}

impl Default for FusionTuning {
    fn default() -> Self {
        Self {
            translation_fraction: 0.15,
            heading_per_meter: 2.0,
            rotation_fraction: 0.15,
            min_variance: 1e-10,
            fix_sigma_xy: 0.004,
            fix_sigma_theta: 0.02,
        }
    }
}

/// Dead reckoning with and without vision correction, side by side.
#[derive(Clone, Debug)]
pub struct Localizer {
    pub dead_reckoning: DeadReckoning,
    pub filter: FilterState,
    tuning: FusionTuning,
}

impl Localizer {
    pub fn new(source: OdometrySource, start: Pose2, wheel_base: f64, tuning: FusionTuning) -> Self {
        Self {
            dead_reckoning: DeadReckoning::new(source, start, wheel_base),
            filter: FilterState::new(start, Matrix3::identity() * 1e-6),
            tuning,
        }
    }

    pub fn dead_reckoned(&self) -> Pose2 {
        self.dead_reckoning.pose
    }

    pub fn fused(&self) -> Pose2 {
        self.filter.mean
    }

    pub fn predict(&mut self, sample: MotionSample, dt: f64) {
        let before = self.dead_reckoning.pose;
        self.dead_reckoning.step(sample, dt);
        let delta = OdometryDelta::between(&before, &self.dead_reckoning.pose);
        let t = &self.tuning;
        let ds = delta.dx.hypot(delta.dy);
        let var_xy = (t.translation_fraction * ds).powi(2) + t.min_variance;
        let var_th = (t.heading_per_meter * ds + t.rotation_fraction * delta.dtheta.abs()).powi(2) + t.min_variance;
        let q = Matrix3::from_diagonal(&Vector3::new(var_xy, var_xy, var_th));
        self.filter = kalman_predict(&self.filter, &delta, &q);
    }

    /// Applies a vision fix; invalid frames are ignored.
    pub fn correct(&mut self, fix: &PoseEstimate) -> Result<(), FilterError> {
        if !fix.valid {
            return Ok(());
        }
        let t = &self.tuning;
        let r = Matrix3::from_diagonal(&Vector3::new(
            t.fix_sigma_xy.powi(2),
            t.fix_sigma_xy.powi(2),
            t.fix_sigma_theta.powi(2),
        ));
        self.filter = kalman_update(&self.filter, &fix.pose(), &r)?;
        self.filter.t = fix.timestamp;
        Ok(())
    }
}
