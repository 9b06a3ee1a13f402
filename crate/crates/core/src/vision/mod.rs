//! Overhead-camera localization: a forward camera model that synthesizes the
//! LED centroids a real frame grabber would deliver, and the estimation
//! pipeline that turns them back into pose and velocity (undistort, map to
//! the floor through a calibrated homography, solve the LED triangle,
//! difference consecutive frames).

mod camera;
mod homography;
mod pose;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::CameraModel;
pub use homography::{solve_homography, Homography, HomographyFit};
pub use pose::{estimate_pose, find_apex, finite_diff_velocities, pose_from_floor_points, LedTriangle, PoseEstimate};

use crate::clock::SimTime;
use crate::geometry::Pose2;
use crate::world::{FLOOR_DEPTH, FLOOR_WIDTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("undistortion did not converge for pixel {pixel:?}")]
    UndistortDiverged { pixel: (f64, f64) },
    #[error("need at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate calibration geometry")]
    DegenerateCalibration,
    #[error("expected 3 LEDs, got {0}")]
    WrongLedCount(usize),
    #[error("LED triangle failed the side-ratio test")]
    BadTriangle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisionConfig {
    pub camera: CameraModel,
    pub leds: LedTriangle,
    /// Gaussian noise on each LED centroid (px).
    pub pixel_noise_sigma: f64,
    pub frame_period_ms: u64,
    /// Allowed relative deviation of the side ratios from the LED layout.
    pub ratio_tolerance: f64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            leds: LedTriangle::default(),
            pixel_noise_sigma: 0.5,
            frame_period_ms: 59,
            ratio_tolerance: 0.2,
        }
    }
}

impl VisionConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.camera.validate()?;
        self.leds.validate()?;
        if !(self.pixel_noise_sigma >= 0.0) {
            return Err("vision.pixel_noise_sigma must be non-negative".into());
        }
        if self.frame_period_ms == 0 {
            return Err("vision.frame_period_ms must be positive".into());
        }
        Ok(())
    }
}

/// Image-to-floor homography fitted on the built-in reference markers.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub fit: HomographyFit,
    pub markers: Vec<(f64, f64)>,
}

impl Calibration {
    /// Reference markers: the four floor corners and the floor center.
    pub fn reference_markers() -> Vec<(f64, f64)> {
        vec![
            (0.0, 0.0),
            (FLOOR_WIDTH, 0.0),
            (FLOOR_WIDTH, FLOOR_DEPTH),
            (0.0, FLOOR_DEPTH),
            (0.5 * FLOOR_WIDTH, 0.5 * FLOOR_DEPTH),
        ]
    }

    pub fn run(camera: &CameraModel) -> Result<Self, VisionError> {
        let markers = Self::reference_markers();
        let mut pairs = Vec::with_capacity(markers.len());
        for &m in &markers {
            pairs.push((camera.undistort(camera.project(m))?, m));
        }
        Ok(Self { fit: solve_homography(&pairs)?, markers })
    }

    pub fn image_to_floor(&self) -> &Homography {
        &self.fit.homography
    }

    /// Text dump of the matrix and per-marker residuals.
    pub fn dump(&self) -> String {
        let m = &self.fit.homography.matrix;
        let mut s = String::from("# image-to-floor homography (row-major)\n");
        for r in 0..3 {
            s.push_str(&format!("{:.15e} {:.15e} {:.15e}\n", m[(r, 0)], m[(r, 1)], m[(r, 2)]));
        }
        s.push_str("# marker_x marker_y residual_m\n");
        for (mk, res) in self.markers.iter().zip(&self.fit.residuals) {
            s.push_str(&format!("{:.4} {:.4} {:.3e}\n", mk.0, mk.1, res));
        }
        s.push_str(&format!("# rms {:.3e}\n", self.fit.rms_residual()));
        s
    }
}

/// Frame-by-frame localization with a previous-estimate register.
#[derive(Clone, Debug)]
pub struct VisionPipeline {
    config: VisionConfig,
    calibration: Calibration,
    last: Option<PoseEstimate>,
}

impl VisionPipeline {
    pub fn new(config: VisionConfig) -> Result<Self, VisionError> {
        let calibration = Calibration::run(&config.camera)?;
        Ok(Self { config, calibration, last: None })
    }

    pub fn config(&self) -> &VisionConfig {
        &self.config
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn frame_period(&self) -> SimTime {
        SimTime::from_millis(self.config.frame_period_ms)
    }

    pub fn last_estimate(&self) -> Option<&PoseEstimate> {
        self.last.as_ref()
    }

    /// Distorted LED centroids for a true pose, with pixel noise.
    pub fn synthesize_leds<R: Rng + ?Sized>(&self, pose: &Pose2, rng: &mut R) -> [(f64, f64); 3] {
        let cam = &self.config.camera;
        let sigma = self.config.pixel_noise_sigma;
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        self.config.leds.leds().map(|led| {
            let (u, v) = cam.project(pose.transform_point(led));
            match &noise {
                Some(n) => (u + n.sample(rng), v + n.sample(rng)),
                None => (u, v),
            }
        })
    }

    /// Runs the estimator on one frame's pixels. Invalid frames keep the
    /// previous pose and velocities with `valid = false`.
    pub fn process(&mut self, pixels: &[(f64, f64)], t: SimTime) -> PoseEstimate {
        let result = estimate_pose(
            pixels,
            &self.config.camera,
            self.calibration.image_to_floor(),
            &self.config.leds,
            self.config.ratio_tolerance,
        );
        let prev = self.last;
        let est = match result {
            Ok(pose) => {
                let mut e = PoseEstimate {
                    x: pose.x,
                    y: pose.y,
                    theta: pose.theta,
                    timestamp: t,
                    valid: true,
                    ..Default::default()
                };
                if let Some(p) = prev {
                    match finite_diff_velocities(&p, &e) {
                        Some((vx, vy, w)) => (e.vx, e.vy, e.omega) = (vx, vy, w),
                        None => (e.vx, e.vy, e.omega) = (p.vx, p.vy, p.omega),
                    }
                }
                e
            }
            Err(err) => {
                log::debug!("vision frame at {t} rejected: {err}");
                PoseEstimate {
                    timestamp: t,
                    valid: false,
                    ..prev.unwrap_or_default()
                }
            }
        };
        self.last = Some(est);
        est
    }

    /// One camera frame at `t`: synthesize, then estimate.
    pub fn tick<R: Rng + ?Sized>(&mut self, truth: &Pose2, rng: &mut R, t: SimTime) -> PoseEstimate {
        debug_assert!(t.is_multiple_of(self.frame_period()) || t == SimTime::ZERO);
        let pixels = self.synthesize_leds(truth, rng);
        self.process(&pixels, t)
    }
}
