use serde::{Deserialize, Serialize};

use super::VisionError;

const UNDISTORT_MAX_ITERATIONS: usize = 20;
const UNDISTORT_TOLERANCE: f64 = 1e-10;

/// Downward-looking pinhole camera with two-term radial distortion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    /// Floor point directly below the optical center (m).
    pub mount_x: f64,
    pub mount_y: f64,
    /// Height of the optical center above the floor (m).
    pub mount_height: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 960,
            fx: 700.0,
            fy: 700.0,
            cx: 640.0,
            cy: 480.0,
            k1: -0.25,
            k2: 0.08,
            mount_x: 2.0,
            mount_y: 1.5,
            mount_height: 3.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err("camera.fx and camera.fy must be positive".into());
        }
        if !(self.mount_height > 0.0) {
            return Err("camera.mount_height must be positive".into());
        }
        Ok(())
    }

    fn distortion_factor(&self, r2: f64) -> f64 {
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    /// Floor point to undistorted normalized image coordinates.
    pub fn normalize_floor(&self, floor: (f64, f64)) -> (f64, f64) {
        (
            (floor.0 - self.mount_x) / self.mount_height,
            (floor.1 - self.mount_y) / self.mount_height,
        )
    }

    /// Applies radial distortion to normalized coordinates.
    pub fn distort(&self, n: (f64, f64)) -> (f64, f64) {
        let f = self.distortion_factor(n.0 * n.0 + n.1 * n.1);
        (n.0 * f, n.1 * f)
    }

    pub fn to_pixel(&self, n: (f64, f64)) -> (f64, f64) {
        (self.fx * n.0 + self.cx, self.fy * n.1 + self.cy)
    }

    pub fn from_pixel(&self, p: (f64, f64)) -> (f64, f64) {
        ((p.0 - self.cx) / self.fx, (p.1 - self.cy) / self.fy)
    }

    /// Where a floor point lands on the sensor, lens distortion included.
    pub fn project(&self, floor: (f64, f64)) -> (f64, f64) {
        self.to_pixel(self.distort(self.normalize_floor(floor)))
    }

    /// Pinhole projection without distortion.
    pub fn project_ideal(&self, floor: (f64, f64)) -> (f64, f64) {
        self.to_pixel(self.normalize_floor(floor))
    }

    /// Removes radial distortion from a pixel by fixed-point iteration.
    pub fn undistort(&self, pixel: (f64, f64)) -> Result<(f64, f64), VisionError> {
        let d = self.from_pixel(pixel);
        let mut u = d;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let f = self.distortion_factor(u.0 * u.0 + u.1 * u.1);
            let next = (d.0 / f, d.1 / f);
            let change = (next.0 - u.0).abs().max((next.1 - u.1).abs());
            u = next;
            if change < UNDISTORT_TOLERANCE {
                return Ok(self.to_pixel(u));
            }
        }
        Err(VisionError::UndistortDiverged { pixel })
    }

    pub fn in_image(&self, p: (f64, f64)) -> bool {
        p.0 >= 0.0 && p.1 >= 0.0 && p.0 < self.width as f64 && p.1 < self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{FLOOR_DEPTH, FLOOR_WIDTH};

    #[test]
    fn axial_point_hits_principal_point() {
        let cam = CameraModel { k1: 0.0, k2: 0.0, ..CameraModel::default() };
        assert_eq!(cam.project((2.0, 1.5)), (640.0, 480.0));
        let cam = CameraModel::default();
        assert_eq!(cam.project((2.0, 1.5)), (640.0, 480.0));
        assert_eq!(cam.undistort((640.0, 480.0)).unwrap(), (640.0, 480.0));
    }

    #[test]
    fn floor_corners_land_inside_image() {
        let cam = CameraModel::default();
        for c in [(0.0, 0.0), (FLOOR_WIDTH, 0.0), (FLOOR_WIDTH, FLOOR_DEPTH), (0.0, FLOOR_DEPTH)] {
            assert!(cam.in_image(cam.project(c)), "{c:?}");
        }
    }

    #[test]
    fn distortion_is_barrel_over_the_floor() {
        let cam = CameraModel::default();
        let edge = cam.normalize_floor((0.0, 0.0));
        let r_edge = edge.0.hypot(edge.1);
        for i in 1..=1000 {
            let r = r_edge * i as f64 / 1000.0;
            let rd = r * cam.distortion_factor(r * r);
            assert!(rd / r < 1.0);
        }
    }

    #[test]
    fn distorted_radius_is_monotone_on_the_floor() {
        // injectivity of projection over the floor region
        let cam = CameraModel::default();
        let edge = cam.normalize_floor((0.0, 0.0));
        let r_edge = edge.0.hypot(edge.1) * 1.05;
        let mut last = 0.0;
        for i in 1..=10_000 {
            let r = r_edge * i as f64 / 10_000.0;
            let rd = r * cam.distortion_factor(r * r);
            assert!(rd > last);
            last = rd;
        }
    }

    #[test]
    fn corner_displacement_is_tens_of_pixels() {
        let cam = CameraModel::default();
        let d = cam.project((0.0, 0.0));
        let u = cam.project_ideal((0.0, 0.0));
        let shift = (d.0 - u.0).hypot(d.1 - u.1);
        assert!(shift > 30.0 && shift < 120.0, "{shift}");
    }

    #[test]
    fn no_distortion_means_identity() {
        let cam = CameraModel { k1: 0.0, k2: 0.0, ..CameraModel::default() };
        assert_eq!(cam.undistort((100.0, 900.0)).unwrap(), (100.0, 900.0));
    }

    #[test]
    fn strong_distortion_fails_to_converge() {
        let cam = CameraModel { k1: -2.0, k2: 0.0, ..CameraModel::default() };
        assert!(cam.undistort((1270.0, 950.0)).is_err());
    }
}
