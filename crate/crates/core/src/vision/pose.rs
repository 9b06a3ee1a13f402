use serde::{Deserialize, Serialize};

use super::{CameraModel, Homography, VisionError};
use crate::clock::SimTime;
use crate::geometry::{wrap_angle, Pose2};

/// LED positions in the robot frame (m). The apex is the vertex whose two
/// incident sides are equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LedTriangle {
    pub apex: (f64, f64),
    pub base_left: (f64, f64),
    pub base_right: (f64, f64),
}

impl Default for LedTriangle {
    fn default() -> Self {
        Self {
            apex: (0.10, 0.0),
            base_left: (-0.06, 0.05),
            base_right: (-0.06, -0.05),
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

impl LedTriangle {
    pub fn leds(&self) -> [(f64, f64); 3] {
        [self.apex, self.base_left, self.base_right]
    }

    pub fn base_length(&self) -> f64 {
        dist(self.base_left, self.base_right)
    }

    /// Apex-to-base-vertex side over base side.
    pub fn leg_ratio(&self) -> f64 {
        0.5 * (dist(self.apex, self.base_left) + dist(self.apex, self.base_right)) / self.base_length()
    }

    pub fn validate(&self) -> Result<(), String> {
        let l1 = dist(self.apex, self.base_left);
        let l2 = dist(self.apex, self.base_right);
        if (l1 - l2).abs() > 1e-9 * l1.max(l2) {
            return Err("leds: apex sides must be equal".into());
        }
        if self.leg_ratio() < 1.5 {
            return Err("leds: apex side over base must be at least 1.5".into());
        }
        Ok(())
    }

    /// Heading of the apex as seen from the base midpoint, robot frame.
    fn axis_angle(&self) -> f64 {
        let mid = midpoint(self.base_left, self.base_right);
        (self.apex.1 - mid.1).atan2(self.apex.0 - mid.0)
    }

    fn centroid(&self) -> (f64, f64) {
        centroid(&self.leds())
    }
}

fn midpoint(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
}

fn centroid(p: &[(f64, f64); 3]) -> (f64, f64) {
    ((p[0].0 + p[1].0 + p[2].0) / 3.0, (p[0].1 + p[1].1 + p[2].1) / 3.0)
}

/// Vision-derived pose and velocities as exported to controllers and clients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub timestamp: SimTime,
    pub valid: bool,
}

impl PoseEstimate {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

/// Index of the vertex whose two incident sides differ least.
pub fn find_apex(points: &[(f64, f64); 3]) -> usize {
    let d01 = dist(points[0], points[1]);
    let d12 = dist(points[1], points[2]);
    let d20 = dist(points[2], points[0]);
    let diffs = [(d01 - d20).abs(), (d01 - d12).abs(), (d12 - d20).abs()];
    let mut best = 0;
    for i in 1..3 {
        if diffs[i] < diffs[best] {
            best = i;
        }
    }
    best
}

/// Recovers the robot pose from floor positions of its three LEDs, in any order.
pub fn pose_from_floor_points(
    points: &[(f64, f64); 3],
    triangle: &LedTriangle,
    ratio_tolerance: f64,
) -> Result<Pose2, VisionError> {
    let apex_idx = find_apex(points);
    let apex = points[apex_idx];
    let b1 = points[(apex_idx + 1) % 3];
    let b2 = points[(apex_idx + 2) % 3];
    let base = dist(b1, b2);
    if base < 1e-9 {
        return Err(VisionError::BadTriangle);
    }
    let expected = triangle.leg_ratio();
    for leg in [dist(apex, b1), dist(apex, b2)] {
        if ((leg / base) / expected - 1.0).abs() > ratio_tolerance {
            return Err(VisionError::BadTriangle);
        }
    }
    let mid = midpoint(b1, b2);
    let theta = wrap_angle((apex.1 - mid.1).atan2(apex.0 - mid.0) - triangle.axis_angle());
    let c_floor = centroid(points);
    let heading = Pose2::new(0.0, 0.0, theta);
    let c_local = heading.transform_point(triangle.centroid());
    Ok(Pose2::new(c_floor.0 - c_local.0, c_floor.1 - c_local.1, theta))
}

/// Full pipeline from three unlabeled distorted pixels to a pose.
pub fn estimate_pose(
    pixels: &[(f64, f64)],
    camera: &CameraModel,
    image_to_floor: &Homography,
    triangle: &LedTriangle,
    ratio_tolerance: f64,
) -> Result<Pose2, VisionError> {
    if pixels.len() != 3 {
        return Err(VisionError::WrongLedCount(pixels.len()));
    }
    let mut floor = [(0.0, 0.0); 3];
    for (slot, px) in floor.iter_mut().zip(pixels) {
        *slot = image_to_floor.apply(camera.undistort(*px)?);
    }
    pose_from_floor_points(&floor, triangle, ratio_tolerance)
}

/// `(vx, vy, ω)` by finite differences, or `None` when either estimate is
/// invalid or time does not advance.
pub fn finite_diff_velocities(prev: &PoseEstimate, cur: &PoseEstimate) -> Option<(f64, f64, f64)> {
    if !prev.valid || !cur.valid || cur.timestamp <= prev.timestamp {
        return None;
    }
    let dt = (cur.timestamp - prev.timestamp).as_secs_f64();
    Some((
        (cur.x - prev.x) / dt,
        (cur.y - prev.y) / dt,
        wrap_angle(cur.theta - prev.theta) / dt,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn leds_on_floor(pose: Pose2) -> [(f64, f64); 3] {
        LedTriangle::default().leds().map(|l| pose.transform_point(l))
    }

    #[test]
    fn default_triangle_is_valid_isosceles() {
        let t = LedTriangle::default();
        t.validate().unwrap();
        assert!(t.leg_ratio() >= 1.5);
    }

    #[test]
    fn apex_is_permutation_invariant() {
        let pts = leds_on_floor(Pose2::new(1.0, 1.0, 0.7));
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let shuffled = [pts[p[0]], pts[p[1]], pts[p[2]]];
            assert_eq!(shuffled[find_apex(&shuffled)], pts[0]);
            let pose = pose_from_floor_points(&shuffled, &LedTriangle::default(), 0.2).unwrap();
            assert!((pose.theta - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_pose_from_exact_points() {
        for theta in [-3.0, -1.0, 0.0, 0.5, 2.0, PI] {
            let truth = Pose2::new(1.3, 2.2, theta);
            let pose = pose_from_floor_points(&leds_on_floor(truth), &LedTriangle::default(), 0.2).unwrap();
            assert!(pose.distance_to(&truth) < 1e-12);
            assert!(wrap_angle(pose.theta - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn equilateral_blob_fails_ratio_test() {
        let pts = [(0.0, 0.0), (0.1, 0.0), (0.05, 0.0866)];
        assert_eq!(
            pose_from_floor_points(&pts, &LedTriangle::default(), 0.2),
            Err(VisionError::BadTriangle)
        );
    }

    #[test]
    fn wrong_led_count() {
        let cam = CameraModel::default();
        let err = estimate_pose(&[(1.0, 1.0)], &cam, &Homography::identity(), &LedTriangle::default(), 0.2);
        assert_eq!(err, Err(VisionError::WrongLedCount(1)));
    }

    fn est(x: f64, theta: f64, ms: u64) -> PoseEstimate {
        PoseEstimate { x, theta, timestamp: SimTime::from_millis(ms), valid: true, ..Default::default() }
    }

    #[test]
    fn velocities_by_finite_difference() {
        assert_eq!(finite_diff_velocities(&est(1.0, 0.0, 0), &est(1.0, 0.0, 59)), Some((0.0, 0.0, 0.0)));
        let (vx, _, _) = finite_diff_velocities(&est(0.0, 0.0, 0), &est(0.01, 0.0, 59)).unwrap();
        assert!((vx - 0.01 / 0.059).abs() < 1e-12);
        assert!((vx - 0.169_491_525_423_728_8).abs() < 1e-12);
    }

    #[test]
    fn angular_velocity_is_wrap_aware() {
        let (_, _, w) = finite_diff_velocities(&est(0.0, 3.1, 0), &est(0.0, -3.1, 59)).unwrap();
        let expected = (2.0 * PI - 6.2) / 0.059;
        assert!(w > 0.0);
        assert!((w - expected).abs() < 1e-9, "{w}");
    }

    #[test]
    fn invalid_neighbor_gives_nothing() {
        let mut bad = est(0.0, 0.0, 59);
        bad.valid = false;
        assert_eq!(finite_diff_velocities(&est(0.0, 0.0, 0), &bad), None);
        assert_eq!(finite_diff_velocities(&est(0.0, 0.0, 59), &est(0.0, 0.0, 59)), None);
    }
}
