//! Planar pose and angle helpers shared by the simulator and the estimators.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

/// Position on the floor (m) and heading (rad).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// Maps a point given in the robot frame onto the floor frame.
    pub fn transform_point(&self, local: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            self.x + c * local.0 - s * local.1,
            self.y + s * local.0 + c * local.1,
        )
    }

    pub fn distance_to(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.25 + TAU) - 0.25).abs() < 1e-12);
        for i in -1000..1000 {
            let a = wrap_angle(i as f64 * 0.37);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn transform_point_rotates_then_translates() {
        let p = Pose2::new(1.0, 2.0, PI / 2.0);
        let (x, y) = p.transform_point((0.1, 0.0));
        assert!((x - 1.0).abs() < 1e-12);
        assert!((y - 2.1).abs() < 1e-12);
    }
}
