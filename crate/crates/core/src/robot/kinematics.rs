//! Differential-drive (unicycle) kinematics.

use crate::geometry::{wrap_angle, Pose2};

/// Integrates constant wheel speeds over `dt` along the exact arc.
///
/// `v = (vL + vR) / 2`, `ω = (vR − vL) / L`. Straight motion reduces to
/// `x += v cosθ dt`, `y += v sinθ dt`.
pub fn integrate(pose: Pose2, v_left: f64, v_right: f64, wheel_base: f64, dt: f64) -> Pose2 {
    let v = 0.5 * (v_left + v_right);
    let omega = (v_right - v_left) / wheel_base;
    let dtheta = omega * dt;
    let (dx, dy) = if dtheta.abs() < 1e-9 {
        // second-order expansion of the arc for tiny turns
        let mid = pose.theta + 0.5 * dtheta;
        (v * dt * mid.cos(), v * dt * mid.sin())
    } else {
        let r = v / omega;
        let th1 = pose.theta + dtheta;
        (r * (th1.sin() - pose.theta.sin()), -r * (th1.cos() - pose.theta.cos()))
    };
    Pose2::new(pose.x + dx, pose.y + dy, wrap_angle(pose.theta + dtheta))
}

/// Pose after `t` seconds of constant wheel speeds, from the closed-form solution.
pub fn closed_form(start: Pose2, v_left: f64, v_right: f64, wheel_base: f64, t: f64) -> Pose2 {
    let v = 0.5 * (v_left + v_right);
    let omega = (v_right - v_left) / wheel_base;
    if omega == 0.0 {
        let (s, c) = start.theta.sin_cos();
        return Pose2::new(start.x + v * t * c, start.y + v * t * s, start.theta);
    }
    let th = start.theta + omega * t;
    Pose2::new(
        start.x + v / omega * (th.sin() - start.theta.sin()),
        start.y - v / omega * (th.cos() - start.theta.cos()),
        wrap_angle(th),
    )
}
