//! Extended Kalman filter on `(x, y, θ)`: odometry prediction, vision fixes.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::clock::SimTime;
use crate::geometry::{wrap_angle, Pose2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub mean: Pose2,
    pub covariance: Matrix3<f64>,
    pub t: SimTime,
}

impl FilterState {
    pub fn new(mean: Pose2, covariance: Matrix3<f64>) -> Self {
        Self { mean, covariance, t: SimTime::ZERO }
    }

    pub fn is_symmetric_psd(&self, tol: f64) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).abs().max() > tol {
            return false;
        }
        p.symmetric_eigenvalues().iter().all(|&e| e >= -tol)
    }
}

/// Motion between two poses, expressed in the frame of the first.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdometryDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl OdometryDelta {
    pub fn between(from: &Pose2, to: &Pose2) -> Self {
        let (s, c) = from.theta.sin_cos();
        let (gx, gy) = (to.x - from.x, to.y - from.y);
        Self {
            dx: c * gx + s * gy,
            dy: -s * gx + c * gy,
            dtheta: wrap_angle(to.theta - from.theta),
        }
    }

    pub fn apply(&self, pose: &Pose2) -> Pose2 {
        let (x, y) = pose.transform_point((self.dx, self.dy));
        Pose2::new(x, y, wrap_angle(pose.theta + self.dtheta))
    }
}

fn symmetrize(p: Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (p + p.transpose())
}

/// Propagates the mean by composing the odometry delta; `P ← F P Fᵀ + Q`.
pub fn kalman_predict(fs: &FilterState, delta: &OdometryDelta, q: &Matrix3<f64>) -> FilterState {
    let (s, c) = fs.mean.theta.sin_cos();
    let f = Matrix3::new(
        1.0, 0.0, -s * delta.dx - c * delta.dy,
        0.0, 1.0, c * delta.dx - s * delta.dy,
        0.0, 0.0, 1.0,
    );
    FilterState {
        mean: delta.apply(&fs.mean),
        covariance: symmetrize(f * fs.covariance * f.transpose() + q),
        t: fs.t,
    }
}

/// Corrects with a direct pose measurement (identity measurement model).
pub fn kalman_update(fs: &FilterState, fix: &Pose2, r: &Matrix3<f64>) -> Result<FilterState, FilterError> {
    let p = fs.covariance;
    let s = p + r;
    let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(FilterError::SingularInnovation);
    }
    let k = p * s_inv;
    let innovation = Vector3::new(fix.x - fs.mean.x, fix.y - fs.mean.y, wrap_angle(fix.theta - fs.mean.theta));
    let corr = k * innovation;
    let i_k = Matrix3::identity() - k;
    // Joseph form keeps the covariance symmetric positive semi-definite
    let covariance = symmetrize(i_k * p * i_k.transpose() + k * r * k.transpose());
    Ok(FilterState {
        mean: Pose2::new(fs.mean.x + corr.x, fs.mean.y + corr.y, wrap_angle(fs.mean.theta + corr.z)),
        covariance,
        t: fs.t,
    })
}
