use nalgebra::{DMatrix, Matrix3, Vector3};

use super::VisionError;

/// Projective map between two planes, normalized so `h33 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Homography {
    pub matrix: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity() }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, VisionError> {
        let h33 = m[(2, 2)];
        if h33.abs() < 1e-15 || !m.iter().all(|v| v.is_finite()) {
            return Err(VisionError::DegenerateCalibration);
        }
        Ok(Self { matrix: m / h33 })
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let v = self.matrix * Vector3::new(p.0, p.1, 1.0);
        (v.x / v.z, v.y / v.z)
    }
}

/// Result of fitting a homography to correspondences.
#[derive(Clone, Debug)]
pub struct HomographyFit {
    pub homography: Homography,
    /// Per-pair distance between mapped source and target.
    pub residuals: Vec<f64>,
}

impl HomographyFit {
    pub fn rms_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizing_transform(points: impl Iterator<Item = (f64, f64)> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let mean_dist = points.map(|p| (p.0 - mx).hypot(p.1 - my)).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn collinear(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let scale = (b.0 - a.0).hypot(b.1 - a.1) * (c.0 - a.0).hypot(c.1 - a.1);
    cross.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Direct linear transform on Hartley-normalized coordinates.
///
/// Each pair is `(source, target)`; the returned map sends sources to targets.
pub fn solve_homography(pairs: &[((f64, f64), (f64, f64))]) -> Result<HomographyFit, VisionError> {
    if pairs.len() < 4 {
        return Err(VisionError::TooFewCorrespondences(pairs.len()));
    }
    if pairs.len() == 4 {
        for skip in 0..4 {
            let pts: Vec<_> = (0..4).filter(|&i| i != skip).map(|i| pairs[i].1).collect();
            if collinear(pts[0], pts[1], pts[2]) {
                return Err(VisionError::DegenerateCalibration);
            }
        }
    }
    let t_src = normalizing_transform(pairs.iter().map(|p| p.0));
    let t_dst = normalizing_transform(pairs.iter().map(|p| p.1));
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (src, dst)) in pairs.iter().enumerate() {
        let s = t_src * Vector3::new(src.0, src.1, 1.0);
        let d = t_dst * Vector3::new(dst.0, dst.1, 1.0);
        let (x, y) = (s.x / s.z, s.y / s.z);
        let (u, v) = (d.x / d.z, d.y / d.z);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(VisionError::DegenerateCalibration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let s_max = svd.singular_values[order[order.len() - 1]];
    let s_second = svd.singular_values[order[1]];
    if s_max <= 0.0 || s_second / s_max < 1e-10 {
        return Err(VisionError::DegenerateCalibration);
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(VisionError::DegenerateCalibration)?;
    let homography = Homography::from_matrix(t_dst_inv * hn * t_src)?;
    let residuals = pairs
        .iter()
        .map(|(src, dst)| {
            let m = homography.apply(*src);
            (m.0 - dst.0).hypot(m.1 - dst.1)
        })
        .collect();
    Ok(HomographyFit { homography, residuals })
}
