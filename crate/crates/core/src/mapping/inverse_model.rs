use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2};
use crate::robot::MAX_READING_CM;
use crate::world::{OccupancyGrid, CELL_SIZE, GRID_COLS, GRID_ROWS};

/// Log-odds evidence a single sonar return adds to the cells of its cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSonarModel {
    pub l_occ: f64,
    pub l_free: f64,
    /// Half thickness of the occupied band around the measured range (m).
    pub band: f64,
    pub cone_half_angle_deg: f64,
    pub max_range: f64,
}

impl Default for InverseSonarModel {
    fn default() -> Self {
        Self {
            l_occ: 0.85,
            l_free: -0.4,
            band: 0.02,
            cone_half_angle_deg: 15.0,
            max_range: 2.55,
        }
    }
}

impl InverseSonarModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_occ > 0.0 && self.l_free < 0.0) {
            return Err("mapping: require l_occ > 0 > l_free".into());
        }
        if !(self.band >= 0.0 && self.max_range > 0.0) {
            return Err("mapping: band and max_range must be non-negative".into());
        }
        Ok(())
    }

    /// Visits every cell the reading carries evidence for, with its increment.
    pub fn for_each_increment(&self, pose: &Pose2, distance_cm: u8, mut visit: impl FnMut(usize, usize, f64)) {
        let d = distance_cm as f64 / 100.0;
        let max_return = distance_cm >= MAX_READING_CM;
        let reach = (d + self.band).min(self.max_range);
        let half = self.cone_half_angle_deg.to_radians();
        let col_lo = ((pose.x - reach) / CELL_SIZE).floor().max(0.0) as usize;
        let col_hi = (((pose.x + reach) / CELL_SIZE).floor() as usize).min(GRID_COLS - 1);
        let row_lo = ((pose.y - reach) / CELL_SIZE).floor().max(0.0) as usize;
        let row_hi = (((pose.y + reach) / CELL_SIZE).floor() as usize).min(GRID_ROWS - 1);
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                let (cx, cy) = OccupancyGrid::cell_center(row, col);
                let (dx, dy) = (cx - pose.x, cy - pose.y);
                let r = dx.hypot(dy);
                if r > reach {
                    continue;
                }
                if wrap_angle(dy.atan2(dx) - pose.theta).abs() > half {
                    continue;
                }
                if r < d - self.band {
                    visit(row, col, self.l_free);
                } else if !max_return && (r - d).abs() <= self.band {
                    visit(row, col, self.l_occ);
                }
            }
        }
    }
}

/// Adds one reading's log-odds evidence to the grid.
pub fn update_grid(grid: &mut OccupancyGrid, pose: &Pose2, distance_cm: u8, model: &InverseSonarModel) {
    model.for_each_increment(pose, distance_cm, |r, c, inc| grid.add(r, c, inc));
}

/// One range reading from one of possibly several sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct SonarReading {
    pub sensor_id: u32,
    pub distance_cm: u8,
    pub model: InverseSonarModel,
}

/// Sequential independent updates. Readings are applied in a canonical order
/// so the resulting grid does not depend on how they were listed.
pub fn fuse_measurements(grid: &mut OccupancyGrid, pose: &Pose2, readings: &[SonarReading]) {
    let mut ordered: Vec<&SonarReading> = readings.iter().collect();
    ordered.sort_by(|a, b| {
        let key = |r: &SonarReading| {
            (
                r.sensor_id,
                r.distance_cm,
                r.model.l_occ.to_bits(),
                r.model.l_free.to_bits(),
                r.model.band.to_bits(),
                r.model.cone_half_angle_deg.to_bits(),
                r.model.max_range.to_bits(),
            )
        };
        key(a).cmp(&key(b))
    });
    for r in ordered {
        update_grid(grid, pose, r.distance_cm, &r.model);
    }
}
