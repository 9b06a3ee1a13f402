use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::{OccupancyGrid, FLOOR_DEPTH, FLOOR_WIDTH, GRID_COLS, GRID_ROWS};
use crate::geometry::Pose2;

/// Where every session places the robot at t = 0.
pub const START_POSE: Pose2 = Pose2::new(0.5, 0.5, 0.0);

const START_CLEARANCE: f64 = 0.5;
const WALL_MARGIN: f64 = 0.2;
const SHAPE_SEPARATION: f64 = 0.3;

/// Obstacle primitive in floor coordinates (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned rectangle anchored at its minimum corner.
    Rect { x: f64, y: f64, width: f64, height: f64 },
    Circle { cx: f64, cy: f64, radius: f64 },
}

impl Shape {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Shape::Rect { x, y, width, height } => {
                px >= x && px <= x + width && py >= y && py <= y + height
            }
            Shape::Circle { cx, cy, radius } => (px - cx).hypot(py - cy) <= radius,
        }
    }

    /// Distance along a unit-direction ray to the first boundary hit. A ray
    /// starting inside the shape hits at 0.
    pub fn ray_distance(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<f64> {
        match *self {
            Shape::Rect { x, y, width, height } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for (o, d, lo, hi) in [(origin.0, dir.0, x, x + width), (origin.1, dir.1, y, y + height)] {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (lo - o) / d;
                    let t2 = (hi - o) / d;
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                if t_far < 0.0 || t_near > t_far {
                    None
                } else {
                    Some(t_near.max(0.0))
                }
            }
            Shape::Circle { cx, cy, radius } => {
                let (ox, oy) = (origin.0 - cx, origin.1 - cy);
                let b = ox * dir.0 + oy * dir.1;
                let c = ox * ox + oy * oy - radius * radius;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
        }
    }

    /// Shortest distance from a point to the shape (0 inside).
    pub fn distance_to_point(&self, px: f64, py: f64) -> f64 {
        match *self {
            Shape::Rect { x, y, width, height } => {
                let dx = (x - px).max(0.0).max(px - (x + width));
                let dy = (y - py).max(0.0).max(py - (y + height));
                dx.hypot(dy)
            }
            Shape::Circle { cx, cy, radius } => ((px - cx).hypot(py - cy) - radius).max(0.0),
        }
    }

    fn inside_floor(&self) -> bool {
        match *self {
            Shape::Rect { x, y, width, height } => {
                x >= 0.0 && y >= 0.0 && x + width < FLOOR_WIDTH && y + height < FLOOR_DEPTH
            }
            Shape::Circle { cx, cy, radius } => {
                cx - radius >= 0.0
                    && cy - radius >= 0.0
                    && cx + radius < FLOOR_WIDTH
                    && cy + radius < FLOOR_DEPTH
            }
        }
    }
}

/// Stable 64-bit seed for a user name: the first eight bytes of its SHA-256.
pub fn seed_for_user(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}

/// Ground-truth obstacle layout. Never leaves the server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenWorld {
    pub seed: u64,
    pub shapes: Vec<Shape>,
}

impl HiddenWorld {
    pub fn empty() -> Self {
        Self { seed: 0, shapes: Vec::new() }
    }

    pub fn with_shapes(shapes: Vec<Shape>) -> Self {
        Self { seed: 0, shapes }
    }

    pub fn for_user(name: &str) -> Self {
        Self::from_seed(seed_for_user(name))
    }

    /// One rectangle and one circle, rejection-sampled so both stay clear
    /// of the start pose and of each other.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = (START_POSE.x, START_POSE.y);
        let rect = loop {
            let width = rng.random_range(0.3..0.8);
            let height = rng.random_range(0.3..0.8);
            let x = rng.random_range(WALL_MARGIN..FLOOR_WIDTH - WALL_MARGIN - width);
            let y = rng.random_range(WALL_MARGIN..FLOOR_DEPTH - WALL_MARGIN - height);
            let s = Shape::Rect { x, y, width, height };
            if s.distance_to_point(start.0, start.1) >= START_CLEARANCE {
                break s;
            }
        };
        let circle = loop {
            let radius = rng.random_range(0.15..0.35);
            let lo = WALL_MARGIN + radius;
            let cx = rng.random_range(lo..FLOOR_WIDTH - lo);
            let cy = rng.random_range(lo..FLOOR_DEPTH - lo);
            let s = Shape::Circle { cx, cy, radius };
            if s.distance_to_point(start.0, start.1) >= START_CLEARANCE
                && rect.distance_to_point(cx, cy) >= radius + SHAPE_SEPARATION
            {
                break s;
            }
        };
        let world = Self { seed, shapes: vec![rect, circle] };
        debug_assert!(world.shapes.iter().all(Shape::inside_floor));
        world
    }

    pub fn occupied(&self, x: f64, y: f64) -> bool {
        self.shapes.iter().any(|s| s.contains(x, y))
    }

    /// Nearest hit over all shapes along a unit-direction ray.
    pub fn ray_distance(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<f64> {
        self.shapes
            .iter()
            .filter_map(|s| s.ray_distance(origin, dir))
            .min_by(f64::total_cmp)
    }

    /// Row-major occupancy of each grid cell center.
    pub fn rasterize(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(GRID_ROWS * GRID_COLS);
        for row in 0..GRID_ROWS {
            for col in 0..GRID_COLS {
                let (x, y) = OccupancyGrid::cell_center(row, col);
                out.push(self.occupied(x, y));
            }
        }
        out
    }

    /// Human-readable listing, one shape per line.
    pub fn listing(&self) -> String {
        let mut s = format!("seed {:016x}\n", self.seed);
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x, y, width, height } => {
                    s.push_str(&format!("rect {x:.4} {y:.4} {width:.4} {height:.4}\n"))
                }
                Shape::Circle { cx, cy, radius } => {
                    s.push_str(&format!("circle {cx:.4} {cy:.4} {radius:.4}\n"))
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_name_same_world() {
        assert_eq!(HiddenWorld::for_user("alice"), HiddenWorld::for_user("alice"));
        assert_ne!(HiddenWorld::for_user("alice"), HiddenWorld::for_user("bob"));
    }

    #[test]
    fn generated_worlds_respect_bounds_and_clearance() {
        for i in 0..500 {
            let w = HiddenWorld::for_user(&format!("user{i}"));
            assert_eq!(w.shapes.len(), 2);
            assert!(matches!(w.shapes[0], Shape::Rect { .. }));
            assert!(matches!(w.shapes[1], Shape::Circle { .. }));
            for s in &w.shapes {
                assert!(s.inside_floor(), "{s:?}");
                assert!(s.distance_to_point(START_POSE.x, START_POSE.y) >= START_CLEARANCE);
            }
        }
    }

    #[test]
    fn ray_hits_rect_face() {
        let wall = Shape::Rect { x: 2.0, y: 0.0, width: 1.9, height: 2.9 };
        assert_eq!(wall.ray_distance((1.0, 1.5), (1.0, 0.0)), Some(1.0));
        assert_eq!(wall.ray_distance((1.0, 1.5), (-1.0, 0.0)), None);
        assert_eq!(wall.ray_distance((2.5, 1.5), (1.0, 0.0)), Some(0.0));
    }

    #[test]
    fn ray_hits_circle() {
        let c = Shape::Circle { cx: 1.5, cy: 1.5, radius: 0.2 };
        let d = c.ray_distance((1.0, 1.5), (1.0, 0.0)).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(c.ray_distance((1.0, 1.5), (0.0, 1.0)), None);
        assert_eq!(c.ray_distance((1.0, 1.5), (-1.0, 0.0)), None);
    }

    #[test]
    fn rasterize_counts_circle_area() {
        let w = HiddenWorld::with_shapes(vec![Shape::Circle { cx: 2.0, cy: 1.5, radius: 0.2 }]);
        let n = w.rasterize().iter().filter(|&&b| b).count() as f64;
        let expect = std::f64::consts::PI * 0.2 * 0.2 / 1e-4;
        assert!((n - expect).abs() / expect < 0.02, "{n} vs {expect}");
    }
}
