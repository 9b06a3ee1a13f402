use sha2::{Digest, Sha256};
use thiserror::Error;

pub const GRID_ROWS: usize = 300;
pub const GRID_COLS: usize = 400;
/// Meters per cell.
pub const CELL_SIZE: f64 = 0.01;
/// Floor extent along `x` (m).
pub const FLOOR_WIDTH: f64 = 4.0;
/// Floor extent along `y` (m).
pub const FLOOR_DEPTH: f64 = 3.0;
/// Cells are clamped to `[-LOG_ODDS_LIMIT, LOG_ODDS_LIMIT]`.
pub const LOG_ODDS_LIMIT: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("prior probability {0} outside (0, 1)")]
    InvalidPrior(f64),
    #[error("floor coordinate ({x}, {y}) outside [0, 4) x [0, 3)")]
    OutOfBounds { x: f64, y: f64 },
}

pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn probability(l: f64) -> f64 {
    1.0 - 1.0 / (1.0 + l.exp())
}

/// Maps a floor coordinate to its `(row, col)` cell.
pub fn cell_of(x: f64, y: f64) -> Result<(usize, usize), WorldError> {
    if !(0.0..FLOOR_WIDTH).contains(&x) || !(0.0..FLOOR_DEPTH).contains(&y) {
        return Err(WorldError::OutOfBounds { x, y });
    }
    let row = ((y / CELL_SIZE).floor() as usize).min(GRID_ROWS - 1);
    let col = ((x / CELL_SIZE).floor() as usize).min(GRID_COLS - 1);
    Ok((row, col))
}

/// 300x400 log-odds occupancy map of the floor.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    cells: Vec<f64>,
    prior: f64,
    revision: u64,
}

impl OccupancyGrid {
    pub fn new(prior_probability: f64) -> Result<Self, WorldError> {
        if !(prior_probability > 0.0 && prior_probability < 1.0) {
            return Err(WorldError::InvalidPrior(prior_probability));
        }
        let l = log_odds(prior_probability).clamp(-LOG_ODDS_LIMIT, LOG_ODDS_LIMIT);
        Ok(Self {
            cells: vec![l; GRID_ROWS * GRID_COLS],
            prior: l,
            revision: 0,
        })
    }

    pub fn rows(&self) -> usize {
        GRID_ROWS
    }

    pub fn cols(&self) -> usize {
        GRID_COLS
    }

    pub fn resolution(&self) -> f64 {
        CELL_SIZE
    }

    /// Log-odds every cell started from.
    pub fn prior_log_odds(&self) -> f64 {
        self.prior
    }

    /// Incremented whenever at least one cell value changes.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * GRID_COLS + col]
    }

    pub fn probability(&self, row: usize, col: usize) -> f64 {
        probability(self.get(row, col))
    }

    /// Overwrites a cell (clamped). Non-finite values are ignored.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        if !value.is_finite() {
            return;
        }
        let v = value.clamp(-LOG_ODDS_LIMIT, LOG_ODDS_LIMIT);
        let cell = &mut self.cells[row * GRID_COLS + col];
        if *cell != v {
            *cell = v;
            self.revision += 1;
        }
    }

    /// Adds log-odds evidence to a cell (clamped).
    pub fn add(&mut self, row: usize, col: usize, delta: f64) {
        let v = self.get(row, col) + delta;
        self.set(row, col, v);
    }

    /// Floor coordinate of a cell's center.
    pub fn cell_center(row: usize, col: usize) -> (f64, f64) {
        ((col as f64 + 0.5) * CELL_SIZE, (row as f64 + 0.5) * CELL_SIZE)
    }

    /// SHA-256 over the big-endian bit patterns of all cells, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.cells {
            hasher.update(c.to_bits().to_be_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
