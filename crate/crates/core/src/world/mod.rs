//! The robot's floor: occupancy grid, hidden ground truth, and the
//! binarize-and-compress codec used on the wire.
//!
//! Floor frame: origin at one platform corner, `x` along the 4 m side and `y`
//! along the 3 m side. Grid row indexes `y`, column indexes `x`, 1 cm cells.

mod codec;
mod grid;
mod hidden;
pub mod pgm;

pub use codec::{BinaryGrid, CodecError, CompressedWorld, WIRE_THRESHOLD};
pub use grid::{cell_of, log_odds, probability, OccupancyGrid, WorldError};
pub use grid::{CELL_SIZE, FLOOR_DEPTH, FLOOR_WIDTH, GRID_COLS, GRID_ROWS, LOG_ODDS_LIMIT};
pub use hidden::{seed_for_user, HiddenWorld, Shape, START_POSE};
