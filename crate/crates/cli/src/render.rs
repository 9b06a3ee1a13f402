//! PGM emission for history directories, compressed maps and hidden worlds.

use std::path::Path;

use roblab_core::world::{pgm, CompressedWorld, HiddenWorld, GRID_COLS, GRID_ROWS};

use crate::error::CliError;

/// Threshold recorded in compressed ground-truth rasters.
const TRUTH_THRESHOLD: f64 = 0.5;

/// A history directory yields its occupancy image; any other file is read
/// as a compressed map and rendered black and white.
pub fn render(input: &Path) -> Result<Vec<u8>, CliError> {
    if input.is_dir() {
        let path = input.join("world.pgm");
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
        let (w, h, pixels) = pgm::decode(&bytes).ok_or_else(|| CliError::new("bad-image", format!("{} is not a P5 image", path.display())))?;
        return Ok(pgm::encode(w, h, &pixels));
    }
    let bytes = std::fs::read(input).map_err(|e| CliError::io(&input.display().to_string(), e))?;
    let world = CompressedWorld::from_bytes(&bytes).map_err(|e| CliError::new("bad-map", e.to_string()))?;
    let bits = world.decompress().map_err(|e| CliError::new("bad-map", e.to_string()))?;
    Ok(pgm::from_binary(&bits))
}

pub fn truth_map(world: &HiddenWorld) -> CompressedWorld {
    CompressedWorld::from_bits(GRID_ROWS, GRID_COLS, world.rasterize(), TRUTH_THRESHOLD)
}
