//! Binary PGM (P5, maxval 255) images of maps. Row 0 is the `y = 0` edge.

use super::codec::BinaryGrid;
use super::grid::OccupancyGrid;

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Pixel = round(255 * p_occupied).
pub fn from_grid(grid: &OccupancyGrid) -> Vec<u8> {
    let pixels: Vec<u8> = grid
        .cells()
        .iter()
        .map(|&l| (255.0 * crate::world::probability(l)).round() as u8)
        .collect();
    encode(grid.cols(), grid.rows(), &pixels)
}

/// Occupied cells render as 255, free cells as 0.
pub fn from_binary(grid: &BinaryGrid) -> Vec<u8> {
    let pixels: Vec<u8> = grid.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(grid.cols, grid.rows, &pixels)
}

/// Parses a P5 image with maxval 255 into `(width, height, pixels)`.
pub fn decode(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let width: usize = fields[1].parse().ok()?;
    let height: usize = fields[2].parse().ok()?;
    let data = bytes.get(pos + 1..)?;
    (data.len() == width * height).then(|| (width, height, data.to_vec()))
}
