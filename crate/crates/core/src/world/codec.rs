//! Run-length codec for binarized occupancy maps.
//!
//! Byte layout: `u16` BE rows, `u16` BE cols, `u8` round(threshold * 255),
//! then the runs as unsigned varints (7-bit groups, least significant first,
//! high bit set on every byte but the last). Runs alternate free/occupied in
//! row-major order and always start with a free run, which may be empty.

use thiserror::Error;

use super::grid::{probability, OccupancyGrid};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("compressed world truncated")]
    Truncated,
    #[error("varint run exceeds 32 bits")]
    Overflow,
    #[error("runs cover {got} cells, expected {expected}")]
    RunSumMismatch { got: u64, expected: u64 },
}

/// Binarized, row-major occupancy image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryGrid {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
}

impl BinaryGrid {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Threshold used for maps sent to clients and plugins. Strictly above the
/// 0.5 prior so unexplored cells read as free.
pub const WIRE_THRESHOLD: f64 = 0.6;

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedWorld {
    pub rows: u16,
    pub cols: u16,
    /// Occupancy probability at or above which a cell is set.
    pub threshold: f64,
    pub runs: Vec<u32>,
}

impl CompressedWorld {
    pub fn compress(grid: &OccupancyGrid, threshold: f64) -> Self {
        let bits = grid.cells().iter().map(|&l| probability(l) >= threshold);
        Self::from_bits(grid.rows(), grid.cols(), bits, threshold)
    }

    pub fn from_bits(
        rows: usize,
        cols: usize,
        bits: impl IntoIterator<Item = bool>,
        threshold: f64,
    ) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for b in bits {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        Self {
            rows: rows as u16,
            cols: cols as u16,
            threshold,
            runs,
        }
    }

    pub fn cell_count(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    pub fn decompress(&self) -> Result<BinaryGrid, CodecError> {
        let expected = self.cell_count();
        let got: u64 = self.runs.iter().map(|&r| r as u64).sum();
        if got != expected {
            return Err(CodecError::RunSumMismatch { got, expected });
        }
        let mut bits = Vec::with_capacity(expected as usize);
        let mut value = false;
        for &run in &self.runs {
            bits.extend(std::iter::repeat_n(value, run as usize));
            value = !value;
        }
        Ok(BinaryGrid {
            rows: self.rows as usize,
            cols: self.cols as usize,
            bits,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.runs.len() * 2);
        out.extend_from_slice(&self.rows.to_be_bytes());
        out.extend_from_slice(&self.cols.to_be_bytes());
        out.push((self.threshold.clamp(0.0, 1.0) * 255.0).round() as u8);
        for &run in &self.runs {
            write_varint(&mut out, run);
        }
        out
    }

    /// Parses and validates a wire/disk image, including the run sum.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 5 {
            return Err(CodecError::Truncated);
        }
        let rows = u16::from_be_bytes([bytes[0], bytes[1]]);
        let cols = u16::from_be_bytes([bytes[2], bytes[3]]);
        let threshold = bytes[4] as f64 / 255.0;
        let mut runs = Vec::new();
        let mut rest = &bytes[5..];
        while !rest.is_empty() {
            let (run, used) = read_varint(rest)?;
            runs.push(run);
            rest = &rest[used..];
        }
        let world = Self { rows, cols, threshold, runs };
        let got: u64 = world.runs.iter().map(|&r| r as u64).sum();
        if got != world.cell_count() {
            return Err(CodecError::RunSumMismatch { got, expected: world.cell_count() });
        }
        Ok(world)
    }
}

fn write_varint(out: &mut Vec<u8>, mut v: u32) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7f) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn read_varint(bytes: &[u8]) -> Result<(u32, usize), CodecError> {
    let mut value: u64 = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if i >= 5 {
            return Err(CodecError::Overflow);
        }
        value |= ((b & 0x7f) as u64) << (7 * i);
        if b & 0x80 == 0 {
            return u32::try_from(value)
                .map(|v| (v, i + 1))
                .map_err(|_| CodecError::Overflow);
        }
    }
    Err(CodecError::Truncated)
}
