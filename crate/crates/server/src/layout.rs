//! Fixed binary layouts of the hot-path push frames. All integers and floats
//! are big-endian; floats are IEEE 754 binary64.
//!
//! STATE (95 bytes):
//!
//! | offset | type | field |
//! |-------:|------|-------|
//! | 0  | u64 | simulated time, µs |
//! | 8  | u32 | tick index |
//! | 12 | f64 | x (m) |
//! | 20 | f64 | y (m) |
//! | 28 | f64 | th (rad) |
//! | 36 | f64 | vx (m/s) |
//! | 44 | f64 | vy (m/s) |
//! | 52 | f64 | w (rad/s) |
//! | 60 | u8  | d (cm) |
//! | 61 | f64 | battery (mV) |
//! | 69 | u8  | mode: 0 manual, 1 automatic |
//! | 70 | u8  | flags: bit0 estimate valid, bit1 plugin active, bit2 running |
//! | 71 | u32 | plugin overruns |
//! | 75 | u32 | push frames dropped on this connection |
//! | 79 | f64 | u1 |
//! | 87 | f64 | u2 |
//!
//! MAP: u64 simulated time (µs), u64 map revision, then the CompressedWorld
//! bytes.

use roblab_core::session::{Mode, Snapshot};
use roblab_core::world::CompressedWorld;

pub const STATE_LEN: usize = 95;

pub const FLAG_VALID: u8 = 1;
pub const FLAG_PLUGIN: u8 = 2;
pub const FLAG_RUNNING: u8 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateFrame {
    pub t_us: u64,
    pub tick: u32,
    pub x: f64,
    pub y: f64,
    pub th: f64,
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
    pub d: u8,
    pub battery_mv: f64,
    pub mode: u8,
    pub flags: u8,
    pub overruns: u32,
    pub dropped: u32,
    pub u1: f64,
    pub u2: f64,
}

impl StateFrame {
    pub fn from_snapshot(s: &Snapshot, running: bool, dropped: u32) -> Self {
        let mut flags = 0;
        if s.estimate_valid {
            flags |= FLAG_VALID;
        }
        if s.plugin_active {
            flags |= FLAG_PLUGIN;
        }
        if running {
            flags |= FLAG_RUNNING;
        }
        Self {
            t_us: s.t.as_micros(),
            tick: s.tick as u32,
            x: s.x,
            y: s.y,
            th: s.th,
            vx: s.vx,
            vy: s.vy,
            w: s.w,
            d: s.d,
            battery_mv: s.battery_mv,
            mode: match s.mode {
                Mode::Manual => 0,
                Mode::Automatic => 1,
            },
            flags,
            overruns: s.overruns,
            dropped,
            u1: s.command.0,
            u2: s.command.1,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(STATE_LEN);
        b.extend_from_slice(&self.t_us.to_be_bytes());
        b.extend_from_slice(&self.tick.to_be_bytes());
        for v in [self.x, self.y, self.th, self.vx, self.vy, self.w] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.push(self.d);
        b.extend_from_slice(&self.battery_mv.to_be_bytes());
        b.push(self.mode);
        b.push(self.flags);
        b.extend_from_slice(&self.overruns.to_be_bytes());
        b.extend_from_slice(&self.dropped.to_be_bytes());
        b.extend_from_slice(&self.u1.to_be_bytes());
        b.extend_from_slice(&self.u2.to_be_bytes());
        debug_assert_eq!(b.len(), STATE_LEN);
        b
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        if b.len() != STATE_LEN {
            return None;
        }
        let u32_at = |o: usize| u32::from_be_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_be_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_bits(u64_at(o));
        Some(Self {
            t_us: u64_at(0),
            tick: u32_at(8),
            x: f64_at(12),
            y: f64_at(20),
            th: f64_at(28),
            vx: f64_at(36),
            vy: f64_at(44),
            w: f64_at(52),
            d: b[60],
            battery_mv: f64_at(61),
            mode: b[69],
            flags: b[70],
            overruns: u32_at(71),
            dropped: u32_at(75),
            u1: f64_at(79),
            u2: f64_at(87),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapFrame {
    pub t_us: u64,
    pub revision: u64,
    pub world: CompressedWorld,
}

impl MapFrame {
    pub fn encode(&self) -> Vec<u8> {
        let world = self.world.to_bytes();
        let mut b = Vec::with_capacity(16 + world.len());
        b.extend_from_slice(&self.t_us.to_be_bytes());
        b.extend_from_slice(&self.revision.to_be_bytes());
        b.extend_from_slice(&world);
        b
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        if b.len() < 16 {
            return None;
        }
        Some(Self {
            t_us: u64::from_be_bytes(b[0..8].try_into().unwrap()),
            revision: u64::from_be_bytes(b[8..16].try_into().unwrap()),
            world: CompressedWorld::from_bytes(&b[16..]).ok()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_roundtrip_and_length() {
        let s = StateFrame { t_us: 7, tick: 3, x: 1.5, d: 42, mode: 1, flags: 5, u1: -1.0, ..Default::default() };
        let b = s.encode();
        assert_eq!(b.len(), STATE_LEN);
        assert_eq!(StateFrame::decode(&b), Some(s));
        assert_eq!(StateFrame::decode(&b[..94]), None);
    }

    #[test]
    fn map_rejects_short_or_corrupt() {
        assert!(MapFrame::decode(&[0; 15]).is_none());
        assert!(MapFrame::decode(&[0; 17]).is_none());
    }
}
