//! Session history written when a session closes: `hist_YYYYMMDD_HHMMSS/`
//! holding `state.csv`, `world.pgm` and `meta.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::world::{pgm, OccupancyGrid};

pub const STATE_HEADER: &str = "t,x,y,th,vx,vy,w,d,u1,u2,battery";

/// One completed tick as seen by the controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub th: f64,
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
    /// cm
    pub d: f64,
    pub u1: f64,
    pub u2: f64,
    /// mV
    pub battery: f64,
}

impl HistoryRow {
    pub fn values(&self) -> [f64; 11] {
        [self.t, self.x, self.y, self.th, self.vx, self.vy, self.w, self.d, self.u1, self.u2, self.battery]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn push(&mut self, row: HistoryRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with header, one row per tick, values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(STATE_HEADER);
        s.push('\n');
        for row in &self.rows {
            let vals: Vec<String> = row.values().iter().map(|v| format!("{v}")).collect();
            s.push_str(&vals.join(","));
            s.push('\n');
        }
        s
    }

    /// Column-major JSON given to the close hook.
    pub fn to_json(&self) -> serde_json::Value {
        let cols: Vec<&str> = STATE_HEADER.split(',').collect();
        let mut obj = serde_json::Map::new();
        for (i, name) in cols.iter().enumerate() {
            let v: Vec<f64> = self.rows.iter().map(|r| r.values()[i]).collect();
            obj.insert(format!("{name}_hist"), serde_json::json!(v));
        }
        serde_json::Value::Object(obj)
    }
}

pub fn history_dir_name(at: DateTime<Utc>) -> String {
    at.format("hist_%Y%m%d_%H%M%S").to_string()
}

/// Writes a history directory under `parent`. A name already taken moves
/// the timestamp forward one second at a time.
pub fn write_history(
    parent: &Path,
    history: &History,
    grid: &OccupancyGrid,
    meta: &serde_json::Value,
    at: DateTime<Utc>,
) -> io::Result<PathBuf> {
    fs::create_dir_all(parent)?;
    let mut stamp = at;
    let dir = loop {
        let candidate = parent.join(history_dir_name(stamp));
        match fs::create_dir(&candidate) {
            Ok(()) => break candidate,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => stamp += Duration::seconds(1),
            Err(e) => return Err(e),
        }
    };
    fs::write(dir.join("state.csv"), history.to_csv())?;
    fs::write(dir.join("world.pgm"), pgm::from_grid(grid))?;
    let mut meta_text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    meta_text.push('\n');
    fs::write(dir.join("meta.json"), meta_text)?;
    Ok(dir)
}
