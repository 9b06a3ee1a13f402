//! Plugin side of the wire protocol, for controllers written in Rust. Keeps
//! a local mirror of the host grid, updated with the plugin's own deltas and
//! rebuilt from the binarized world whenever the host digest disagrees.

use std::io::{self, Read, Write};

use base64::Engine;
use serde_json::{json, Value};

use super::wire::{read_message, write_message, Request, Response, PROTOCOL_VERSION};
use super::{Controller, History, HistoryRow, Observation};
use crate::world::{log_odds, CompressedWorld, OccupancyGrid};

/// Log-odds given to occupied cells when the mirror is rebuilt.
const RESYNC_OCCUPIED: f64 = 2.0;

pub struct Guest {
    controller: Box<dyn Controller>,
    grid: OccupancyGrid,
}

impl Guest {
    pub fn new(controller: Box<dyn Controller>) -> Self {
        Self {
            controller,
            grid: OccupancyGrid::new(0.5).expect("valid prior"),
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Answers one request.
    pub fn handle(&mut self, req: &Request) -> Response {
        match self.dispatch(&req.hook, &req.args) {
            Ok(v) => Response::ok(req.id, v),
            Err(e) => Response::err(req.id, e),
        }
    }

    fn dispatch(&mut self, hook: &str, args: &Value) -> Result<Value, String> {
        match hook {
            "hello" => Ok(json!({ "version": PROTOCOL_VERSION })),
            "init" => {
                self.controller.init()?;
                Ok(json!({}))
            }
            "compute_world" => {
                self.sync(args)?;
                let obs = observation(args)?;
                let delta = self.controller.compute_world(&self.grid, &obs)?;
                for c in &delta {
                    if c.row < self.grid.rows() && c.col < self.grid.cols() {
                        self.grid.set(c.row, c.col, c.value);
                    }
                }
                Ok(Value::Array(delta.iter().map(|c| json!([c.row, c.col, c.value])).collect()))
            }
            "control" => {
                self.sync(args)?;
                let obs = observation(args)?;
                let (u1, u2) = self.controller.control(&self.grid, &obs)?;
                Ok(json!([u1, u2]))
            }
            "close" => {
                let history = history_from_json(args.get("history").unwrap_or(&Value::Null));
                self.controller.close(&history)?;
                Ok(json!({}))
            }
            other => Err(format!("unknown hook {other}")),
        }
    }

    fn sync(&mut self, args: &Value) -> Result<(), String> {
        let digest = args.get("digest").and_then(Value::as_str).ok_or("missing digest")?;
        if digest == self.grid.digest() {
            return Ok(());
        }
        let text = args.get("world").and_then(Value::as_str).ok_or("missing world")?;
        let bytes = base64::engine::general_purpose::STANDARD.decode(text).map_err(|e| e.to_string())?;
        let bin = CompressedWorld::from_bytes(&bytes).map_err(|e| e.to_string())?.decompress().map_err(|e| e.to_string())?;
        if bin.rows != self.grid.rows() || bin.cols != self.grid.cols() {
            return Err("world shape mismatch".into());
        }
        let free = log_odds(0.5);
        for r in 0..bin.rows {
            for c in 0..bin.cols {
                self.grid.set(r, c, if bin.get(r, c) { RESYNC_OCCUPIED } else { free });
            }
        }
        Ok(())
    }

    /// Serves requests until the host closes the stream or sends `close`.
    pub fn serve<R: Read, W: Write>(&mut self, mut input: R, mut output: W) -> io::Result<()> {
        while let Some(req) = read_message::<_, Request>(&mut input)? {
            let rsp = self.handle(&req);
            write_message(&mut output, &rsp)?;
            if req.hook == "close" {
                break;
            }
        }
        Ok(())
    }
}

fn observation(args: &Value) -> Result<Observation, String> {
    let num = |k: &str| args.get(k).and_then(Value::as_f64).ok_or_else(|| format!("missing {k}"));
    let opt = |k: &str| args.get(k).and_then(Value::as_f64).unwrap_or(0.0);
    Ok(Observation {
        x: num("x")?,
        y: num("y")?,
        th: num("th")?,
        vx: opt("vx"),
        vy: opt("vy"),
        w: opt("w"),
        d: num("d")?,
        t: opt("t"),
    })
}

fn history_from_json(v: &Value) -> History {
    let col = |k: &str| -> Vec<f64> {
        v.get(format!("{k}_hist"))
            .and_then(Value::as_array)
            .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
            .unwrap_or_default()
    };
    let cols: Vec<Vec<f64>> = ["t", "x", "y", "th", "vx", "vy", "w", "d", "u1", "u2", "battery"].iter().map(|k| col(k)).collect();
    let n = cols.iter().map(Vec::len).min().unwrap_or(0);
    let rows = (0..n)
        .map(|i| HistoryRow {
            t: cols[0][i],
            x: cols[1][i],
            y: cols[2][i],
            th: cols[3][i],
            vx: cols[4][i],
            vy: cols[5][i],
            w: cols[6][i],
            d: cols[7][i],
            u1: cols[8][i],
            u2: cols[9][i],
            battery: cols[10][i],
        })
        .collect();
    History { rows }
}
