//! Experiment scripts: one `t command args` entry per line, `t` in seconds,
//! non-decreasing. Blank lines and `#` comments are ignored.
//!
//! ```text
//! 0    plugin example
//! 0    mode automatic
//! 12.5 mode manual
//! 12.5 command 0.4 0.4
//! 20   end
//! ```

use std::path::PathBuf;

use roblab_core::session::{BackendKind, Mode};
use roblab_core::SimTime;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// `example` selects the built-in reference controller.
    Plugin(PluginRef),
    Mode(Mode),
    Command(f64, f64),
    Backend(BackendKind),
    End,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PluginRef {
    Example,
    Program(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub t: SimTime,
    pub line: usize,
    pub action: Action,
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn parse_time(s: &str) -> Option<SimTime> {
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && v >= 0.0).then(|| SimTime::from_secs_f64(v))
}

fn parse_line(words: &[&str]) -> Result<(SimTime, Action), String> {
    let t = parse_time(words[0]).ok_or_else(|| format!("bad time {:?}", words[0]))?;
    let args = &words[2.min(words.len())..];
    let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(format!("{} takes {n} argument(s)", words[1])) };
    let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("bad number {s:?}"));
    let action = match words.get(1).copied() {
        None => return Err("missing command".into()),
        Some("plugin") => {
            arity(1)?;
            Action::Plugin(if args[0] == "example" { PluginRef::Example } else { PluginRef::Program(PathBuf::from(args[0])) })
        }
        Some("mode") => {
            arity(1)?;
            Action::Mode(match args[0] {
                "manual" => Mode::Manual,
                "automatic" => Mode::Automatic,
                m => return Err(format!("unknown mode {m:?}")),
            })
        }
        Some("command") => {
            arity(2)?;
            Action::Command(num(args[0])?, num(args[1])?)
        }
        Some("backend") => {
            arity(1)?;
            Action::Backend(match args[0] {
                "virtual" => BackendKind::Virtual,
                "real" => BackendKind::Real,
                b => return Err(format!("unknown backend {b:?}")),
            })
        }
        Some("end") => {
            arity(0)?;
            Action::End
        }
        Some(other) => return Err(format!("unknown command {other:?}")),
    };
    Ok((t, action))
}

pub fn parse(text: &str) -> Result<Vec<Step>, ScriptError> {
    let mut steps: Vec<Step> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let (t, action) = parse_line(&words).map_err(|message| ScriptError { line, message })?;
        if let Some(prev) = steps.last() {
            if t < prev.t {
                return Err(ScriptError { line, message: "time goes backwards".into() });
            }
            if prev.action == Action::End {
                return Err(ScriptError { line, message: "entry after end".into() });
            }
        }
        steps.push(Step { t, line, action });
    }
    Ok(steps)
}

/// Simulated duration covered by a script.
pub fn duration(steps: &[Step]) -> SimTime {
    steps.last().map_or(SimTime::ZERO, |s| s.t)
}
