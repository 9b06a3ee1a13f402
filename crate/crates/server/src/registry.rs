//! Named variables shared with the client. Controls are client-writable;
//! indicators are written by the server only and reach the client through
//! STATE and MAP pushes.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Control,
    Indicator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Scalar,
    Pair,
    Pose,
    Text,
    World,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Variable {
    pub name: &'static str,
    pub direction: Direction,
    pub kind: VarKind,
}

const fn control(name: &'static str, kind: VarKind) -> Variable {
    Variable { name, direction: Direction::Control, kind }
}

const fn indicator(name: &'static str, kind: VarKind) -> Variable {
    Variable { name, direction: Direction::Indicator, kind }
}

pub const VARIABLES: &[Variable] = &[
    control("command", VarKind::Pair),
    control("mode", VarKind::Text),
    control("backend", VarKind::Text),
    indicator("time", VarKind::Scalar),
    indicator("tick", VarKind::Scalar),
    indicator("pose", VarKind::Pose),
    indicator("velocity", VarKind::Pose),
    indicator("distance", VarKind::Scalar),
    indicator("battery", VarKind::Scalar),
    indicator("active_mode", VarKind::Text),
    indicator("overruns", VarKind::Scalar),
    indicator("applied_command", VarKind::Pair),
    indicator("world", VarKind::World),
];

pub fn lookup(name: &str) -> Option<&'static Variable> {
    VARIABLES.iter().find(|v| v.name == name)
}
