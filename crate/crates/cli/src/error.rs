use std::fmt;

/// A failure reported as `error: <code>: <message>` with a nonzero exit.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PLUGIN: i32 = 3;

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: EXIT_FAILURE }
    }

    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: EXIT_USAGE }
    }

    pub fn io(what: &str, e: impl fmt::Display) -> Self {
        Self::new("io", format!("{what}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep the reason on one line
        write!(f, "error: {}: {}", self.code, self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}
