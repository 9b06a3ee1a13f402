//! User controller running as a child process, spoken to over its standard
//! streams. Reads and writes happen on helper threads so a stalled plugin can
//! never hold the caller past its deadline.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Instant;

use serde_json::Value;

use super::wire::{read_message, write_message, Request, Response};

/// Why a call produced no usable reply.
#[derive(Debug, Clone, PartialEq)]
pub enum CallError {
    Timeout,
    Exited,
    Malformed(String),
    Hook(String),
}

enum Incoming {
    Reply(Response),
    Broken(String),
    Closed,
}

pub struct ProcessPlugin {
    child: Child,
    to_child: Option<Sender<Request>>,
    from_child: Receiver<Incoming>,
    next_id: u64,
    alive: bool,
}

impl ProcessPlugin {
    /// Starts `program` with `workdir` as its working directory. Standard
    /// error goes to `stderr_log` when given.
    pub fn spawn(program: &Path, workdir: &Path, stderr_log: Option<&Path>) -> std::io::Result<Self> {
        let stderr = match stderr_log {
            Some(p) => Stdio::from(File::create(p)?),
            None => Stdio::null(),
        };
        let mut child = Command::new(program)
            .current_dir(workdir)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(stderr)
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (req_tx, req_rx) = mpsc::channel::<Request>();
        thread::Builder::new().name("plugin-writer".into()).spawn(move || {
            let mut w = BufWriter::new(stdin);
            for req in req_rx {
                if write_message(&mut w, &req).is_err() {
                    break;
                }
            }
        })?;

        let (rsp_tx, rsp_rx) = mpsc::channel::<Incoming>();
        thread::Builder::new().name("plugin-reader".into()).spawn(move || {
            let mut r = BufReader::new(stdout);
            loop {
                let msg = match read_message::<_, Response>(&mut r) {
                    Ok(Some(rsp)) => Incoming::Reply(rsp),
                    Ok(None) => Incoming::Closed,
                    Err(e) if e.kind() == std::io::ErrorKind::InvalidData => Incoming::Broken(e.to_string()),
                    Err(_) => Incoming::Closed,
                };
                let stop = !matches!(msg, Incoming::Reply(_));
                if rsp_tx.send(msg).is_err() || stop {
                    break;
                }
            }
        })?;

        Ok(Self {
            child,
            to_child: Some(req_tx),
            from_child: rsp_rx,
            next_id: 1,
            alive: true,
        })
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    /// Sends one request and waits for its reply until `deadline`. Replies
    /// to earlier, abandoned requests are discarded.
    pub fn call(&mut self, hook: &str, args: Value, deadline: Instant) -> Result<Value, CallError> {
        if !self.alive {
            return Err(CallError::Exited);
        }
        let id = self.next_id;
        self.next_id += 1;
        let sent = self
            .to_child
            .as_ref()
            .is_some_and(|tx| tx.send(Request { id, hook: hook.to_string(), args }).is_ok());
        if !sent {
            self.alive = false;
            return Err(CallError::Exited);
        }
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.from_child.recv_timeout(remaining) {
                Ok(Incoming::Reply(rsp)) if rsp.id == id => {
                    return if rsp.ok {
                        Ok(rsp.result)
                    } else {
                        Err(CallError::Hook(rsp.error.unwrap_or_else(|| "hook failed".into())))
                    };
                }
                Ok(Incoming::Reply(stale)) => {
                    log::debug!("discarding late plugin reply {}", stale.id);
                }
                Ok(Incoming::Broken(why)) => {
                    self.alive = false;
                    return Err(CallError::Malformed(why));
                }
                Ok(Incoming::Closed) | Err(RecvTimeoutError::Disconnected) => {
                    self.alive = false;
                    return Err(CallError::Exited);
                }
                Err(RecvTimeoutError::Timeout) => return Err(CallError::Timeout),
            }
        }
    }

    pub fn kill(&mut self) {
        self.to_child = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.alive = false;
    }
}

impl Drop for ProcessPlugin {
    fn drop(&mut self) {
        self.kill();
    }
}
