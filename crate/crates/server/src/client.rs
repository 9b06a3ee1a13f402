//! Blocking client for the TCP transport, used by the CLI and tests.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::frame::{Frame, FrameDecoder, FrameType, CHUNK_SIZE};
use crate::transfer::sha256_hex;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{reason}: {message}")]
    Rejected { reason: String, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
}

impl ClientError {
    pub fn reason(&self) -> Option<&str> {
        match self {
            ClientError::Rejected { reason, .. } => Some(reason),
            _ => None,
        }
    }
}

pub struct Client {
    stream: TcpStream,
    dec: FrameDecoder,
    pushed: VecDeque<Frame>,
    seq: u64,
    timeout: Duration,
}

fn rejected(f: &Frame) -> ClientError {
    let v = f.payload_json().unwrap_or(Value::Null);
    ClientError::Rejected {
        reason: v["reason"].as_str().unwrap_or("?").to_string(),
        message: v["message"].as_str().unwrap_or("").to_string(),
    }
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, dec: FrameDecoder::new(), pushed: VecDeque::new(), seq: 0, timeout: Duration::from_secs(10) })
    }

    /// Upper bound on waiting for any single reply.
    pub fn set_timeout(&mut self, t: Duration) {
        self.timeout = t;
    }

    pub fn send(&mut self, f: &Frame) -> io::Result<()> {
        self.stream.write_all(&f.encode())
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.stream.write_all(bytes)
    }

    /// Next frame off the socket, skipping the stash. `None` on timeout.
    pub fn recv_wire(&mut self, timeout: Duration) -> Result<Option<Frame>, ClientError> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 64 * 1024];
        loop {
            if let Some(f) = self.dec.next_frame().map_err(|e| ClientError::Protocol(e.to_string()))? {
                return Ok(Some(f));
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut buf) {
                Ok(0) => return Err(ClientError::Io(io::ErrorKind::UnexpectedEof.into())),
                Ok(n) => self.dec.extend(&buf[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Next frame, stashed pushes first.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Frame>, ClientError> {
        if let Some(f) = self.pushed.pop_front() {
            return Ok(Some(f));
        }
        self.recv_wire(timeout)
    }

    /// Removes and returns every stashed push frame.
    pub fn take_pushed(&mut self) -> Vec<Frame> {
        self.pushed.drain(..).collect()
    }

    fn await_reply(&mut self, is_reply: impl Fn(FrameType) -> bool) -> Result<Frame, ClientError> {
        self.await_frame(|f| f.frame_type().is_some_and(&is_reply))
    }

    /// Reads until `wanted` matches, stashing everything else.
    fn await_frame(&mut self, wanted: impl Fn(&Frame) -> bool) -> Result<Frame, ClientError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let f = self.recv_wire(left)?.ok_or_else(|| ClientError::Protocol("timed out waiting for reply".into()))?;
            if wanted(&f) {
                return Ok(f);
            }
            self.pushed.push_back(f);
        }
    }

    /// Sends a JSON request and waits for its ACK or ERROR.
    pub fn request(&mut self, kind: FrameType, mut body: Value) -> Result<Value, ClientError> {
        self.seq += 1;
        if let Some(o) = body.as_object_mut() {
            o.insert("seq".into(), json!(self.seq));
        }
        self.send(&Frame::json(kind, &body))?;
        let seq = self.seq;
        let f = self.await_frame(|f| {
            matches!(f.frame_type(), Some(FrameType::Ack | FrameType::Error))
                && f.payload_json().is_some_and(|v| v["seq"].as_u64() == Some(seq))
        })?;
        if f.frame_type() == Some(FrameType::Error) {
            return Err(rejected(&f));
        }
        f.payload_json().ok_or_else(|| ClientError::Protocol("ack is not JSON".into()))
    }

    pub fn auth(&mut self, user: &str, password: &str) -> Result<Value, ClientError> {
        self.send(&Frame::json(FrameType::Auth, &json!({ "user": user, "password": password })))?;
        let f = self.await_reply(|t| matches!(t, FrameType::AuthOk | FrameType::AuthReject | FrameType::Error))?;
        match f.frame_type() {
            Some(FrameType::AuthOk) => f.payload_json().ok_or_else(|| ClientError::Protocol("auth ok is not JSON".into())),
            _ => Err(rejected(&f)),
        }
    }

    pub fn lifecycle(&mut self, op: &str) -> Result<Value, ClientError> {
        self.request(FrameType::Lifecycle, json!({ "op": op }))
    }

    pub fn put(&mut self, path: &str, data: &[u8]) -> Result<Value, ClientError> {
        self.request(FrameType::PutBegin, json!({ "path": path, "size": data.len(), "sha256": sha256_hex(data) }))?;
        for chunk in data.chunks(CHUNK_SIZE) {
            self.send(&Frame::new(FrameType::PutChunk, chunk.to_vec()))?;
        }
        self.request(FrameType::PutEnd, json!({}))
    }

    pub fn get(&mut self, path: &str) -> Result<Vec<u8>, ClientError> {
        self.seq += 1;
        self.send(&Frame::json(FrameType::Get, &json!({ "path": path, "seq": self.seq })))?;
        let begin = self.await_reply(|t| matches!(t, FrameType::GetBegin | FrameType::Error))?;
        if begin.frame_type() == Some(FrameType::Error) {
            return Err(rejected(&begin));
        }
        let meta = begin.payload_json().unwrap_or(Value::Null);
        let mut data = Vec::new();
        loop {
            let f = self.await_reply(|t| matches!(t, FrameType::GetChunk | FrameType::GetEnd))?;
            if f.frame_type() == Some(FrameType::GetEnd) {
                break;
            }
            data.extend_from_slice(&f.payload);
        }
        if meta["sha256"].as_str().is_some_and(|d| d != sha256_hex(&data)) {
            return Err(ClientError::Protocol("downloaded bytes fail their digest".into()));
        }
        Ok(data)
    }
}
