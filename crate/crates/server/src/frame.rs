//! Wire framing: `u32` big-endian payload length, one type byte, payload.

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Largest accepted payload. A dense MAP or a 64 KiB transfer chunk fits
/// comfortably.
pub const MAX_PAYLOAD: usize = 4 * 1024 * 1024;
pub const HEADER_LEN: usize = 5;
pub const CHUNK_SIZE: usize = 64 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Auth = 0x01,
    AuthOk = 0x02,
    AuthReject = 0x03,
    Lifecycle = 0x10,
    Ack = 0x11,
    Error = 0x12,
    SetControl = 0x20,
    SetMode = 0x21,
    SetBackend = 0x22,
    WriteVar = 0x23,
    State = 0x30,
    Map = 0x31,
    Event = 0x32,
    PutBegin = 0x40,
    PutChunk = 0x41,
    PutEnd = 0x42,
    Get = 0x43,
    GetBegin = 0x44,
    GetChunk = 0x45,
    GetEnd = 0x46,
}

impl FrameType {
    pub const ALL: [FrameType; 20] = [
        FrameType::Auth,
        FrameType::AuthOk,
        FrameType::AuthReject,
        FrameType::Lifecycle,
        FrameType::Ack,
        FrameType::Error,
        FrameType::SetControl,
        FrameType::SetMode,
        FrameType::SetBackend,
        FrameType::WriteVar,
        FrameType::State,
        FrameType::Map,
        FrameType::Event,
        FrameType::PutBegin,
        FrameType::PutChunk,
        FrameType::PutEnd,
        FrameType::Get,
        FrameType::GetBegin,
        FrameType::GetChunk,
        FrameType::GetEnd,
    ];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }

    /// Frames an unauthenticated connection may receive.
    pub fn is_auth_family(self) -> bool {
        matches!(self, FrameType::Auth | FrameType::AuthOk | FrameType::AuthReject | FrameType::Error)
    }
}

/// Machine-readable reason codes carried by AUTH_REJECT and ERROR frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    BadCredentials,
    NoSlot,
    Busy,
    Unauthenticated,
    UnknownFrame,
    BadPayload,
    IllegalTransition,
    NotManual,
    NoPlugin,
    Unsupported,
    IndicatorWrite,
    UnknownVariable,
    PathEscape,
    DigestMismatch,
    TransferState,
    NotFound,
    TooLarge,
    Internal,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::BadCredentials => "bad-credentials",
            Reason::NoSlot => "no-slot",
            Reason::Busy => "busy",
            Reason::Unauthenticated => "unauthenticated",
            Reason::UnknownFrame => "unknown-frame",
            Reason::BadPayload => "bad-payload",
            Reason::IllegalTransition => "illegal-transition",
            Reason::NotManual => "not-manual",
            Reason::NoPlugin => "no-plugin",
            Reason::Unsupported => "unsupported",
            Reason::IndicatorWrite => "indicator-write",
            Reason::UnknownVariable => "unknown-variable",
            Reason::PathEscape => "path-escape",
            Reason::DigestMismatch => "digest-mismatch",
            Reason::TransferState => "transfer-state",
            Reason::NotFound => "not-found",
            Reason::TooLarge => "too-large",
            Reason::Internal => "internal",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One frame. The type byte is kept raw so unknown types survive decoding
/// and can be answered with an error.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub payload: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = FrameType::from_u8(self.kind).map_or_else(|| format!("0x{:02x}", self.kind), |t| format!("{t:?}"));
        write!(f, "Frame({name}, {} bytes)", self.payload.len())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds limit")]
    TooLarge(usize),
}

impl Frame {
    pub fn new(kind: FrameType, payload: Vec<u8>) -> Self {
        Self { kind: kind as u8, payload }
    }

    pub fn json(kind: FrameType, value: &Value) -> Self {
        Self::new(kind, serde_json::to_vec(value).expect("json value serializes"))
    }

    pub fn error(reason: Reason, message: &str) -> Self {
        Self::json(FrameType::Error, &serde_json::json!({ "reason": reason.code(), "message": message }))
    }

    pub fn frame_type(&self) -> Option<FrameType> {
        FrameType::from_u8(self.kind)
    }

    pub fn payload_json(&self) -> Option<Value> {
        serde_json::from_slice(&self.payload).ok()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind);
        out.extend_from_slice(&self.payload);
    }

    /// Decodes one frame from the front of `buf`. `Ok(None)` if more bytes
    /// are needed; otherwise the frame and the number of bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<Option<(Frame, usize)>, FrameError> {
        if buf.len() < HEADER_LEN {
            return Ok(None);
        }
        let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
        if len > MAX_PAYLOAD {
            return Err(FrameError::TooLarge(len));
        }
        if buf.len() < HEADER_LEN + len {
            return Ok(None);
        }
        let frame = Frame { kind: buf[4], payload: buf[HEADER_LEN..HEADER_LEN + len].to_vec() };
        Ok(Some((frame, HEADER_LEN + len)))
    }
}

/// Incremental decoder for a byte stream.
#[derive(Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>, FrameError> {
        match Frame::decode(&self.buf)? {
            Some((frame, used)) => {
                self.buf.drain(..used);
                Ok(Some(frame))
            }
            None => Ok(None),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
