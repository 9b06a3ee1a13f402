//! Plugin transport: each message is a 4-byte big-endian length followed by
//! that many bytes of UTF-8 JSON.
//!
//! Host to plugin: `{"id": n, "hook": "...", "args": {...}}`.
//! Plugin to host: `{"id": n, "ok": true, "result": {...}}` or
//! `{"id": n, "ok": false, "error": "..."}`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;
/// Upper bound on a single message body.
pub const MAX_MESSAGE_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub hook: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(id: u64, result: Value) -> Self {
        Self { id, ok: true, result, error: None }
    }

    pub fn err(id: u64, error: impl Into<String>) -> Self {
        Self { id, ok: false, result: Value::Null, error: Some(error.into()) }
    }
}

pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg).map_err(io::Error::other)?;
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one message. `Ok(None)` on a clean end of stream.
pub fn read_message<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("message of {len} bytes")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn framed_roundtrip() {
        let req = Request { id: 7, hook: "control".into(), args: json!({"x": 1.5}) };
        let mut buf = Vec::new();
        write_message(&mut buf, &req).unwrap();
        let body_len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
        assert_eq!(body_len, buf.len() - 4);
        let back: Request = read_message(&mut buf.as_slice()).unwrap().unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn clean_eof_is_none() {
        let r: Option<Response> = read_message(&mut [].as_slice()).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn oversize_length_is_rejected() {
        let buf = u32::MAX.to_be_bytes();
        assert!(read_message::<_, Response>(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn response_shapes() {
        assert_eq!(
            serde_json::to_string(&Response::ok(1, json!({"u1": 0.5}))).unwrap(),
            r#"{"id":1,"ok":true,"result":{"u1":0.5}}"#
        );
        assert_eq!(
            serde_json::to_string(&Response::err(2, "boom")).unwrap(),
            r#"{"id":2,"ok":false,"error":"boom"}"#
        );
    }
}
