//! Chunked, digest-verified file exchange with the user's workspace.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::frame::{Frame, FrameType, Reason, CHUNK_SIZE};

/// Largest file accepted by a put.
pub const MAX_FILE: u64 = 16 * 1024 * 1024;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An upload in progress.
pub struct Upload {
    pub rel: String,
    target: PathBuf,
    size: u64,
    digest: String,
    data: Vec<u8>,
}

impl Upload {
    pub fn begin(rel: &str, target: PathBuf, size: u64, digest: &str) -> Result<Self, (Reason, String)> {
        if size > MAX_FILE {
            return Err((Reason::TooLarge, format!("{size} bytes exceeds the {MAX_FILE} byte limit")));
        }
        Ok(Self {
            rel: rel.to_string(),
            target,
            size,
            digest: digest.to_ascii_lowercase(),
            data: Vec::with_capacity(size as usize),
        })
    }

    pub fn chunk(&mut self, bytes: &[u8]) -> Result<(), (Reason, String)> {
        if bytes.len() > CHUNK_SIZE {
            return Err((Reason::TooLarge, "chunk larger than 64 KiB".into()));
        }
        if self.data.len() as u64 + bytes.len() as u64 > self.size {
            return Err((Reason::TooLarge, "more bytes than announced".into()));
        }
        self.data.extend_from_slice(bytes);
        Ok(())
    }

    /// Verifies size and digest, then writes the file in place atomically.
    pub fn finish(self) -> Result<String, (Reason, String)> {
        if self.data.len() as u64 != self.size {
            return Err((Reason::DigestMismatch, format!("got {} of {} bytes", self.data.len(), self.size)));
        }
        let got = sha256_hex(&self.data);
        if got != self.digest {
            return Err((Reason::DigestMismatch, "digest mismatch, resend".into()));
        }
        write_atomic(&self.target, &self.data).map_err(|e| (Reason::Internal, e.to_string()))?;
        Ok(got)
    }
}

fn write_atomic(target: &Path, data: &[u8]) -> io::Result<()> {
    if let Some(dir) = target.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = target.with_extension("part");
    fs::write(&tmp, data)?;
    #[cfg(unix)]
    if target.file_name().is_some_and(|n| n == roblab_core::plugin::ARTIFACT_NAME) {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&tmp, fs::Permissions::from_mode(0o755))?;
    }
    fs::rename(&tmp, target)
}

/// Frames answering a get: begin, chunks, end.
pub fn download(rel: &str, path: &Path) -> Result<Vec<Frame>, (Reason, String)> {
    if !path.is_file() {
        return Err((Reason::NotFound, format!("{rel} not found")));
    }
    let data = fs::read(path).map_err(|e| (Reason::Internal, e.to_string()))?;
    let digest = sha256_hex(&data);
    let mut frames = vec![Frame::json(
        FrameType::GetBegin,
        &serde_json::json!({ "path": rel, "size": data.len(), "sha256": digest }),
    )];
    frames.extend(data.chunks(CHUNK_SIZE).map(|c| Frame::new(FrameType::GetChunk, c.to_vec())));
    frames.push(Frame::json(FrameType::GetEnd, &serde_json::json!({ "path": rel, "sha256": digest })));
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upload_verifies_digest() {
        let dir = tempfile::tempdir().unwrap();
        let data = vec![7u8; 100_000];
        let mut up = Upload::begin("a/b.bin", dir.path().join("a/b.bin"), 100_000, &sha256_hex(&data)).unwrap();
        for c in data.chunks(CHUNK_SIZE) {
            up.chunk(c).unwrap();
        }
        up.finish().unwrap();
        assert_eq!(fs::read(dir.path().join("a/b.bin")).unwrap(), data);

        let mut bad = Upload::begin("x", dir.path().join("x"), 3, &sha256_hex(b"abd")).unwrap();
        bad.chunk(b"abc").unwrap();
        assert_eq!(bad.finish().unwrap_err().0, Reason::DigestMismatch);
        assert!(!dir.path().join("x").exists());
    }

    #[test]
    fn upload_rejects_overflow() {
        let dir = tempfile::tempdir().unwrap();
        let mut up = Upload::begin("x", dir.path().join("x"), 2, "00").unwrap();
        assert_eq!(up.chunk(b"abc").unwrap_err().0, Reason::TooLarge);
        assert!(Upload::begin("x", dir.path().join("x"), MAX_FILE + 1, "00").is_err());
    }

    #[test]
    fn download_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f");
        fs::write(&p, vec![1u8; CHUNK_SIZE + 1]).unwrap();
        let frames = download("f", &p).unwrap();
        assert_eq!(frames.len(), 4);
        assert_eq!(frames[2].payload.len(), 1);
        assert_eq!(download("g", &dir.path().join("g")).unwrap_err().0, Reason::NotFound);
    }
}
