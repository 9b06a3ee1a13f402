//! User registry and lab booking calendar, persisted as one text file.
//!
//! File layout, one record per line, fields separated by single spaces:
//!
//! ```text
//! roblab-booking 1
//! user <name> <salt-hex> <sha256-hex of salt||password> <workspace-dir>
//! slot <name> <start RFC 3339> <end RFC 3339>
//! checksum <sha256-hex of every preceding byte>
//! ```
//!
//! Slots are half-open `[start, end)`. The `example` user is implicit: it is
//! never written, always present and accepts any password.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::plugin::EXAMPLE_USER;

const HEADER: &str = "roblab-booking 1";
const MAX_NAME_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum BookingError {
    #[error("invalid user name {0:?}")]
    InvalidName(String),
    #[error("user {0} already exists")]
    UserExists(String),
    #[error("no such user {0}")]
    UnknownUser(String),
    #[error("user {0} cannot be changed")]
    Protected(String),
    #[error("slot must end after it starts")]
    EmptySlot,
    #[error("slot overlaps {0}")]
    Conflict(Slot),
    #[error("no matching slot")]
    NoSuchSlot,
    #[error("store line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Why a login was refused. Codes are the wire reason strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denial {
    BadCredentials,
    NoSlot,
}

impl Denial {
    pub fn code(self) -> &'static str {
        match self {
            Denial::BadCredentials => "bad-credentials",
            Denial::NoSlot => "no-slot",
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct User {
    pub name: String,
    salt: String,
    digest: String,
    pub workspace: String,
}

impl std::fmt::Debug for User {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("User").field("name", &self.name).field("workspace", &self.workspace).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub user: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Slot {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Slot) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} [{}, {})", self.user, stamp(self.start), stamp(self.end))
    }
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn password_digest(salt: &str, password: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(password.as_bytes());
    hex(&h.finalize())
}

/// Names double as directory names and file tokens.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_NAME_LEN
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BookingStore {
    users: BTreeMap<String, User>,
    slots: Vec<Slot>,
}

impl BookingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn user(&self, name: &str) -> Option<&User> {
        self.users.get(name)
    }

    /// Workspace directory of a known user; the example user's is `example`.
    pub fn workspace_of(&self, name: &str) -> Option<&str> {
        if name == EXAMPLE_USER {
            return Some(EXAMPLE_USER);
        }
        self.users.get(name).map(|u| u.workspace.as_str())
    }

    pub fn add_user<R: Rng + ?Sized>(&mut self, name: &str, password: &str, rng: &mut R) -> Result<(), BookingError> {
        if !valid_name(name) {
            return Err(BookingError::InvalidName(name.into()));
        }
        if name == EXAMPLE_USER {
            return Err(BookingError::Protected(name.into()));
        }
        if self.users.contains_key(name) {
            return Err(BookingError::UserExists(name.into()));
        }
        let salt = hex(&rng.random::<[u8; 16]>());
        let digest = password_digest(&salt, password);
        self.users.insert(
            name.to_string(),
            User { name: name.to_string(), salt, digest, workspace: name.to_string() },
        );
        Ok(())
    }

    /// Removes a user and all of their slots.
    pub fn remove_user(&mut self, name: &str) -> Result<(), BookingError> {
        if name == EXAMPLE_USER {
            return Err(BookingError::Protected(name.into()));
        }
        self.users.remove(name).ok_or_else(|| BookingError::UnknownUser(name.into()))?;
        self.slots.retain(|s| s.user != name);
        Ok(())
    }

    pub fn reserve(&mut self, user: &str, start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Slot, BookingError> {
        if !self.users.contains_key(user) {
            return Err(if user == EXAMPLE_USER {
                BookingError::Protected(user.into())
            } else {
                BookingError::UnknownUser(user.into())
            });
        }
        if end <= start {
            return Err(BookingError::EmptySlot);
        }
        let slot = Slot { user: user.to_string(), start, end };
        if let Some(other) = self.slots.iter().find(|s| s.overlaps(&slot)) {
            return Err(BookingError::Conflict(other.clone()));
        }
        self.slots.push(slot.clone());
        self.slots.sort_by(|a, b| a.start.cmp(&b.start));
        Ok(slot)
    }

    pub fn cancel(&mut self, user: &str, start: DateTime<Utc>) -> Result<Slot, BookingError> {
        let i = self
            .slots
            .iter()
            .position(|s| s.user == user && s.start == start)
            .ok_or(BookingError::NoSuchSlot)?;
        Ok(self.slots.remove(i))
    }

    /// Whether `user` may use the lab at `now`.
    pub fn validate(&self, user: &str, now: DateTime<Utc>) -> Result<(), Denial> {
        if user == EXAMPLE_USER {
            return Ok(());
        }
        if !self.users.contains_key(user) {
            return Err(Denial::BadCredentials);
        }
        if self.slots.iter().any(|s| s.user == user && s.contains(now)) {
            Ok(())
        } else {
            Err(Denial::NoSlot)
        }
    }

    /// Credential check followed by the slot check.
    pub fn authenticate(&self, user: &str, password: &str, now: DateTime<Utc>) -> Result<(), Denial> {
        if user != EXAMPLE_USER {
            let u = self.users.get(user).ok_or(Denial::BadCredentials)?;
            if password_digest(&u.salt, password) != u.digest {
                return Err(Denial::BadCredentials);
            }
        }
        self.validate(user, now)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(HEADER);
        s.push('\n');
        for u in self.users.values() {
            let _ = writeln!(s, "user {} {} {} {}", u.name, u.salt, u.digest, u.workspace);
        }
        for slot in &self.slots {
            let _ = writeln!(s, "slot {} {} {}", slot.user, stamp(slot.start), stamp(slot.end));
        }
        let sum = hex(&Sha256::digest(s.as_bytes()));
        let _ = writeln!(s, "checksum {sum}");
        s
    }

    /// Parses a whole store. Any defect rejects the file as a whole.
    pub fn from_text(text: &str) -> Result<Self, BookingError> {
        let err = |line: usize, message: &str| BookingError::Parse { line, message: message.to_string() };
        let body_end = text.trim_end_matches('\n').rfind('\n').map(|i| i + 1).ok_or_else(|| err(1, "missing checksum"))?;
        let (body, trailer) = text.split_at(body_end);
        let n_lines = body.lines().count() + 1;
        let expected = trailer
            .strip_suffix('\n')
            .and_then(|t| t.strip_prefix("checksum "))
            .ok_or_else(|| err(n_lines, "missing checksum"))?;
        if hex(&Sha256::digest(body.as_bytes())) != expected {
            return Err(err(n_lines, "checksum mismatch"));
        }

        let mut lines = body.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(err(1, "bad header")),
        }
        let mut store = Self::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split(' ').collect();
            match f.as_slice() {
                ["user", name, salt, digest, ws] => {
                    let hexish = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_hexdigit());
                    if !valid_name(name) || *name == EXAMPLE_USER || !valid_name(ws) || !hexish(salt) || digest.len() != 64 || !hexish(digest) {
                        return Err(err(n, "bad user record"));
                    }
                    let user = User {
                        name: name.to_string(),
                        salt: salt.to_string(),
                        digest: digest.to_string(),
                        workspace: ws.to_string(),
                    };
                    if store.users.insert(name.to_string(), user).is_some() {
                        return Err(err(n, "duplicate user"));
                    }
                }
                ["slot", name, start, end] => {
                    let parse = |s: &str| DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc));
                    let (Ok(start), Ok(end)) = (parse(start), parse(end)) else {
                        return Err(err(n, "bad timestamp"));
                    };
                    store.reserve(name, start, end).map_err(|e| err(n, &e.to_string()))?;
                }
                _ => return Err(err(n, "unrecognized record")),
            }
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, BookingError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_text(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), BookingError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 5, 6, h, m, 0).unwrap()
    }

    fn store() -> BookingStore {
        let mut s = BookingStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        s.add_user("alice", "pw", &mut rng).unwrap();
        s.add_user("bob", "secret", &mut rng).unwrap();
        s
    }

    #[test]
    fn example_is_always_allowed() {
        let s = BookingStore::new();
        assert_eq!(s.authenticate("example", "anything", at(3, 0)), Ok(()));
        assert!(matches!(store().remove_user("example"), Err(BookingError::Protected(_))));
        assert!(matches!(store().add_user("example", "x", &mut rand::rng()), Err(BookingError::Protected(_))));
    }

    #[test]
    fn half_open_slots() {
        let mut s = store();
        s.reserve("alice", at(10, 0), at(11, 0)).unwrap();
        assert_eq!(s.validate("alice", at(10, 30)), Ok(()));
        assert_eq!(s.validate("alice", at(10, 0)), Ok(()));
        assert_eq!(s.validate("alice", at(11, 0)), Err(Denial::NoSlot));
        assert_eq!(s.validate("bob", at(10, 30)), Err(Denial::NoSlot));
        s.reserve("bob", at(11, 0), at(12, 0)).unwrap();
        assert!(matches!(s.reserve("bob", at(10, 59), at(11, 30)), Err(BookingError::Conflict(_))));
        assert!(matches!(s.reserve("bob", at(12, 0), at(12, 0)), Err(BookingError::EmptySlot)));
    }

    #[test]
    fn passwords_are_checked() {
        let mut s = store();
        s.reserve("alice", at(10, 0), at(11, 0)).unwrap();
        assert_eq!(s.authenticate("alice", "pw", at(10, 5)), Ok(()));
        assert_eq!(s.authenticate("alice", "PW", at(10, 5)), Err(Denial::BadCredentials));
        assert_eq!(s.authenticate("carol", "pw", at(10, 5)), Err(Denial::BadCredentials));
        assert_eq!(s.authenticate("alice", "pw", at(9, 5)), Err(Denial::NoSlot));
    }

    #[test]
    fn digests_not_in_debug_output() {
        let s = store();
        let u = s.user("alice").unwrap();
        assert!(!format!("{u:?}").contains(&u.digest));
    }

    #[test]
    fn names_are_restricted() {
        for bad in ["", "a b", "../x", ".hidden", "x/y", &"n".repeat(33)] {
            assert!(!valid_name(bad), "{bad}");
        }
        assert!(valid_name("user_1.2-3"));
    }

    #[test]
    fn text_roundtrip_and_corruption() {
        let mut s = store();
        s.reserve("alice", at(10, 0), at(11, 0)).unwrap();
        s.reserve("bob", at(11, 0), at(12, 0)).unwrap();
        let text = s.to_text();
        assert_eq!(BookingStore::from_text(&text).unwrap(), s);
        assert_eq!(BookingStore::from_text(&BookingStore::new().to_text()).unwrap(), BookingStore::new());
        for cut in 0..text.len() {
            assert!(BookingStore::from_text(&text[..cut]).is_err(), "truncated at {cut}");
        }
        let flipped = text.replacen("alice", "alicf", 1);
        assert!(BookingStore::from_text(&flipped).is_err());
    }

    #[test]
    fn overlapping_file_is_rejected() {
        let mut body = String::from("roblab-booking 1\n");
        body.push_str(&format!("user a {} {} a\n", "00", "0".repeat(64)));
        body.push_str("slot a 2024-01-01T10:00:00Z 2024-01-01T11:00:00Z\n");
        body.push_str("slot a 2024-01-01T10:30:00Z 2024-01-01T11:30:00Z\n");
        let text = format!("{body}checksum {}\n", hex(&Sha256::digest(body.as_bytes())));
        assert!(matches!(BookingStore::from_text(&text), Err(BookingError::Parse { line: 4, .. })));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/booking.txt");
        assert_eq!(BookingStore::load(&path).unwrap(), BookingStore::new());
        let s = store();
        s.save(&path).unwrap();
        assert_eq!(BookingStore::load(&path).unwrap(), s);
    }
}
