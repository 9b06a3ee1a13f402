//! User and slot administration on the booking store file.

use std::path::Path;

use chrono::{DateTime, Utc};
use roblab_core::booking::BookingStore;

use crate::error::CliError;

fn load(path: &Path) -> Result<BookingStore, CliError> {
    BookingStore::load(path).map_err(|e| CliError::new("booking", e.to_string()))
}

fn save(path: &Path, store: &BookingStore) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
    }
    store.save(path).map_err(|e| CliError::new("booking", e.to_string()))
}

pub fn parse_time(s: &str) -> Result<DateTime<Utc>, CliError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| CliError::usage("bad-time", format!("{s:?}: {e}")))
}

pub fn add_user(path: &Path, name: &str, password: &str) -> Result<(), CliError> {
    let mut store = load(path)?;
    store.add_user(name, password, &mut rand::rng()).map_err(|e| CliError::new("booking", e.to_string()))?;
    save(path, &store)
}

pub fn remove_user(path: &Path, name: &str) -> Result<(), CliError> {
    let mut store = load(path)?;
    store.remove_user(name).map_err(|e| CliError::new("booking", e.to_string()))?;
    save(path, &store)
}

pub fn list_users(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(load(path)?.users().map(|u| u.name.clone()).collect())
}

pub fn reserve(path: &Path, user: &str, start: &str, end: &str) -> Result<String, CliError> {
    let mut store = load(path)?;
    let slot = store.reserve(user, parse_time(start)?, parse_time(end)?).map_err(|e| CliError::new("booking", e.to_string()))?;
    save(path, &store)?;
    Ok(slot.to_string())
}

pub fn cancel(path: &Path, user: &str, start: &str) -> Result<String, CliError> {
    let mut store = load(path)?;
    let slot = store.cancel(user, parse_time(start)?).map_err(|e| CliError::new("booking", e.to_string()))?;
    save(path, &store)?;
    Ok(slot.to_string())
}

pub fn list_slots(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(load(path)?.slots().iter().map(ToString::to_string).collect())
}
