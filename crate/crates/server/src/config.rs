//! Server settings (TOML) with environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use roblab_core::config::{ConfigError, LabConfig};
use serde::{Deserialize, Serialize};

pub const ENV_TCP_ADDR: &str = "ROBLAB_TCP_ADDR";
pub const ENV_WS_ADDR: &str = "ROBLAB_WS_ADDR";
pub const ENV_DATA_DIR: &str = "ROBLAB_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    pub data_dir: PathBuf,
    pub booking_path: PathBuf,
    pub state_period_ms: u64,
    pub map_min_period_ms: u64,
    pub queue_capacity: usize,
    pub lab: LabConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            tcp_addr: "127.0.0.1:7420".parse().unwrap(),
            ws_addr: "127.0.0.1:7421".parse().unwrap(),
            data_dir: PathBuf::from("data"),
            booking_path: PathBuf::from("data/booking.txt"),
            state_period_ms: 100,
            map_min_period_ms: 200,
            queue_capacity: 64,
            lab: LabConfig::default(),
        }
    }
}

impl ServerConfig {
    /// Data directory rooted config with the booking store inside it.
    pub fn with_data_dir(dir: &Path) -> Self {
        Self { data_dir: dir.to_path_buf(), booking_path: dir.join("booking.txt"), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.state_period_ms == 0 || self.queue_capacity == 0 {
            return Err(ConfigError::Invalid("state period and queue capacity must be positive".into()));
        }
        self.lab.validate()
    }

    /// Applies `ROBLAB_TCP_ADDR`, `ROBLAB_WS_ADDR` and `ROBLAB_DATA_DIR`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let addr = |key: &str, v: String| v.parse::<SocketAddr>().map_err(|e| ConfigError::Invalid(format!("{key}={v}: {e}")));
        if let Some(v) = get(ENV_TCP_ADDR) {
            self.tcp_addr = addr(ENV_TCP_ADDR, v)?;
        }
        if let Some(v) = get(ENV_WS_ADDR) {
            self.ws_addr = addr(ENV_WS_ADDR, v)?;
        }
        if let Some(v) = get(ENV_DATA_DIR) {
            let dir = PathBuf::from(v);
            if self.booking_path.starts_with(&self.data_dir) {
                self.booking_path = dir.join(self.booking_path.strip_prefix(&self.data_dir).unwrap());
            }
            self.data_dir = dir;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut c = ServerConfig::from_toml("").unwrap();
        assert_eq!(c.ws_addr.port(), 7421);
        let env = |k: &str| match k {
            ENV_WS_ADDR => Some("0.0.0.0:9000".to_string()),
            ENV_DATA_DIR => Some("/srv/lab".to_string()),
            _ => None,
        };
        c.apply_env(env).unwrap();
        assert_eq!(c.ws_addr.port(), 9000);
        assert_eq!(c.booking_path, PathBuf::from("/srv/lab/booking.txt"));
        assert!(c.apply_env(|_| Some("nonsense".into())).is_err());
    }

    #[test]
    fn nested_lab_section() {
        let c = ServerConfig::from_toml("state_period_ms = 50\n[lab]\nseed = 3\n").unwrap();
        assert_eq!((c.state_period_ms, c.lab.seed), (50, Some(3)));
        assert!(ServerConfig::from_toml("port = 1").is_err());
    }
}
