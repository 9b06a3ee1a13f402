#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{DateTime, Utc};
use roblab_core::booking::BookingStore;
use roblab_server::{Client, Frame, FrameType, Server, ServerConfig, Shared};
use tempfile::TempDir;
use tokio::sync::oneshot;

pub const PASSWORD: &str = "correct horse";

pub struct Lab {
    pub tcp: SocketAddr,
    pub ws: SocketAddr,
    pub shared: Arc<Shared>,
    pub dir: TempDir,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Lab {
    pub fn start(store: &BookingStore) -> Self {
        Self::start_with(store, |_| {})
    }

    pub fn start_with(store: &BookingStore, tweak: impl FnOnce(&mut ServerConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServerConfig::with_data_dir(dir.path());
        config.tcp_addr = "127.0.0.1:0".parse().unwrap();
        config.ws_addr = "127.0.0.1:0".parse().unwrap();
        tweak(&mut config);
        store.save(&config.booking_path).unwrap();
        let shared = Shared::new(config, store.clone());
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop, stop_rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let server = Server::bind(shared).await.unwrap();
                addr_tx.send((server.tcp_addr(), server.ws_addr(), server.shared())).unwrap();
                server.run_until(async { let _ = stop_rx.await; }).await;
            });
        });
        let (tcp, ws, shared) = addr_rx.recv().unwrap();
        Self { tcp, ws, shared, dir, stop: Some(stop), thread: Some(thread) }
    }

    pub fn client(&self) -> Client {
        Client::connect(self.tcp).unwrap()
    }

    pub fn data_dir(&self) -> &Path {
        self.dir.path()
    }

    pub fn save_store(&self, store: &BookingStore) {
        store.save(&self.shared.config.booking_path).unwrap();
    }

    /// Shuts the server down and hands back its data directory.
    pub fn stop(mut self) -> TempDir {
        self.shutdown();
        std::mem::replace(&mut self.dir, tempfile::tempdir().unwrap())
    }

    fn shutdown(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for Lab {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// A store with `alice` booked around now and `bob` without a slot.
pub fn store_with_users() -> BookingStore {
    let mut rng = rand::rng();
    let mut s = BookingStore::new();
    s.add_user("alice", PASSWORD, &mut rng).unwrap();
    s.add_user("bob", PASSWORD, &mut rng).unwrap();
    let now = Utc::now();
    s.reserve("alice", now - chrono::Duration::hours(1), now + chrono::Duration::hours(1)).unwrap();
    s
}

pub fn hour_ago() -> DateTime<Utc> {
    Utc::now() - chrono::Duration::hours(1)
}

/// Collects frames for `window`, stashed pushes first.
pub fn collect(c: &mut Client, window: Duration) -> Vec<Frame> {
    let deadline = std::time::Instant::now() + window;
    let mut out = c.take_pushed();
    loop {
        let left = deadline.saturating_duration_since(std::time::Instant::now());
        if left.is_zero() {
            return out;
        }
        match c.recv_wire(left).unwrap() {
            Some(f) => out.push(f),
            None => return out,
        }
    }
}

pub fn count(frames: &[Frame], kind: FrameType) -> usize {
    frames.iter().filter(|f| f.frame_type() == Some(kind)).count()
}

/// Logs in, retrying while a previous connection of the same user winds down.
pub fn auth_retrying(lab: &Lab, user: &str, pw: &str) -> Client {
    for _ in 0..100 {
        let mut c = lab.client();
        match c.auth(user, pw) {
            Ok(_) => return c,
            Err(e) if e.reason() == Some("busy") => std::thread::sleep(Duration::from_millis(20)),
            Err(e) => panic!("auth failed: {e}"),
        }
    }
    panic!("user stayed busy");
}
