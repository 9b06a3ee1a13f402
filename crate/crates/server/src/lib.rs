//! Framed teleoperation server for the virtual robotics lab.

pub mod actor;
pub mod client;
pub mod config;
mod conn;
pub mod frame;
pub mod layout;
pub mod queue;
pub mod registry;
pub mod server;
pub mod transfer;

pub use client::{Client, ClientError};
pub use config::ServerConfig;
pub use conn::{Clock, Shared};
pub use frame::{Frame, FrameType, Reason};
pub use layout::{MapFrame, StateFrame};
pub use server::Server;
