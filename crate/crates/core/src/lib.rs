//! Core of the virtual robotics lab: floor model, robot simulator, overhead
//! vision pipeline, mapping and localization references, user plugin host,
//! session orchestration and the booking store.

pub mod booking;
pub mod clock;
pub mod config;
pub mod geometry;
pub mod mapping;
pub mod plugin;
pub mod robot;
pub mod session;
pub mod vision;
pub mod world;

pub use clock::SimTime;
pub use geometry::{wrap_angle, Pose2};
