//! Reference solutions of the lab exercises: sonar occupancy-grid mapping,
//! multi-sensor evidence fusion, dead reckoning and Kalman correction from
//! vision fixes. The example controller built from them is what the
//! `example` user runs.

mod dead_reckoning;
pub mod ekf;
mod example;
mod inverse_model;
mod localizer;

pub use dead_reckoning::{DeadReckoning, MotionSample, OdometryNoise, OdometrySource};
pub use ekf::{kalman_predict, kalman_update, FilterError, FilterState, OdometryDelta};
pub use example::ExampleController;
pub use inverse_model::{fuse_measurements, update_grid, InverseSonarModel, SonarReading};
pub use localizer::{FusionTuning, Localizer};
