//! Point-cloud pose tracking of rigid and articulated objects with an
//! unscented Kalman filter on SE(3), plus segmentation, interactive joint-type
//! detection, goal-driven pushing, benchmarking and a kinematic simulator.

pub mod articulation;
pub mod bench;
pub mod cloud;
pub mod config;
pub mod controller;
pub mod error;
pub mod liegroup;
pub mod mukf;
pub mod registration;
pub mod segmentation;
pub mod sim;

pub use error::{Error, Result};
