//! Obstacle avoidance for multirotor UAVs using an artificial potential field
//! with translational and rotational repulsive components.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`] - static obstacle primitives and a ray-casting LiDAR model.
//! * [`pointcloud`] - Euclidean cluster extraction and centroids.
//! * [`trajectory`] - the global plan (rest-to-rest trapezoidal profiles through waypoints).
//! * [`apf`] - repulsive forces and the follow/avoid supervisor.
//! * [`qp`] / [`mpc`] - a dense dual active-set QP solver and the constant-snap MPC tracker.
//! * [`sim`] - the closed loop, traces, metrics and local-minimum detection.
//! * [`config`], [`trace`], [`plot`] - scenario files, trace/metrics files and SVG plots.

pub mod apf;
pub mod config;
pub mod error;
pub mod mpc;
pub mod plot;
pub mod pointcloud;
pub mod qp;
pub mod scene;
pub mod sim;
pub mod trace;
pub mod trajectory;

pub use error::{Error, Result};

/// Cartesian vector in metres (world frame, z up).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Planar vector in metres.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * ((angle + PI) / two_pi).floor();
    // floor() rounding can land exactly on +pi
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}
