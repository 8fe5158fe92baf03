//! Multi-target tracking in the AP-local frame.
//!
//! State is `[x, y, vx, vy]` with x along boresight and y to its left, so
//! an observation at range d and azimuth θ (degrees, counter-clockwise)
//! sits at `(d cos θ, d sin θ)`. Each track runs an EKF over a
//! constant-velocity model; observations are assigned by gated greedy
//! global nearest neighbour.

mod associate;
mod ekf;
mod tracker;

pub use associate::{associate, Association};
pub use ekf::{
    cartesian, innovation, measurement, measurement_jacobian, predict, transition, update,
    TrackState,
};
pub use tracker::{Observation, Track, TrackStatus, Tracker, TrackerConfig};
