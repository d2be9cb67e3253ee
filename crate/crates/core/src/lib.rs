//! Polarization-aware movable antenna (PAMA) simulation.
//!
//! The crate models line-of-sight links between half-wave dipoles whose
//! positions and orientations can be changed, and optimizes a multi-user
//! MISO downlink over those degrees of freedom:
//!
//! * [`geometry`]: vectors, spherical angles and the link angles.
//! * [`channel`]: dipole pattern, Fresnel reflection, matching efficiency
//!   and the complex channel matrix.
//! * [`mimo`]: zero-forcing precoding, water-filling and link metrics.
//! * [`optimizer`]: alternating projected gradient ascent over antenna
//!   orientations and positions.
//! * [`harness`]: seeded scenarios, the five antenna-movement
//!   configurations, Monte Carlo orientation studies and sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mimo;
pub mod optimizer;

pub use channel::{channel_matrix, element_gain, ChannelMatrix, MediumParams};
pub use error::{Error, Result};
pub use geometry::{AntennaPose, SphericalAngles, UnitVec3, Vec3};
pub use mimo::{BeamformingSolution, LinkMetrics, PowerAllocation, Precoder};

/// Converts a linear power ratio to decibels.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * from_db(dbm)
}
