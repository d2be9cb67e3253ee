//! Vector geometry of dipole antennas.
//!
//! Positions live in a right-handed Cartesian frame with unit vectors
//! `i`, `j`, `k`. Antenna axes are unit vectors, parameterized by a polar
//! angle measured from `k` and an azimuthal angle measured counterclockwise
//! from `i` in the `xy` plane.
//!
//! The four angles that drive the channel model are computed here:
//!
//! * emission angle between the transmit axis and the propagation direction,
//! * incident angle between the incoming wave and the receiver surface normal,
//! * transmitted (refracted) angle inside the receiving element,
//! * polarization matching angle between the incident field and the receive axis.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::channel::MediumParams;
use crate::error::{Error, Result};

/// Norms below this are treated as zero-length directions.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Largest absolute component (Chebyshev norm).
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction of unit Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `v`; fails for zero-length or non-finite input.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < DEGENERATE_NORM {
            return Err(Error::Domain("cannot normalize a zero-length or non-finite vector"));
        }
        Ok(UnitVec3(v * (1.0 / n)))
    }

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::normalize(Vec3::new(x, y, z))
    }

    pub fn as_vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0.dot(other)
    }
}

impl TryFrom<Vec3> for UnitVec3 {
    type Error = Error;
    fn try_from(v: Vec3) -> Result<Self> {
        UnitVec3::normalize(v)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// Polar angle in `[0, π]` and azimuthal angle in `[0, 2π)`, both radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalAngles {
    pub polar: f64,
    pub azimuthal: f64,
}

impl SphericalAngles {
    /// Folds arbitrary real angles into the canonical ranges while
    /// describing the same direction.
    pub fn wrapped(polar: f64, azimuthal: f64) -> Self {
        let mut polar = polar.rem_euclid(TAU);
        let mut azimuthal = azimuthal;
        if polar > PI {
            polar = TAU - polar;
            azimuthal += PI;
        }
        SphericalAngles {
            polar,
            azimuthal: wrap_azimuth(azimuthal),
        }
    }

    pub fn to_unit(self) -> UnitVec3 {
        spherical_to_cartesian(self)
    }

    pub fn from_unit(v: UnitVec3) -> Self {
        cartesian_to_spherical(v)
    }
}

fn wrap_azimuth(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPose {
    pub position: Vec3,
    pub orientation: UnitVec3,
}

impl AntennaPose {
    pub fn new(position: Vec3, orientation: UnitVec3) -> Self {
        AntennaPose {
            position,
            orientation,
        }
    }

    pub fn with_angles(position: Vec3, angles: SphericalAngles) -> Self {
        AntennaPose::new(position, angles.to_unit())
    }
}

pub fn spherical_to_cartesian(angles: SphericalAngles) -> UnitVec3 {
    let (st, ct) = angles.polar.sin_cos();
    let (sp, cp) = angles.azimuthal.sin_cos();
    UnitVec3(Vec3::new(st * cp, st * sp, ct))
}

/// Inverse of [`spherical_to_cartesian`]. At the poles the azimuth is 0.
pub fn cartesian_to_spherical(v: UnitVec3) -> SphericalAngles {
    let v = v.as_vec();
    let rho = v.x.hypot(v.y);
    let polar = rho.atan2(v.z);
    let azimuthal = if rho == 0.0 { 0.0 } else { wrap_azimuth(v.y.atan2(v.x)) };
    SphericalAngles { polar, azimuthal }
}

fn angle_between_unit(a: Vec3, b: Vec3) -> f64 {
    // atan2 form stays accurate near 0 and π where acos loses digits
    a.cross(b).norm().atan2(a.dot(b))
}

/// Emission angle of `tx` toward `observation`.
///
/// With `far_field` set the propagation direction is taken as the
/// observation vector itself (the plane-wave approximation used by the
/// channel model); otherwise it is `observation - tx.position`.
pub fn emission_angle(observation: Vec3, tx: &AntennaPose, far_field: bool) -> Result<f64> {
    let path = if far_field {
        observation
    } else {
        observation - tx.position
    };
    let dir = UnitVec3::normalize(path)
        .map_err(|_| Error::Domain("observation point coincides with the emission reference"))?;
    Ok(angle_between_unit(dir.as_vec(), tx.orientation.as_vec()))
}

/// Unit normal of the receiving element facing the incoming wave: the
/// receiver position with its axial component removed.
pub fn receiver_normal(rx: &AntennaPose) -> Result<UnitVec3> {
    let n = rx.orientation.as_vec();
    let p = rx.position;
    let stripped = p - n * p.dot(n);
    if stripped.norm() <= DEGENERATE_NORM * p.norm().max(1.0) {
        return Err(Error::DegenerateGeometry(
            "receiver position is parallel to its orientation",
        ));
    }
    UnitVec3::normalize(stripped)
}

/// Incident angle in `[0, π/2]`. The sign of the axial projection is
/// dropped, so antiparallel orientations give the same angle.
pub fn incident_angle(rx: &AntennaPose) -> Result<f64> {
    let r = rx.position.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Domain("receiver at the origin"));
    }
    let s = (rx.position.dot(rx.orientation.as_vec()).abs() / r).min(1.0);
    Ok(s.asin())
}

/// Refraction angle inside the receiving element (equal permeabilities).
pub fn transmitted_angle(theta_i: f64, medium: &MediumParams) -> Result<f64> {
    if !(medium.relative_permittivity > 1.0) {
        return Err(Error::Config(format!(
            "relative permittivity must exceed 1, got {}",
            medium.relative_permittivity
        )));
    }
    if !(0.0..=FRAC_PI_2).contains(&theta_i) {
        return Err(Error::Domain("incident angle outside [0, pi/2]"));
    }
    Ok((theta_i.sin() / medium.relative_permittivity.sqrt()).asin())
}

/// Polarization direction of the far field radiated by `tx` at
/// `observation`: the transmit axis with its component along the
/// propagation direction removed.
pub fn polarization_direction(tx: &AntennaPose, observation: Vec3) -> Result<UnitVec3> {
    let u = UnitVec3::normalize(observation)
        .map_err(|_| Error::Domain("observation point at the origin"))?
        .as_vec();
    let n = tx.orientation.as_vec();
    let stripped = n - u * n.dot(u);
    if stripped.norm() <= DEGENERATE_NORM {
        return Err(Error::DegeneratePolarization);
    }
    UnitVec3::normalize(stripped)
}

/// Angle in `[0, π]` between the incident polarization and the receive axis.
pub fn polarization_matching_angle(tx: &AntennaPose, rx: &AntennaPose) -> Result<f64> {
    let n_e = polarization_direction(tx, rx.position)?;
    Ok(angle_between_unit(n_e.as_vec(), rx.orientation.as_vec()))
}
