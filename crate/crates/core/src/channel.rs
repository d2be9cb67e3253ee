//! Closed-form line-of-sight channel between rotatable, translatable
//! half-wave dipoles.
//!
//! A link gain is the product of four factors:
//!
//! ```text
//! h = G(|p_r|) * F(theta_e) * M(theta_i, alpha) * exp(j k p_r.p_t / |p_r|)
//! G = (2 j c mu / A_F) * exp(-j k |p_r|) / (4 pi |p_r|)
//! ```
//!
//! with `k = 2 pi / lambda`, `F` the dipole radiation factor and `M` the
//! polarization matching efficiency that accounts for the Fresnel
//! reflection at the receiving element. All angles use the far-field
//! (plane wave) forms, so transmit translation only enters the phase.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AntennaPose, UnitVec3, Vec3};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMEABILITY: f64 = 4.0 * PI * 1e-7;

/// Radicands of `M` above this (in magnitude) are treated as rounding noise.
const RADICAND_CLAMP: f64 = 1e-12;
const DEGENERATE_SIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Permittivity of the antenna material relative to air.
    pub relative_permittivity: f64,
    /// Permeability of air, H/m.
    pub permeability: f64,
    pub speed_of_light: f64,
    /// Field-to-voltage conversion factor.
    pub antenna_factor: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
}

impl Default for MediumParams {
    /// 30 GHz carrier, εr = 2, A_F = 1, σ² = −20 dBm.
    fn default() -> Self {
        MediumParams {
            wavelength: 0.01,
            relative_permittivity: 2.0,
            permeability: VACUUM_PERMEABILITY,
            speed_of_light: SPEED_OF_LIGHT,
            antenna_factor: 1.0,
            noise_power: 1e-5,
        }
    }
}

impl MediumParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.wavelength, 0.0, "wavelength"),
            (self.relative_permittivity, 1.0, "relative_permittivity"),
            (self.permeability, 0.0, "permeability"),
            (self.speed_of_light, 0.0, "speed_of_light"),
            (self.antenna_factor, 0.0, "antenna_factor"),
            (self.noise_power, 0.0, "noise_power"),
        ];
        for (value, lower, name) in checks {
            if !(value.is_finite() && value > lower) {
                return Err(Error::Config(format!("{name} must be finite and > {lower}, got {value}")));
            }
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Half-wave dipole pattern `cos(π/2 cos θ) / sin θ`, zero on the axis.
pub fn radiation_factor(theta_e: f64) -> f64 {
    let (s, c) = theta_e.sin_cos();
    radiation_factor_from(c, s.abs())
}

fn radiation_factor_from(cos_theta: f64, sin_theta: f64) -> f64 {
    if sin_theta <= DEGENERATE_SIN {
        return 0.0;
    }
    (FRAC_PI_2 * cos_theta).cos() / sin_theta
}

/// Signed Fresnel reflection coefficients `(Γ∥, Γ⊥)` at the air/antenna
/// boundary for equal permeabilities.
pub fn reflection_coefficients(theta_i: f64, medium: &MediumParams) -> (f64, f64) {
    let er = medium.relative_permittivity;
    let c = theta_i.cos().max(0.0);
    let root = (er - 1.0 + c * c).sqrt();
    let parallel = (root - er * c) / (root + er * c);
    let perpendicular = (root - c) / (root + c);
    (parallel, perpendicular)
}

/// Polarization matching efficiency `sqrt(1 − Γ∥² cos²α − Γ⊥² sin²α)`.
pub fn matching_efficiency(theta_i: f64, alpha: f64, medium: &MediumParams) -> Result<f64> {
    let (par, perp) = reflection_coefficients(theta_i, medium);
    let (sa, ca) = alpha.sin_cos();
    matching_from(par, perp, ca, sa)
}

/// Matching efficiency from reflection coefficients and the matching angle.
pub fn matching_from(par: f64, perp: f64, cos_alpha: f64, sin_alpha: f64) -> Result<f64> {
    let radicand = 1.0 - par * par * cos_alpha * cos_alpha - perp * perp * sin_alpha * sin_alpha;
    if radicand < -RADICAND_CLAMP {
        return Err(Error::Numerical(format!("matching radicand {radicand:.3e} is negative")));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Receiver-side quantities shared by every transmit antenna.
#[derive(Debug, Clone, Copy)]
struct ReceiverTerms {
    distance: f64,
    direction: Vec3,
    orientation: Vec3,
    theta_i: f64,
    gamma_parallel: f64,
    gamma_perpendicular: f64,
    common: Complex64,
}

impl ReceiverTerms {
    fn new(rx: &AntennaPose, medium: &MediumParams) -> Result<Self> {
        let distance = rx.position.norm();
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::Domain("receiver at the origin"));
        }
        let direction = rx.position * (1.0 / distance);
        let orientation = rx.orientation.as_vec();
        let theta_i = (direction.dot(orientation).abs()).min(1.0).asin();
        let (gamma_parallel, gamma_perpendicular) = reflection_coefficients(theta_i, medium);
        let k = medium.wavenumber();
        let amplitude = 2.0 * medium.speed_of_light * medium.permeability
            / (medium.antenna_factor * 4.0 * PI * distance);
        // 2j * e^{-jkr}
        let common = Complex64::new(0.0, amplitude) * Complex64::from_polar(1.0, -k * distance);
        Ok(ReceiverTerms {
            distance,
            direction,
            orientation,
            theta_i,
            gamma_parallel,
            gamma_perpendicular,
            common,
        })
    }

    fn gain(&self, tx: &AntennaPose, medium: &MediumParams) -> Result<LinkBreakdown> {
        let u = self.direction;
        let nt = tx.orientation.as_vec();
        let cos_e = u.dot(nt).clamp(-1.0, 1.0);
        let transverse = nt - u * cos_e;
        let sin_e = transverse.norm();
        let theta_e = sin_e.atan2(cos_e);
        let phase = medium.wavenumber() * u.dot(tx.position);

        let mut out = LinkBreakdown {
            gain: Complex64::new(0.0, 0.0),
            distance: self.distance,
            emission_angle: theta_e,
            incident_angle: self.theta_i,
            matching_angle: None,
            gamma_parallel: self.gamma_parallel,
            gamma_perpendicular: self.gamma_perpendicular,
            radiation_factor: 0.0,
            matching_efficiency: None,
        };
        if sin_e <= DEGENERATE_SIN {
            // transmit axis points along the path: no field, no polarization
            return Ok(out);
        }
        let n_e = transverse * (1.0 / sin_e);
        let cos_a = n_e.dot(self.orientation).clamp(-1.0, 1.0);
        let sin_a = n_e.cross(self.orientation).norm();
        let m = matching_from(self.gamma_parallel, self.gamma_perpendicular, cos_a, sin_a)?;
        let f = radiation_factor_from(cos_e, sin_e);

        out.radiation_factor = f;
        out.matching_angle = Some(sin_a.atan2(cos_a));
        out.matching_efficiency = Some(m);
        out.gain = self.common * Complex64::from_polar(f * m, phase);
        Ok(out)
    }
}

/// Every intermediate of one link evaluation; `matching_*` are `None`
/// when the transmit axis is parallel to the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBreakdown {
    pub gain: Complex64,
    pub distance: f64,
    pub emission_angle: f64,
    pub incident_angle: f64,
    pub matching_angle: Option<f64>,
    pub gamma_parallel: f64,
    pub gamma_perpendicular: f64,
    pub radiation_factor: f64,
    pub matching_efficiency: Option<f64>,
}

pub fn link_breakdown(tx: &AntennaPose, rx: &AntennaPose, medium: &MediumParams) -> Result<LinkBreakdown> {
    ReceiverTerms::new(rx, medium)?.gain(tx, medium)
}

/// Complex channel gain from `tx` to `rx`.
pub fn element_gain(tx: &AntennaPose, rx: &AntennaPose, medium: &MediumParams) -> Result<Complex64> {
    Ok(link_breakdown(tx, rx, medium)?.gain)
}

/// Users-by-antennas matrix of link gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
}

impl ChannelMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() > entries.ncols() {
            return Err(Error::TooManyUsers {
                users: entries.nrows(),
                antennas: entries.ncols(),
            });
        }
        Ok(ChannelMatrix { entries })
    }

    pub fn users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, user: usize, antenna: usize) -> Complex64 {
        self.entries[(user, antenna)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }
}

pub fn channel_matrix(
    tx_poses: &[AntennaPose],
    rx_poses: &[AntennaPose],
    medium: &MediumParams,
) -> Result<ChannelMatrix> {
    let (k, l) = (rx_poses.len(), tx_poses.len());
    if k == 0 || k > l {
        return Err(Error::TooManyUsers { users: k, antennas: l });
    }
    let mut entries = DMatrix::zeros(k, l);
    for (row, rx) in rx_poses.iter().enumerate() {
        let terms = ReceiverTerms::new(rx, medium)?;
        for (col, tx) in tx_poses.iter().enumerate() {
            entries[(row, col)] = terms.gain(tx, medium)?.gain;
        }
    }
    Ok(ChannelMatrix { entries })
}

/// Squared channel magnitude for a single link, used by orientation sweeps.
pub fn link_power(tx: &AntennaPose, rx: &AntennaPose, medium: &MediumParams) -> Result<f64> {
    Ok(element_gain(tx, rx, medium)?.norm_sqr())
}

/// Orientation that maximizes the radiation factor toward `rx`: the
/// receive axis projected onto the plane transverse to the path, or any
/// transverse axis when the receive axis lies along the path.
pub fn broadside_orientation(rx: &AntennaPose) -> Result<UnitVec3> {
    let u = UnitVec3::normalize(rx.position)?.as_vec();
    let n = rx.orientation.as_vec();
    let t = n - u * n.dot(u);
    if t.norm() > 1e-9 {
        return UnitVec3::normalize(t);
    }
    let helper = if u.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    UnitVec3::normalize(helper - u * helper.dot(u))
}
