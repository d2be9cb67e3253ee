//! Downlink MU-MISO processing on top of a [`ChannelMatrix`].
//!
//! Zero-forcing precoding `W' = Hᴴ(HHᴴ)⁻¹` with unit-norm columns makes
//! the effective channel `HW` diagonal with entries `1/|w'_κ|`, after which
//! the power budget is split by water-filling over the per-user SNRs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Channels whose condition number exceeds this are rejected as singular.
pub const MAX_CONDITION: f64 = 1e12;
const BISECTION_ITERATIONS: usize = 200;

/// Antennas-by-users beamforming matrix with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    columns: DMatrix<Complex64>,
    /// Effective gain `1/|w'_κ|` of each user after zero forcing.
    effective_gains: Vec<f64>,
}

impl Precoder {
    /// Normalizes the columns of an arbitrary precoding matrix.
    pub fn from_columns(mut columns: DMatrix<Complex64>) -> Result<Self> {
        let mut effective_gains = Vec::with_capacity(columns.ncols());
        for mut col in columns.column_iter_mut() {
            let n = col.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Numerical("precoder column has zero or non-finite norm".into()));
            }
            col.unscale_mut(n);
            effective_gains.push(1.0 / n);
        }
        Ok(Precoder {
            columns,
            effective_gains,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn effective_gains(&self) -> &[f64] {
        &self.effective_gains
    }

    pub fn users(&self) -> usize {
        self.columns.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub total_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    /// Bits per symbol, `½ log₂(1 + γ)`.
    pub rates: Vec<f64>,
    /// `(Π(1 + γ_κ))^{1/K} − 1`.
    pub total_sinr: f64,
    pub average_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub precoder: Precoder,
    pub power: PowerAllocation,
    pub metrics: LinkMetrics,
}

/// Ratio of extreme singular values of `h`.
pub fn condition_number(h: &DMatrix<Complex64>) -> f64 {
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub fn zf_precoder(h: &ChannelMatrix) -> Result<Precoder> {
    let h = h.as_matrix();
    let condition = condition_number(h);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularChannel { condition });
    }
    let h_adj = h.adjoint();
    let gram = h * &h_adj;
    let inverse = gram
        .cholesky()
        .ok_or(Error::SingularChannel { condition })?
        .inverse();
    Precoder::from_columns(h_adj * inverse)
}

/// Water-filling over parallel channels with effective amplitude gains
/// `diag_gains` (per-unit-power SNR `g²/σ²`).
///
/// The water level is found by bisection on `[0, P + Σ σ²/g²]`; the tiny
/// residual left by bisection is spread over the active users so the
/// budget is met exactly.
pub fn water_filling(diag_gains: &[f64], total_power: f64, noise_power: f64) -> Result<PowerAllocation> {
    if diag_gains.is_empty() {
        return Err(Error::Config("water-filling needs at least one user".into()));
    }
    if !(total_power > 0.0 && total_power.is_finite()) || !(noise_power > 0.0) {
        return Err(Error::Config(format!(
            "power {total_power} and noise {noise_power} must be positive"
        )));
    }
    if diag_gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::Config("effective gains must be positive and finite".into()));
    }
    let floors: Vec<f64> = diag_gains.iter().map(|g| noise_power / (g * g)).collect();
    let filled = |level: f64| floors.iter().map(|f| (level - f).max(0.0)).sum::<f64>();

    let (mut lo, mut hi) = (0.0, total_power + floors.iter().sum::<f64>());
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if filled(mid) > total_power {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let level = 0.5 * (lo + hi);
    let mut powers: Vec<f64> = floors.iter().map(|f| (level - f).max(0.0)).collect();
    let active = powers.iter().filter(|p| **p > 0.0).count();
    let residual = total_power - powers.iter().sum::<f64>();
    if active > 0 {
        let share = residual / active as f64;
        for p in powers.iter_mut().filter(|p| **p > 0.0) {
            *p = (*p + share).max(0.0);
        }
    }
    Ok(PowerAllocation {
        powers,
        total_power,
    })
}

/// Per-user SINR with the full interference sum, so it applies to any
/// precoder, not only zero forcing.
pub fn link_metrics(
    h: &ChannelMatrix,
    w: &Precoder,
    alloc: &PowerAllocation,
    noise_power: f64,
) -> Result<LinkMetrics> {
    let k = h.users();
    if w.users() != k || alloc.powers.len() != k || w.matrix().nrows() != h.antennas() {
        return Err(Error::Config(format!(
            "dimension mismatch: {} users, precoder {}x{}, {} powers",
            k,
            w.matrix().nrows(),
            w.users(),
            alloc.powers.len()
        )));
    }
    let effective = h.as_matrix() * w.matrix();
    let sinr: Vec<f64> = (0..k)
        .map(|user| {
            let signal = alloc.powers[user] * effective[(user, user)].norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&j| j != user)
                .map(|j| alloc.powers[j] * effective[(user, j)].norm_sqr())
                .sum();
            signal / (noise_power + interference)
        })
        .collect();
    Ok(metrics_from_sinr(sinr))
}

pub fn metrics_from_sinr(sinr: Vec<f64>) -> LinkMetrics {
    let rates = sinr.iter().map(|g| 0.5 * g.ln_1p() / std::f64::consts::LN_2).collect();
    let mean_log = sinr.iter().map(|g| g.ln_1p()).sum::<f64>() / sinr.len() as f64;
    let total_sinr = mean_log.exp_m1();
    LinkMetrics {
        sinr,
        rates,
        total_sinr,
        average_rate: 0.5 * total_sinr.ln_1p() / std::f64::consts::LN_2,
    }
}

/// Zero forcing, water-filling and metrics in one pass.
pub fn beamform(h: &ChannelMatrix, total_power: f64, noise_power: f64) -> Result<BeamformingSolution> {
    let precoder = zf_precoder(h)?;
    let power = water_filling(precoder.effective_gains(), total_power, noise_power)?;
    let metrics = link_metrics(h, &precoder, &power, noise_power)?;
    Ok(BeamformingSolution {
        precoder,
        power,
        metrics,
    })
}
