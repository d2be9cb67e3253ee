//! Run configuration read from TOML. Every field has a default, so an
//! empty file (or no file) reproduces the reference parameter set.

use std::path::Path;

use pama_core::channel::{SPEED_OF_LIGHT, VACUUM_PERMEABILITY};
use pama_core::harness::{AngleSampling, ConfigurationId, MonteCarloOptions, ScenarioParams};
use pama_core::optimizer::OptimizerConfig;
use pama_core::{dbm_to_watts, MediumParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Relative tolerance of the `λ·f = c` consistency check.
const DISPERSION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    /// Carrier frequency in Hz; checked against `wavelength` when present.
    pub frequency_hz: Option<f64>,
    pub wavelength: f64,
    pub relative_permittivity: f64,
    pub permeability: f64,
    pub speed_of_light: f64,
    pub antenna_factor: f64,
    pub noise_power_dbm: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        MediumSection {
            frequency_hz: Some(30e9),
            wavelength: 0.01,
            relative_permittivity: 2.0,
            permeability: VACUUM_PERMEABILITY,
            speed_of_light: SPEED_OF_LIGHT,
            antenna_factor: 1.0,
            noise_power_dbm: -20.0,
        }
    }
}

impl MediumSection {
    pub fn params(&self) -> Result<MediumParams, CliError> {
        if let Some(f) = self.frequency_hz {
            let mismatch = (self.wavelength * f - self.speed_of_light).abs() / self.speed_of_light;
            if !(mismatch <= DISPERSION_TOL) {
                return Err(CliError::Usage(format!(
                    "wavelength {} m and frequency {f} Hz disagree with c = {} m/s by {:.3}%",
                    self.wavelength,
                    self.speed_of_light,
                    100.0 * mismatch
                )));
            }
        }
        let m = MediumParams {
            wavelength: self.wavelength,
            relative_permittivity: self.relative_permittivity,
            permeability: self.permeability,
            speed_of_light: self.speed_of_light,
            antenna_factor: self.antenna_factor,
            noise_power: dbm_to_watts(self.noise_power_dbm),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub users: usize,
    pub antennas: usize,
    pub total_power_w: f64,
    pub region_half_side_wavelengths: f64,
    pub user_cube_half_side_m: f64,
    /// Antenna-movement configuration used by `optimize`, 1 to 5.
    pub configuration: u8,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            users: 8,
            antennas: 8,
            total_power_w: 0.5,
            region_half_side_wavelengths: 100.0,
            user_cube_half_side_m: 100.0,
            configuration: 5,
            seed: 1,
            repetitions: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub samples: usize,
    pub grid_step_deg: f64,
    pub sampling: AngleSampling,
    /// Grid spacing of the `scenario1`/`scenario2` orientation maps.
    pub sweep_step_deg: f64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            samples: 1_000_000,
            grid_step_deg: 0.25,
            sampling: AngleSampling::UniformAngles,
            sweep_step_deg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub users: Vec<usize>,
    pub power_w: Vec<f64>,
    pub granularity_deg: Vec<f64>,
    pub convergence_users: Vec<usize>,
    pub configurations: Vec<u8>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            users: vec![1, 2, 4, 8],
            power_w: vec![0.1, 0.2, 0.5, 1.0, 2.0],
            granularity_deg: vec![0.0, 10.0, 20.0, 30.0, 45.0, 60.0, 80.0, 90.0],
            convergence_users: vec![8],
            configurations: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumSection,
    pub scenario: ScenarioSection,
    pub optimizer: OptimizerConfig,
    pub monte_carlo: MonteCarloSection,
    pub sweeps: SweepSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::parse(&text)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn scenario_params(&self) -> Result<ScenarioParams, CliError> {
        let s = &self.scenario;
        let p = ScenarioParams {
            medium: self.medium.params()?,
            users: s.users,
            antennas: s.antennas,
            total_power: s.total_power_w,
            region_half_side_wavelengths: s.region_half_side_wavelengths,
            user_cube_half_side: s.user_cube_half_side_m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn configuration(&self) -> Result<ConfigurationId, CliError> {
        Ok(ConfigurationId::new(self.scenario.configuration)?)
    }

    pub fn configurations(&self) -> Result<Vec<ConfigurationId>, CliError> {
        self.sweeps
            .configurations
            .iter()
            .map(|c| ConfigurationId::new(*c).map_err(CliError::from))
            .collect()
    }

    pub fn monte_carlo_options(&self) -> Result<MonteCarloOptions, CliError> {
        Ok(MonteCarloOptions {
            sampling: self.monte_carlo.sampling,
            grid_step_deg: self.monte_carlo.grid_step_deg,
            medium: self.medium.params()?,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.medium.params()?;
        self.optimizer.validate()?;
        self.configuration()?;
        self.configurations()?;
        Ok(())
    }
}
