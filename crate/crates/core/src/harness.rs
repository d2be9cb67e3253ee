//! Seeded experiments: scenario drops, the five antenna-movement
//! configurations, orientation Monte Carlo and parameter sweeps.
//!
//! Every random quantity comes from a ChaCha stream keyed by
//! `(seed, stream)`, so a record depends only on its scenario seed and not
//! on how work is scheduled across threads.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{link_power, MediumParams};
use crate::error::{Error, Result};
use crate::geometry::{AntennaPose, SphericalAngles, UnitVec3, Vec3};
use crate::optimizer::{
    evaluate, optimize, quantize_angles, Constraints, LayoutVariables, LinkProblem, OptimizationOutcome,
    OptimizeFlags, OptimizerConfig,
};
use crate::to_db;

const USER_STREAM: u64 = 0;
const LAYOUT_STREAM: u64 = 1;
/// Users closer than this to the origin are redrawn, meters.
const MIN_USER_DISTANCE: f64 = 1.0;
const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Receiver used by the orientation Monte Carlo studies.
pub const REFERENCE_RX_POSITION: Vec3 = Vec3::new(75.0, -40.0, 50.0);
const MONTE_CARLO_CHUNK: usize = 1 << 16;

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of repetition `index` under a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = stream_rng(base, index.wrapping_add(1 << 32));
    rng.random()
}

fn sphere_direction<R: Rng>(rng: &mut R) -> UnitVec3 {
    let v: [f64; 3] = UnitSphere.sample(rng);
    UnitVec3::normalize(v.into()).expect("unit sphere sample")
}

/// `count` users uniform in the cube `[-h, h]³`, each with a uniformly
/// random antenna axis.
pub fn generate_users(count: usize, cube_half_side: f64, seed: u64) -> Result<Vec<AntennaPose>> {
    if count == 0 {
        return Err(Error::Config("at least one user is required".into()));
    }
    if !(cube_half_side > MIN_USER_DISTANCE) {
        return Err(Error::Config(format!("user cube half-side {cube_half_side} must exceed 1 m")));
    }
    let mut rng = stream_rng(seed, USER_STREAM);
    let mut users = Vec::with_capacity(count);
    while users.len() < count {
        let p = Vec3::new(
            rng.random_range(-cube_half_side..=cube_half_side),
            rng.random_range(-cube_half_side..=cube_half_side),
            rng.random_range(-cube_half_side..=cube_half_side),
        );
        if p.norm() < MIN_USER_DISTANCE {
            continue;
        }
        users.push(AntennaPose::new(p, sphere_direction(&mut rng)));
    }
    Ok(users)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub medium: MediumParams,
    pub users: usize,
    pub antennas: usize,
    /// Transmit power budget, watts.
    pub total_power: f64,
    /// Half-side of the movable region in wavelengths.
    pub region_half_side_wavelengths: f64,
    /// Half-side of the user coverage cube, meters.
    pub user_cube_half_side: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            medium: MediumParams::default(),
            users: 8,
            antennas: 8,
            total_power: 0.5,
            region_half_side_wavelengths: 100.0,
            user_cube_half_side: 100.0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        if self.users == 0 || self.users > self.antennas {
            return Err(Error::TooManyUsers {
                users: self.users,
                antennas: self.antennas,
            });
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(Error::Config("total power must be positive".into()));
        }
        if !(self.region_half_side_wavelengths >= 0.0) {
            return Err(Error::Config("region half-side must be non-negative".into()));
        }
        Constraints::for_medium(&self.medium, self.region_half_side_wavelengths).validate(self.antennas)
    }
}

/// One random drop of users together with the random transmit layout that
/// every configuration starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub medium: MediumParams,
    pub constraints: Constraints,
    pub users: Vec<AntennaPose>,
    pub antennas: usize,
    pub total_power: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn generate(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
        params.validate()?;
        Ok(Scenario {
            medium: params.medium,
            constraints: Constraints::for_medium(&params.medium, params.region_half_side_wavelengths),
            users: generate_users(params.users, params.user_cube_half_side, seed)?,
            antennas: params.antennas,
            total_power: params.total_power,
            seed,
        })
    }

    pub fn problem(&self) -> LinkProblem {
        LinkProblem {
            medium: self.medium,
            users: self.users.clone(),
            total_power: self.total_power,
            constraints: self.constraints,
        }
    }

    /// Random feasible transmit positions, random transmit axes and the
    /// users' own axes, all drawn from the scenario seed.
    pub fn initial_layout(&self, flags: OptimizeFlags) -> Result<LayoutVariables> {
        let mut rng = stream_rng(self.seed, LAYOUT_STREAM);
        let region = self.constraints.region;
        let mut positions: Vec<Vec3> = Vec::with_capacity(self.antennas);
        let mut attempts = 0;
        while positions.len() < self.antennas {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Infeasible("could not place antennas with the required separation".into()));
            }
            let p = Vec3::new(
                rng.random_range(region.min.x..=region.max.x),
                rng.random_range(region.min.y..=region.max.y),
                rng.random_range(region.min.z..=region.max.z),
            );
            if positions.iter().all(|q| (*q - p).norm() >= self.constraints.min_separation) {
                positions.push(p);
            }
        }
        let tx_angles = (0..self.antennas)
            .map(|_| SphericalAngles::from_unit(sphere_direction(&mut rng)))
            .collect();
        Ok(LayoutVariables {
            tx_angles,
            tx_positions: positions,
            rx_angles: self.users.iter().map(|u| SphericalAngles::from_unit(u.orientation)).collect(),
            flags,
        })
    }

    /// Hex SHA-256 of every number that defines the scenario.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let m = &self.medium;
        for v in [
            m.wavelength,
            m.relative_permittivity,
            m.permeability,
            m.speed_of_light,
            m.antenna_factor,
            m.noise_power,
            self.total_power,
            self.constraints.min_separation,
        ] {
            h.update(v.to_le_bytes());
        }
        for v in [self.constraints.region.min, self.constraints.region.max] {
            for c in v.to_array() {
                h.update(c.to_le_bytes());
            }
        }
        for u in &self.users {
            for c in u.position.to_array().into_iter().chain(u.orientation.as_vec().to_array()) {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.antennas as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Which quantities the optimizer may move: 1 none, 2 transmit positions,
/// 3 transmit positions and axes, 4 receive axes, 5 everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ConfigurationId(u8);

impl ConfigurationId {
    pub const ALL: [ConfigurationId; 5] = [
        ConfigurationId(1),
        ConfigurationId(2),
        ConfigurationId(3),
        ConfigurationId(4),
        ConfigurationId(5),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=5).contains(&id) {
            Ok(ConfigurationId(id))
        } else {
            Err(Error::Config(format!("configuration {id} is not in 1..=5")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn flags(self) -> OptimizeFlags {
        let (tx_position, tx_orientation, rx_orientation) = match self.0 {
            1 => (false, false, false),
            2 => (true, false, false),
            3 => (true, true, false),
            4 => (false, false, true),
            _ => (true, true, true),
        };
        OptimizeFlags {
            tx_orientation,
            tx_position,
            rx_orientation,
        }
    }
}

impl TryFrom<u8> for ConfigurationId {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        ConfigurationId::new(id)
    }
}

impl From<ConfigurationId> for u8 {
    fn from(c: ConfigurationId) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
    pub gamma_total: f64,
    pub gamma_total_db: f64,
    pub average_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// γ_total in dB after each outer iteration, starting with the initial layout.
    pub trace_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    pub seed: u64,
    pub repetition: usize,
    pub configuration: ConfigurationId,
    pub users: usize,
    pub antennas: usize,
    pub total_power: f64,
    /// Rotation resolution applied after optimization, degrees.
    pub granularity_deg: Option<f64>,
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok()
    }
}

fn metrics_of(outcome: &OptimizationOutcome) -> RunMetrics {
    let m = &outcome.solution.metrics;
    RunMetrics {
        sinr: m.sinr.clone(),
        rates: m.rates.clone(),
        gamma_total: m.total_sinr,
        gamma_total_db: to_db(m.total_sinr),
        average_rate: m.average_rate,
        iterations: outcome.trace.iterations(),
        converged: outcome.converged,
        trace_db: outcome.trace.entries.iter().map(|e| e.gamma_total_db).collect(),
    }
}

/// Optimizes a scenario from its seeded random layout under one configuration.
pub fn optimize_configuration(
    scenario: &Scenario,
    config: ConfigurationId,
    optimizer: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    let layout = scenario.initial_layout(config.flags())?;
    optimize(layout, &scenario.problem(), optimizer)
}

fn record_for(scenario: &Scenario, config: ConfigurationId, repetition: usize) -> RunRecord {
    RunRecord {
        scenario_hash: scenario.hash(),
        seed: scenario.seed,
        repetition,
        configuration: config,
        users: scenario.users.len(),
        antennas: scenario.antennas,
        total_power: scenario.total_power,
        granularity_deg: None,
        outcome: Err(String::new()),
    }
}

pub fn run_configuration(scenario: &Scenario, config: ConfigurationId, optimizer: &OptimizerConfig) -> RunRecord {
    let mut record = record_for(scenario, config, 0);
    record.outcome = optimize_configuration(scenario, config, optimizer)
        .map(|o| metrics_of(&o))
        .map_err(|e| e.to_string());
    record
}

/// Re-evaluates a layout after snapping its angles to `resolution_deg`.
pub fn quantized_metrics(outcome: &OptimizationOutcome, scenario: &Scenario, resolution_deg: f64) -> Result<RunMetrics> {
    let layout = quantize_angles(&outcome.layout, resolution_deg)?;
    let solution = evaluate(&layout, &scenario.problem())?;
    let mut metrics = metrics_of(outcome);
    metrics.sinr = solution.metrics.sinr.clone();
    metrics.rates = solution.metrics.rates.clone();
    metrics.gamma_total = solution.metrics.total_sinr;
    metrics.gamma_total_db = to_db(solution.metrics.total_sinr);
    metrics.average_rate = solution.metrics.average_rate;
    Ok(metrics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonteCarloKind {
    /// The transmit antenna rotates; the receive axis is fixed at `+z`.
    TxRandom,
    /// The receive antenna rotates; the transmit axis is fixed at `+z`.
    RxRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSampling {
    /// Polar and azimuthal angles independently uniform.
    #[default]
    UniformAngles,
    /// Directions uniform on the unit sphere.
    UniformSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub sampling: AngleSampling,
    /// Spacing of the grid used to locate the peak channel power, degrees.
    pub grid_step_deg: f64,
    pub medium: MediumParams,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            sampling: AngleSampling::UniformAngles,
            grid_step_deg: 0.25,
            medium: MediumParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub fraction: f64,
    pub samples: usize,
    pub peak_power: f64,
    /// Binomial standard error of `fraction`.
    pub standard_error: f64,
}

/// Channel power on the reference link with the rotatable antenna along `axis`.
pub fn reference_link_power(kind: MonteCarloKind, axis: UnitVec3, medium: &MediumParams) -> Result<f64> {
    let fixed = UnitVec3::new(0.0, 0.0, 1.0)?;
    let (tx_axis, rx_axis) = match kind {
        MonteCarloKind::TxRandom => (axis, fixed),
        MonteCarloKind::RxRandom => (fixed, axis),
    };
    link_power(
        &AntennaPose::new(Vec3::ZERO, tx_axis),
        &AntennaPose::new(REFERENCE_RX_POSITION, rx_axis),
        medium,
    )
}

/// Channel power on the reference link over a regular grid of the
/// rotatable antenna's angles, as `(polar°, azimuth°, power)` rows.
pub fn orientation_sweep(kind: MonteCarloKind, grid_step_deg: f64, medium: &MediumParams) -> Result<Vec<(f64, f64, f64)>> {
    let (polar_steps, azimuth_steps, step) = grid_shape(grid_step_deg)?;
    let mut rows = Vec::with_capacity((polar_steps + 1) * azimuth_steps);
    for i in 0..=polar_steps {
        let polar = (i as f64 * step).min(PI);
        for j in 0..azimuth_steps {
            let azimuthal = j as f64 * step;
            let power = reference_link_power(kind, SphericalAngles { polar, azimuthal }.to_unit(), medium)?;
            rows.push((polar.to_degrees(), azimuthal.to_degrees(), power));
        }
    }
    Ok(rows)
}

fn grid_shape(grid_step_deg: f64) -> Result<(usize, usize, f64)> {
    if !(grid_step_deg > 0.0 && grid_step_deg <= 90.0) {
        return Err(Error::Config(format!("grid step {grid_step_deg} outside (0, 90]")));
    }
    let step = grid_step_deg.to_radians();
    Ok(((PI / step).round() as usize, (TAU / step).round() as usize, step))
}

/// Largest channel power over a regular grid of rotatable-antenna angles.
pub fn peak_power_on_grid(kind: MonteCarloKind, grid_step_deg: f64, medium: &MediumParams) -> Result<f64> {
    let (polar_steps, azimuth_steps, step) = grid_shape(grid_step_deg)?;
    (0..=polar_steps)
        .into_par_iter()
        .map(|i| {
            let polar = (i as f64 * step).min(PI);
            (0..azimuth_steps).try_fold(0.0f64, |best, j| {
                let axis = SphericalAngles { polar, azimuthal: j as f64 * step }.to_unit();
                Ok(best.max(reference_link_power(kind, axis, medium)?))
            })
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Fraction of random orientations of the rotatable antenna that capture
/// at least half of the peak channel power on the reference link.
pub fn monte_carlo_half_energy(kind: MonteCarloKind, samples: usize, seed: u64) -> Result<f64> {
    Ok(monte_carlo_half_energy_with(kind, samples, seed, &MonteCarloOptions::default())?.fraction)
}

pub fn monte_carlo_half_energy_with(
    kind: MonteCarloKind,
    samples: usize,
    seed: u64,
    options: &MonteCarloOptions,
) -> Result<MonteCarloResult> {
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    options.medium.validate()?;
    let peak = peak_power_on_grid(kind, options.grid_step_deg, &options.medium)?;
    let threshold = 0.5 * peak;
    let chunks = samples.div_ceil(MONTE_CARLO_CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let n = MONTE_CARLO_CHUNK.min(samples - c * MONTE_CARLO_CHUNK);
            let mut hits = 0usize;
            for _ in 0..n {
                let axis = match options.sampling {
                    AngleSampling::UniformAngles => SphericalAngles {
                        polar: rng.random_range(0.0..=PI),
                        azimuthal: rng.random_range(0.0..TAU),
                    }
                    .to_unit(),
                    AngleSampling::UniformSphere => sphere_direction(&mut rng),
                };
                if reference_link_power(kind, axis, &options.medium)? >= threshold {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let fraction = hits as f64 / samples as f64;
    Ok(MonteCarloResult {
        fraction,
        samples,
        peak_power: peak,
        standard_error: (fraction * (1.0 - fraction) / samples as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Grid values are user counts K.
    Users,
    /// Grid values are transmit powers in watts.
    Power,
    /// Grid values are rotation resolutions in degrees (0 = continuous).
    Granularity,
    /// Grid values are user counts K; records keep the full traces.
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub configurations: Vec<ConfigurationId>,
    pub repetitions: usize,
    pub seed: u64,
    pub base: ScenarioParams,
    pub optimizer: OptimizerConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.configurations.is_empty() || self.repetitions == 0 {
            return Err(Error::Config("sweep needs at least one configuration and repetition".into()));
        }
        self.optimizer.validate()?;
        for &g in &self.grid {
            self.params_at(g)?.validate()?;
            if self.kind == SweepKind::Granularity && !(0.0..=180.0).contains(&g) {
                return Err(Error::Config(format!("rotation resolution {g} outside [0, 180]")));
            }
        }
        Ok(())
    }

    fn params_at(&self, value: f64) -> Result<ScenarioParams> {
        let mut p = self.base;
        match self.kind {
            SweepKind::Users | SweepKind::Convergence => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("user count {value} is not a positive integer")));
                }
                p.users = value as usize;
            }
            SweepKind::Power => p.total_power = value,
            SweepKind::Granularity => {}
        }
        Ok(p)
    }
}

/// Runs every (grid point, repetition, configuration) combination.
///
/// Repetition `r` uses scenario seed `derive_seed(seed, r)` at every grid
/// point, so power and granularity sweeps vary one parameter on fixed
/// drops. Records come back ordered by grid point, then repetition, then
/// configuration, regardless of thread count.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    if spec.kind == SweepKind::Granularity {
        return granularity_sweep(spec);
    }
    let tasks: Vec<(usize, usize, ConfigurationId)> = (0..spec.grid.len())
        .flat_map(|g| (0..spec.repetitions).flat_map(move |r| spec.configurations.iter().map(move |c| (g, r, *c))))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(g, r, config)| -> Result<RunRecord> {
            let params = spec.params_at(spec.grid[g])?;
            let scenario = Scenario::generate(&params, derive_seed(spec.seed, r as u64))?;
            let mut record = run_configuration(&scenario, config, &spec.optimizer);
            record.repetition = r;
            if spec.kind != SweepKind::Convergence {
                if let Ok(m) = &mut record.outcome {
                    m.trace_db.clear();
                }
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records)
}

fn granularity_sweep(spec: &SweepSpec) -> Result<Vec<RunRecord>> {
    let tasks: Vec<(usize, ConfigurationId)> = (0..spec.repetitions)
        .flat_map(|r| spec.configurations.iter().map(move |c| (r, *c)))
        .collect();
    let per_task = tasks
        .par_iter()
        .map(|&(r, config)| -> Result<Vec<RunRecord>> {
            let scenario = Scenario::generate(&spec.base, derive_seed(spec.seed, r as u64))?;
            let outcome = optimize_configuration(&scenario, config, &spec.optimizer);
            Ok(spec
                .grid
                .iter()
                .map(|&res| {
                    let mut record = record_for(&scenario, config, r);
                    record.granularity_deg = Some(res);
                    record.outcome = match &outcome {
                        Ok(o) => quantized_metrics(o, &scenario, res).map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    if let Ok(m) = &mut record.outcome {
                        m.trace_db.clear();
                    }
                    record
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    // regroup as grid point, repetition, configuration
    let mut records = Vec::with_capacity(tasks.len() * spec.grid.len());
    for g in 0..spec.grid.len() {
        for runs in &per_task {
            records.push(runs[g].clone());
        }
    }
    Ok(records)
}

/// Mean and sample standard deviation of γ_total (dB) over successful
/// records matching `filter`.
pub fn mean_gamma_db<F: Fn(&RunRecord) -> bool>(records: &[RunRecord], filter: F) -> Option<(f64, f64, usize)> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| filter(r))
        .filter_map(|r| r.metrics().map(|m| m.gamma_total_db))
        .collect();
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt(), values.len()))
}
