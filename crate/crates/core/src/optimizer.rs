//! Alternating projected gradient ascent on the equivalent total SINR.
//!
//! The decision variables are split into three blocks: receive-antenna
//! orientations, transmit-antenna orientations and transmit-antenna
//! positions. Each outer iteration visits the enabled blocks in
//! `block_order`; inside a block a few projected gradient steps are taken
//! with central finite-difference gradients and Armijo backtracking. The
//! precoder and power allocation are recomputed inside every objective
//! evaluation, so every accepted step is measured on the full ZF +
//! water-filling pipeline.
//!
//! Orientations are parameterized by spherical angles, so their updates are
//! unconstrained (angles are wrapped back into range). Positions are
//! projected onto the movable box and onto half-spaces that linearize the
//! minimum-separation constraint around the previous iterate.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::channel::{channel_matrix, MediumParams};
use crate::error::{Error, Result};
use crate::geometry::{AntennaPose, SphericalAngles, UnitVec3, Vec3};
use crate::mimo::{beamform, BeamformingSolution};
use crate::to_db;

/// Positions must satisfy box and separation constraints to this accuracy.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PROJECTION_SWEEPS: usize = 1000;
const GRADIENT_NOISE_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoxRegion {
    pub fn centered(half_side: f64) -> Self {
        BoxRegion {
            min: Vec3::new(-half_side, -half_side, -half_side),
            max: Vec3::new(half_side, half_side, half_side),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    /// Distance by which `p` lies outside the box along the worst axis.
    pub fn violation(&self, p: Vec3) -> f64 {
        let lo = self.min - p;
        let hi = p - self.max;
        lo.x.max(lo.y).max(lo.z).max(hi.x).max(hi.y).max(hi.z).max(0.0)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub region: BoxRegion,
    pub min_separation: f64,
}

impl Constraints {
    /// Box of half-side `half_side_wavelengths · λ` with `λ/2` separation.
    pub fn for_medium(medium: &MediumParams, half_side_wavelengths: f64) -> Self {
        Constraints {
            region: BoxRegion::centered(half_side_wavelengths * medium.wavelength),
            min_separation: medium.wavelength / 2.0,
        }
    }

    pub fn validate(&self, antennas: usize) -> Result<()> {
        let e = self.region.extent();
        if !(e.x >= 0.0 && e.y >= 0.0 && e.z >= 0.0) || !e.is_finite() {
            return Err(Error::Config("movable region is empty".into()));
        }
        if !(self.min_separation > 0.0) {
            return Err(Error::Config("minimum separation must be positive".into()));
        }
        // capacity of a cubic lattice with spacing s
        let s = self.min_separation;
        let cells = |len: f64| (len / s).floor() as usize + 1;
        if cells(e.x) * cells(e.y) * cells(e.z) < antennas {
            return Err(Error::Infeasible(format!(
                "region cannot hold {antennas} antennas at {s} m separation"
            )));
        }
        Ok(())
    }

    /// Largest violation of box or pairwise separation.
    pub fn violation(&self, positions: &[Vec3]) -> f64 {
        let mut worst = positions.iter().map(|p| self.region.violation(*p)).fold(0.0, f64::max);
        for (a, pa) in positions.iter().enumerate() {
            for pb in &positions[a + 1..] {
                worst = worst.max(self.min_separation - (*pa - *pb).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    RxAngles,
    TxAngles,
    TxPositions,
}

impl Block {
    pub const DEFAULT_ORDER: [Block; 3] = [Block::RxAngles, Block::TxAngles, Block::TxPositions];

    pub fn name(self) -> &'static str {
        match self {
            Block::RxAngles => "rx_angles",
            Block::TxAngles => "tx_angles",
            Block::TxPositions => "tx_positions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OptimizeFlags {
    pub tx_orientation: bool,
    pub tx_position: bool,
    pub rx_orientation: bool,
}

impl OptimizeFlags {
    pub const ALL: OptimizeFlags = OptimizeFlags {
        tx_orientation: true,
        tx_position: true,
        rx_orientation: true,
    };
    pub const NONE: OptimizeFlags = OptimizeFlags {
        tx_orientation: false,
        tx_position: false,
        rx_orientation: false,
    };

    pub fn enabled(&self, block: Block) -> bool {
        match block {
            Block::RxAngles => self.rx_orientation,
            Block::TxAngles => self.tx_orientation,
            Block::TxPositions => self.tx_position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutVariables {
    pub tx_angles: Vec<SphericalAngles>,
    pub tx_positions: Vec<Vec3>,
    pub rx_angles: Vec<SphericalAngles>,
    pub flags: OptimizeFlags,
}

impl LayoutVariables {
    pub fn antennas(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn tx_poses(&self) -> Vec<AntennaPose> {
        self.tx_positions
            .iter()
            .zip(&self.tx_angles)
            .map(|(p, a)| AntennaPose::with_angles(*p, *a))
            .collect()
    }

    /// Receive poses at the given user positions with this layout's orientations.
    pub fn rx_poses(&self, users: &[AntennaPose]) -> Vec<AntennaPose> {
        users
            .iter()
            .zip(&self.rx_angles)
            .map(|(u, a)| AntennaPose::with_angles(u.position, *a))
            .collect()
    }

    fn block_params(&self, block: Block) -> Vec<f64> {
        match block {
            Block::RxAngles => flatten_angles(&self.rx_angles),
            Block::TxAngles => flatten_angles(&self.tx_angles),
            Block::TxPositions => self.tx_positions.iter().flat_map(|p| p.to_array()).collect(),
        }
    }

    fn with_block_params(&self, block: Block, params: &[f64]) -> LayoutVariables {
        let mut out = self.clone();
        match block {
            Block::RxAngles => out.rx_angles = unflatten_angles(params),
            Block::TxAngles => out.tx_angles = unflatten_angles(params),
            Block::TxPositions => {
                out.tx_positions = params.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
            }
        }
        out
    }
}

fn flatten_angles(angles: &[SphericalAngles]) -> Vec<f64> {
    angles.iter().flat_map(|a| [a.polar, a.azimuthal]).collect()
}

fn unflatten_angles(params: &[f64]) -> Vec<SphericalAngles> {
    params.chunks_exact(2).map(|c| SphericalAngles::wrapped(c[0], c[1])).collect()
}

/// Everything the objective needs besides the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProblem {
    pub medium: MediumParams,
    /// User positions; their orientations are the initial receive axes.
    pub users: Vec<AntennaPose>,
    pub total_power: f64,
    pub constraints: Constraints,
}

impl LinkProblem {
    /// Vertically oriented antennas on a `λ/2` lattice centered in the
    /// movable region; receive axes taken from the user poses.
    pub fn initial_layout(&self, antennas: usize, flags: OptimizeFlags) -> LayoutVariables {
        let up = SphericalAngles { polar: 0.0, azimuthal: 0.0 };
        LayoutVariables {
            tx_angles: vec![up; antennas],
            tx_positions: lattice_positions(antennas, &self.constraints),
            rx_angles: self.users.iter().map(|u| SphericalAngles::from_unit(u.orientation)).collect(),
            flags,
        }
    }
}

/// Near-cubic lattice with `min_separation` spacing centered in the region.
pub fn lattice_positions(count: usize, constraints: &Constraints) -> Vec<Vec3> {
    let side = (1..).find(|n: &usize| n.pow(3) >= count).unwrap_or(1);
    let ny = if side * side * (side - 1) >= count { side - 1 } else { side };
    let nz = count.div_ceil(side * ny.max(1)).max(1);
    let s = constraints.min_separation;
    let dims = [side, ny.max(1), nz];
    let offset = |n: usize| (n as f64 - 1.0) * s / 2.0;
    let c = constraints.region.center();
    (0..count)
        .map(|i| {
            let (ix, iy, iz) = (i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1]));
            Vec3::new(
                c.x + ix as f64 * s - offset(dims[0]),
                c.y + iy as f64 * s - offset(dims[1]),
                c.z + iz as f64 * s - offset(dims[2]),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_outer_iterations: usize,
    pub block_order: Vec<Block>,
    /// Projected gradient steps taken inside a block per outer iteration.
    pub block_steps: usize,
    /// Central-difference step for angles, radians.
    pub fd_step_angle: f64,
    /// Central-difference step for positions, meters.
    pub fd_step_position: f64,
    /// Largest first trial move of any angle, radians.
    pub initial_step_angle: f64,
    /// Largest first trial move of any position coordinate, in wavelengths.
    pub initial_step_position_wavelengths: f64,
    pub armijo_c: f64,
    pub shrink_factor: f64,
    pub max_backtracks: usize,
    /// Stop once an outer sweep improves γ_total by less than this fraction.
    pub convergence_tol: f64,
    /// Recorded with results; the ascent itself is deterministic.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_outer_iterations: 100,
            block_order: Block::DEFAULT_ORDER.to_vec(),
            block_steps: 5,
            fd_step_angle: 1e-5,
            fd_step_position: 1e-5,
            initial_step_angle: 0.1,
            initial_step_position_wavelengths: 1.0,
            armijo_c: 1e-4,
            shrink_factor: 0.5,
            max_backtracks: 30,
            convergence_tol: 1e-4,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.fd_step_angle,
            self.fd_step_position,
            self.initial_step_angle,
            self.initial_step_position_wavelengths,
            self.armijo_c,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("optimizer steps and Armijo constant must be positive".into()));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config("shrink_factor must lie in (0, 1)".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol < 1.0) {
            return Err(Error::Config("convergence_tol must lie in (0, 1)".into()));
        }
        if self.block_steps == 0 || self.max_backtracks == 0 {
            return Err(Error::Config("block_steps and max_backtracks must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub gamma_total: f64,
    pub gamma_total_db: f64,
    /// dB improvement contributed by each block visited in this iteration.
    pub block_gains_db: Vec<(Block, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl PartialEq for ConvergenceTrace {
    // wall time is not part of the result
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl ConvergenceTrace {
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].gamma_total >= w[0].gamma_total)
    }

    pub fn iterations(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub layout: LayoutVariables,
    pub solution: BeamformingSolution,
    pub trace: ConvergenceTrace,
    pub converged: bool,
}

/// Full ZF + water-filling pipeline for one layout.
pub fn evaluate(layout: &LayoutVariables, problem: &LinkProblem) -> Result<BeamformingSolution> {
    if layout.rx_angles.len() != problem.users.len() || layout.tx_angles.len() != layout.tx_positions.len() {
        return Err(Error::Config("layout does not match the problem dimensions".into()));
    }
    let h = channel_matrix(&layout.tx_poses(), &layout.rx_poses(&problem.users), &problem.medium)?;
    beamform(&h, problem.total_power, problem.medium.noise_power)
}

/// Equivalent total SINR (linear) of a layout.
pub fn objective(
    layout: &LayoutVariables,
    users: &[AntennaPose],
    medium: &MediumParams,
    total_power: f64,
) -> Result<f64> {
    let h = channel_matrix(&layout.tx_poses(), &layout.rx_poses(users), medium)?;
    Ok(beamform(&h, total_power, medium.noise_power)?.metrics.total_sinr)
}

/// Objective on the dB scale; failures (singular channels) map to −∞.
fn score(layout: &LayoutVariables, problem: &LinkProblem) -> f64 {
    match objective(layout, &problem.users, &problem.medium, problem.total_power) {
        Ok(g) if g > 0.0 => to_db(g),
        _ => f64::NEG_INFINITY,
    }
}

/// Central differences of `f` at `x`. Coordinates where either probe is
/// non-finite get a zero component.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            if up.is_finite() && down.is_finite() {
                (up - down) / (2.0 * step)
            } else {
                0.0
            }
        })
        .collect()
}

/// Gradient of γ_total in dB with respect to one block.
pub fn finite_difference_gradient(
    layout: &LayoutVariables,
    block: Block,
    problem: &LinkProblem,
    config: &OptimizerConfig,
) -> Vec<f64> {
    let step = match block {
        Block::TxPositions => config.fd_step_position,
        _ => config.fd_step_angle,
    };
    let x = layout.block_params(block);
    central_difference(|p| score(&layout.with_block_params(block, p), problem), &x, step)
}

/// Projects candidate positions onto the movable box and the half-spaces
/// `d̂ᵀ(p_a − p_b) ≥ s` built from the previous iterate, where
/// `d̂ = (q_a − q_b)/|q_a − q_b|` and `q` are the previous positions.
///
/// Each half-space is the linearization of `|p_a − p_b| ≥ s` at the
/// boundary point `q_b + s·d̂`. A violated pair is projected jointly, both
/// antennas moving by half the violation along `±d̂`. Sweeps alternate with
/// clamping to the box until everything holds to [`FEASIBILITY_TOL`].
pub fn separation_projection(positions: &[Vec3], previous: &[Vec3], constraints: &Constraints) -> Result<Vec<Vec3>> {
    if positions.len() != previous.len() {
        return Err(Error::Config("position and previous iterate lengths differ".into()));
    }
    let s = constraints.min_separation;
    let mut normals = Vec::new();
    for a in 0..previous.len() {
        for b in a + 1..previous.len() {
            let d = UnitVec3::normalize(previous[a] - previous[b])
                .map_err(|_| Error::Infeasible("previous iterate has coincident antennas".into()))?;
            normals.push((a, b, d.as_vec()));
        }
    }
    let mut out = positions.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_PROJECTION_SWEEPS {
        for p in out.iter_mut() {
            *p = constraints.region.clamp(*p);
        }
        residual = normals
            .iter()
            .map(|&(a, b, d)| s - d.dot(out[a] - out[b]))
            .fold(0.0, f64::max);
        if residual <= FEASIBILITY_TOL {
            return Ok(out);
        }
        for &(a, b, d) in &normals {
            let v = s - d.dot(out[a] - out[b]);
            if v > 0.0 {
                out[a] += d * (0.5 * v);
                out[b] += d * (-0.5 * v);
            }
        }
    }
    Err(Error::ProjectionFailure {
        sweeps: MAX_PROJECTION_SWEEPS,
        residual,
    })
}

fn check_feasible(layout: &LayoutVariables, problem: &LinkProblem) -> Result<()> {
    let (k, l) = (problem.users.len(), layout.antennas());
    if k == 0 || k > l {
        return Err(Error::TooManyUsers { users: k, antennas: l });
    }
    problem.constraints.validate(l)?;
    if layout.rx_angles.len() != k || layout.tx_angles.len() != l {
        return Err(Error::Config("layout does not match the problem dimensions".into()));
    }
    let v = problem.constraints.violation(&layout.tx_positions);
    if v > FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!("initial positions violate constraints by {v:.3e} m")));
    }
    Ok(())
}

struct BlockRun {
    layout: LayoutVariables,
    value: f64,
}

fn ascend_block(
    start: LayoutVariables,
    value: f64,
    block: Block,
    problem: &LinkProblem,
    config: &OptimizerConfig,
) -> Result<BlockRun> {
    let mut layout = start;
    let mut value = value;
    let (initial_step, fd_step) = match block {
        Block::TxPositions => (
            config.initial_step_position_wavelengths * problem.medium.wavelength,
            config.fd_step_position,
        ),
        _ => (config.initial_step_angle, config.fd_step_angle),
    };
    for _ in 0..config.block_steps {
        let grad = finite_difference_gradient(&layout, block, problem, config);
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        // below rounding noise of the objective
        let noise = GRADIENT_NOISE_ULPS * f64::EPSILON * value.abs().max(1.0) / fd_step;
        if gmax <= noise || !gmax.is_finite() {
            break;
        }
        let x = layout.block_params(block);
        let mut t = initial_step / gmax;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let raw: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + t * gi).collect();
            let candidate = if block == Block::TxPositions {
                let moved: Vec<Vec3> = raw.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
                match separation_projection(&moved, &layout.tx_positions, &problem.constraints) {
                    Ok(p) => p.iter().flat_map(|v| v.to_array()).collect(),
                    Err(Error::ProjectionFailure { .. }) => {
                        t *= config.shrink_factor;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            } else {
                raw
            };
            let directional: f64 = candidate.iter().zip(&x).zip(&grad).map(|((c, xi), g)| g * (c - xi)).sum();
            let trial = layout.with_block_params(block, &candidate);
            let trial_value = score(&trial, problem);
            if trial_value >= value + config.armijo_c * directional && trial_value >= value {
                accepted = Some((trial, trial_value));
                break;
            }
            t *= config.shrink_factor;
        }
        match accepted {
            Some((next, v)) => {
                let gained = v - value;
                layout = next;
                value = v;
                if gained <= 0.0 {
                    break;
                }
            }
            None => break,
        }
    }
    Ok(BlockRun { layout, value })
}

/// Alternating projected gradient ascent from `initial`.
pub fn optimize(initial: LayoutVariables, problem: &LinkProblem, config: &OptimizerConfig) -> Result<OptimizationOutcome> {
    let started = Instant::now();
    config.validate()?;
    problem.medium.validate()?;
    check_feasible(&initial, problem)?;

    let first = evaluate(&initial, problem)?;
    let mut trace = ConvergenceTrace::default();
    trace.entries.push(TraceEntry {
        iteration: 0,
        gamma_total: first.metrics.total_sinr,
        gamma_total_db: to_db(first.metrics.total_sinr),
        block_gains_db: Vec::new(),
    });

    let active: Vec<Block> = config.block_order.iter().copied().filter(|b| initial.flags.enabled(*b)).collect();
    let mut layout = initial;
    let mut value = score(&layout, problem);
    let mut converged = active.is_empty();

    for iteration in 1..=config.max_outer_iterations {
        if active.is_empty() {
            break;
        }
        let before = value;
        let mut gains = Vec::with_capacity(active.len());
        for &block in &active {
            let run = ascend_block(layout, value, block, problem, config)?;
            gains.push((block, run.value - value));
            layout = run.layout;
            value = run.value;
        }
        let gamma = crate::from_db(value);
        trace.entries.push(TraceEntry {
            iteration,
            gamma_total: gamma,
            gamma_total_db: value,
            block_gains_db: gains,
        });
        let relative = crate::from_db(value - before) - 1.0;
        if relative < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let solution = evaluate(&layout, problem)?;
    trace.elapsed = started.elapsed();
    Ok(OptimizationOutcome {
        layout,
        solution,
        trace,
        converged,
    })
}

/// Snaps every polar and azimuthal angle to the nearest multiple of
/// `resolution_deg` (ties away from zero). Polar levels stay within
/// `[0°, 180°]`; azimuths wrap at 360°. A resolution of 0 is the identity.
pub fn quantize_angles(layout: &LayoutVariables, resolution_deg: f64) -> Result<LayoutVariables> {
    if resolution_deg == 0.0 {
        return Ok(layout.clone());
    }
    if !(resolution_deg > 0.0 && resolution_deg <= 180.0) {
        return Err(Error::Config(format!("rotation resolution {resolution_deg} outside (0, 180]")));
    }
    let step = resolution_deg.to_radians();
    let top = (PI / step + 1e-9).floor();
    let snap = |a: &SphericalAngles| {
        let polar = (a.polar / step).round().min(top) * step;
        let azimuthal = ((a.azimuthal / step).round() * step).rem_euclid(TAU);
        let azimuthal = if TAU - azimuthal < 1e-9 { 0.0 } else { azimuthal };
        SphericalAngles { polar, azimuthal }
    };
    let mut out = layout.clone();
    out.tx_angles = layout.tx_angles.iter().map(snap).collect();
    out.rx_angles = layout.rx_angles.iter().map(snap).collect();
    Ok(out)
}
