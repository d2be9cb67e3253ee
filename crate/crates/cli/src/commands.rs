use std::collections::BTreeMap;

use pama_core::channel::link_breakdown;
use pama_core::harness::{
    mean_gamma_db, monte_carlo_half_energy_with, optimize_configuration, orientation_sweep, sweep as run_sweep,
    ConfigurationId, MonteCarloKind, RunRecord, Scenario, SweepKind, SweepSpec,
};
use pama_core::optimizer::Block;
use pama_core::{to_db, AntennaPose, UnitVec3};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, write_outputs, Provenance, Table};
use crate::{CliError, EvalArgs, RunArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), num)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let config = RunConfig::load(args.config.as_deref())?;
    let medium = config.medium.params()?;
    let tx = AntennaPose::new(args.tx_pos, UnitVec3::normalize(args.tx_dir)?);
    let rx = AntennaPose::new(args.rx_pos, UnitVec3::normalize(args.rx_dir)?);
    let full = link_breakdown(&tx, &rx, &medium)?;
    println!(
        "abs_h,phase_rad,emission_angle_rad,incident_angle_rad,matching_angle_rad,gamma_parallel,gamma_perpendicular,matching_efficiency"
    );
    println!(
        "{},{},{},{},{},{},{},{}",
        num(full.gain.norm()),
        num(full.gain.arg()),
        num(full.emission_angle),
        num(full.incident_angle),
        opt_num(full.matching_angle),
        num(full.gamma_parallel),
        num(full.gamma_perpendicular),
        opt_num(full.matching_efficiency),
    );
    Ok(())
}

/// Loads the configuration and applies `--seed`/`--reps`.
fn effective_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.scenario.repetitions = reps;
    }
    config.validate()?;
    Ok(config)
}

fn finish<S: Serialize>(args: &RunArgs, command: &str, config: &RunConfig, table: &Table, summary: S) -> Result<(), CliError> {
    let provenance = Provenance {
        tool: "pama",
        version: VERSION,
        command,
        seed: config.scenario.seed,
        config_sha256: config.hash(),
        rows: table.len(),
        config,
        summary,
    };
    write_outputs(&args.out, table, &provenance)
}

pub fn orientation_map(args: &RunArgs, command: &str) -> Result<(), CliError> {
    let config = effective_config(args)?;
    let kind = if command == "scenario1" {
        MonteCarloKind::TxRandom
    } else {
        MonteCarloKind::RxRandom
    };
    let rows = orientation_sweep(kind, config.monte_carlo.sweep_step_deg, &config.medium.params()?)?;
    let peak = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let mut table = Table::new(["polar_deg", "azimuth_deg", "channel_power", "normalized_power"]);
    for (polar, azimuth, power) in &rows {
        let normalized = if peak > 0.0 { power / peak } else { 0.0 };
        table.push(vec![num(*polar), num(*azimuth), num(*power), num(normalized)]);
    }
    #[derive(Serialize)]
    struct Summary {
        peak_power: f64,
        grid_step_deg: f64,
    }
    finish(
        args,
        command,
        &config,
        &table,
        Summary {
            peak_power: peak,
            grid_step_deg: config.monte_carlo.sweep_step_deg,
        },
    )
}

pub fn montecarlo(args: &RunArgs) -> Result<(), CliError> {
    let config = effective_config(args)?;
    let options = config.monte_carlo_options()?;
    let seed = config.scenario.seed;
    let mut table = Table::new(["kind", "sampling", "samples", "seed", "fraction", "standard_error", "peak_power"]);
    let mut summary = BTreeMap::new();
    for (name, kind) in [("tx_random", MonteCarloKind::TxRandom), ("rx_random", MonteCarloKind::RxRandom)] {
        let r = monte_carlo_half_energy_with(kind, config.monte_carlo.samples, seed, &options)?;
        let sampling = serde_json::to_value(options.sampling).map_err(|e| CliError::Io(e.to_string()))?;
        table.push(vec![
            name.to_string(),
            sampling.as_str().unwrap_or_default().to_string(),
            r.samples.to_string(),
            seed.to_string(),
            num(r.fraction),
            num(r.standard_error),
            num(r.peak_power),
        ]);
        summary.insert(name, r.fraction);
    }
    finish(args, "montecarlo", &config, &table, summary)
}

pub fn optimize(args: &RunArgs) -> Result<(), CliError> {
    let config = effective_config(args)?;
    let params = config.scenario_params()?;
    let scenario = Scenario::generate(&params, config.scenario.seed)?;
    let configuration = config.configuration()?;
    let mut opt = config.optimizer.clone();
    opt.seed = config.scenario.seed;
    let outcome = optimize_configuration(&scenario, configuration, &opt)?;

    let blocks = Block::DEFAULT_ORDER;
    let mut header = vec!["iteration".to_string(), "gamma_total".into(), "gamma_total_db".into()];
    header.extend(blocks.iter().map(|b| format!("gain_{}_db", b.name())));
    let mut table = Table::new(header);
    for e in &outcome.trace.entries {
        let mut row = vec![e.iteration.to_string(), num(e.gamma_total), num(e.gamma_total_db)];
        for b in blocks {
            row.push(e.block_gains_db.iter().find(|(x, _)| *x == b).map_or(String::new(), |(_, g)| num(*g)));
        }
        table.push(row);
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        scenario_hash: String,
        configuration: u8,
        gamma_total_db: f64,
        average_rate: f64,
        sinr_db: Vec<f64>,
        rates: &'a [f64],
        iterations: usize,
        converged: bool,
        layout: &'a pama_core::optimizer::LayoutVariables,
    }
    let m = &outcome.solution.metrics;
    let summary = Summary {
        scenario_hash: scenario.hash(),
        configuration: configuration.id(),
        gamma_total_db: to_db(m.total_sinr),
        average_rate: m.average_rate,
        sinr_db: m.sinr.iter().map(|s| to_db(*s)).collect(),
        rates: &m.rates,
        iterations: outcome.trace.iterations(),
        converged: outcome.converged,
        layout: &outcome.layout,
    };
    finish(args, "optimize", &config, &table, summary)
}

fn sweep_spec(config: &RunConfig, kind: SweepKind) -> Result<SweepSpec, CliError> {
    let grid = match kind {
        SweepKind::Users => config.sweeps.users.iter().map(|k| *k as f64).collect(),
        SweepKind::Power => config.sweeps.power_w.clone(),
        SweepKind::Granularity => config.sweeps.granularity_deg.clone(),
        SweepKind::Convergence => config.sweeps.convergence_users.iter().map(|k| *k as f64).collect(),
    };
    let mut base_config = config.clone();
    if matches!(kind, SweepKind::Users | SweepKind::Convergence) {
        // placeholder; the grid sets the user count
        base_config.scenario.users = 1;
    }
    let spec = SweepSpec {
        kind,
        grid,
        configurations: config.configurations()?,
        repetitions: config.scenario.repetitions,
        seed: config.scenario.seed,
        base: base_config.scenario_params()?,
        optimizer: config.optimizer.clone(),
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct PointSummary {
    grid_value: f64,
    configuration: u8,
    mean_gamma_total_db: Option<f64>,
    sd_gamma_total_db: Option<f64>,
    successful_runs: usize,
}

fn summarize(spec: &SweepSpec, records: &[RunRecord]) -> Vec<PointSummary> {
    let per_point = spec.repetitions * spec.configurations.len();
    let mut out = Vec::new();
    for (g, chunk) in records.chunks(per_point).enumerate() {
        for c in &spec.configurations {
            let stats = mean_gamma_db(chunk, |r| r.configuration == *c);
            out.push(PointSummary {
                grid_value: spec.grid[g],
                configuration: c.id(),
                mean_gamma_total_db: stats.map(|s| s.0),
                sd_gamma_total_db: stats.map(|s| s.1),
                successful_runs: stats.map_or(0, |s| s.2),
            });
        }
    }
    out
}

fn status(r: &RunRecord) -> String {
    match &r.outcome {
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {e}"),
    }
}

pub fn sweep(args: &RunArgs, command: &str) -> Result<(), CliError> {
    let config = effective_config(args)?;
    let (kind, grid_column) = match command {
        "sweep-users" => (SweepKind::Users, "users"),
        "sweep-power" => (SweepKind::Power, "total_power_w"),
        _ => (SweepKind::Granularity, "granularity_deg"),
    };
    let spec = sweep_spec(&config, kind)?;
    let records = run_sweep(&spec)?;

    let mut header = vec![grid_column.to_string(), "repetition".into(), "seed".into(), "scenario_hash".into()];
    for c in &spec.configurations {
        let id = c.id();
        header.extend([
            format!("c{id}_gamma_total_db"),
            format!("c{id}_average_rate"),
            format!("c{id}_iterations"),
            format!("c{id}_status"),
        ]);
    }
    let mut table = Table::new(header);
    let per_row = spec.configurations.len();
    for (i, group) in records.chunks(per_row).enumerate() {
        let g = i / spec.repetitions;
        let first = &group[0];
        let grid_value = match kind {
            SweepKind::Users => format!("{}", spec.grid[g] as usize),
            _ => num(spec.grid[g]),
        };
        let mut row = vec![grid_value, first.repetition.to_string(), first.seed.to_string(), first.scenario_hash.clone()];
        for r in group {
            match r.metrics() {
                Some(m) => row.extend([num(m.gamma_total_db), num(m.average_rate), m.iterations.to_string()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row.push(status(r));
        }
        table.push(row);
    }
    finish(args, command, &config, &table, summarize(&spec, &records))
}

pub fn convergence(args: &RunArgs) -> Result<(), CliError> {
    let config = effective_config(args)?;
    let spec = sweep_spec(&config, SweepKind::Convergence)?;
    let records = run_sweep(&spec)?;

    let mut header = vec!["users".to_string(), "repetition".into(), "seed".into(), "iteration".into()];
    header.extend(spec.configurations.iter().map(|c| format!("c{}_gamma_total_db", c.id())));
    let mut table = Table::new(header);
    let per_row = spec.configurations.len();
    for (i, group) in records.chunks(per_row).enumerate() {
        let users = spec.grid[i / spec.repetitions] as usize;
        let traces: Vec<&[f64]> = group
            .iter()
            .map(|r| r.metrics().map_or(&[][..], |m| m.trace_db.as_slice()))
            .collect();
        let longest = traces.iter().map(|t| t.len()).max().unwrap_or(0);
        for it in 0..longest {
            let mut row = vec![users.to_string(), group[0].repetition.to_string(), group[0].seed.to_string(), it.to_string()];
            // converged runs hold their final value
            row.extend(traces.iter().map(|t| t.get(it).or(t.last()).map_or(String::new(), |v| num(*v))));
            table.push(row);
        }
    }
    let summary: Vec<ConvergenceSummary> = spec
        .configurations
        .iter()
        .map(|c| mean_trace(&records, *c))
        .collect();
    finish(args, "convergence", &config, &table, summary)
}

#[derive(Serialize)]
struct ConvergenceSummary {
    configuration: u8,
    /// Mean γ_total (dB) after each iteration over all runs, holding final values.
    mean_trace_db: Vec<f64>,
}

fn mean_trace(records: &[RunRecord], c: ConfigurationId) -> ConvergenceSummary {
    let traces: Vec<&[f64]> = records
        .iter()
        .filter(|r| r.configuration == c)
        .filter_map(|r| r.metrics().map(|m| m.trace_db.as_slice()))
        .filter(|t| !t.is_empty())
        .collect();
    let longest = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mean_trace_db = (0..longest)
        .map(|it| traces.iter().map(|t| *t.get(it).unwrap_or(t.last().unwrap())).sum::<f64>() / traces.len() as f64)
        .collect();
    ConvergenceSummary {
        configuration: c.id(),
        mean_trace_db,
    }
}
