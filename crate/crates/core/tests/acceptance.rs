//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pama_core::channel::{radiation_factor, reflection_coefficients};
use pama_core::harness::{
    derive_seed, mean_gamma_db, monte_carlo_half_energy, optimize_configuration, quantized_metrics, run_configuration,
    ConfigurationId, MonteCarloKind, RunRecord, Scenario, ScenarioParams,
};
use pama_core::mimo::{beamform, zf_precoder};
use pama_core::optimizer::{OptimizationOutcome, OptimizerConfig};
use pama_core::{channel_matrix, element_gain, to_db, AntennaPose, MediumParams, Vec3};

const SCENARIOS: u64 = 100;
const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config(id: u8) -> ConfigurationId {
    ConfigurationId::new(id).unwrap()
}

fn scenarios(params: &ScenarioParams, count: u64, salt: u64) -> Vec<Scenario> {
    (0..count)
        .map(|r| Scenario::generate(params, derive_seed(SEED ^ salt, r)).unwrap())
        .collect()
}

/// Traces seen anywhere in the suite; all must be monotone.
#[derive(Default)]
struct TraceLog {
    runs: usize,
    broken: usize,
}

impl TraceLog {
    fn record(&mut self, r: &RunRecord) {
        if let Some(m) = r.metrics() {
            self.runs += 1;
            if m.trace_db.windows(2).any(|w| w[1] < w[0]) {
                self.broken += 1;
            }
        }
    }

    fn outcome(&mut self, o: &OptimizationOutcome) {
        self.runs += 1;
        if !o.trace.is_monotone() {
            self.broken += 1;
        }
    }
}

fn monte_carlo(kind: MonteCarloKind, target: f64, tol: f64) -> Verdict {
    let start = Instant::now();
    let f = monte_carlo_half_energy(kind, 1_000_000, SEED).unwrap();
    let elapsed = start.elapsed();
    verdict(
        (f - target).abs() <= tol && elapsed < Duration::from_secs(60),
        format!("fraction {f:.4} (target {target} ± {tol}), {:.1} s", elapsed.as_secs_f64()),
    )
}

struct PairedRuns {
    c1: Vec<RunRecord>,
    c2: Vec<RunRecord>,
    c3: Vec<RunRecord>,
}

fn paired_runs(log: &mut TraceLog) -> PairedRuns {
    let opt = OptimizerConfig::default();
    let drops = scenarios(&ScenarioParams::default(), SCENARIOS, 0);
    let mut runs = PairedRuns {
        c1: Vec::new(),
        c2: Vec::new(),
        c3: Vec::new(),
    };
    for s in &drops {
        for (id, bucket) in [(1, &mut runs.c1), (2, &mut runs.c2), (3, &mut runs.c3)] {
            let r = run_configuration(s, config(id), &opt);
            log.record(&r);
            bucket.push(r);
        }
    }
    runs
}

/// Mean over scenarios where both runs succeeded of `b − a` in dB.
fn paired_gain(a: &[RunRecord], b: &[RunRecord]) -> (f64, usize) {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(y.metrics()?.gamma_total_db - x.metrics()?.gamma_total_db))
        .collect();
    (diffs.iter().sum::<f64>() / diffs.len().max(1) as f64, diffs.len())
}

fn translation_only(runs: &PairedRuns) -> Verdict {
    let (d, n) = paired_gain(&runs.c1, &runs.c2);
    verdict(
        d.abs() < 0.1 && n >= 100,
        format!("mean γ_total(config 2) − γ_total(config 1) = {d:.3} dB over {n} drops (limit 0.1 dB)"),
    )
}

fn position_and_orientation(runs: &PairedRuns) -> Verdict {
    let (d, n) = paired_gain(&runs.c1, &runs.c3);
    verdict(
        (d - 3.0).abs() <= 1.0 && n >= 100,
        format!("mean γ_total(config 3) − γ_total(config 1) = {d:.3} dB over {n} drops (target 3 ± 1 dB)"),
    )
}

fn quantization(log: &mut TraceLog) -> Verdict {
    let opt = OptimizerConfig::default();
    let (mut fine, mut coarse, mut n) = (0.0, 0.0, 0usize);
    for s in scenarios(&ScenarioParams::default(), SCENARIOS, 5) {
        let Ok(o) = optimize_configuration(&s, config(5), &opt) else { continue };
        log.outcome(&o);
        let base = to_db(o.solution.metrics.total_sinr);
        let (Ok(q30), Ok(q80)) = (quantized_metrics(&o, &s, 30.0), quantized_metrics(&o, &s, 80.0)) else {
            continue;
        };
        fine += base - q30.gamma_total_db;
        coarse += base - q80.gamma_total_db;
        n += 1;
    }
    let (fine, coarse) = (fine / n as f64, coarse / n as f64);
    verdict(
        fine <= 0.5 && (coarse - 3.0).abs() <= 1.0,
        format!("mean loss at 30° = {fine:.3} dB (limit 0.5), at 80° = {coarse:.3} dB (target 3 ± 1) over {n} drops"),
    )
}

fn property_suite(log: &TraceLog) -> Verdict {
    let medium = MediumParams::default();
    let mut failures = Vec::new();

    // zero-forcing interference and exact power budget on real channels
    let (mut worst_leak, mut worst_budget) = (0.0f64, 0.0f64);
    for s in scenarios(&ScenarioParams::default(), 20, 6) {
        let layout = s.initial_layout(ConfigurationId::new(1).unwrap().flags()).unwrap();
        let h = channel_matrix(&layout.tx_poses(), &layout.rx_poses(&s.users), &medium).unwrap();
        let w = zf_precoder(&h).unwrap();
        let hw = h.as_matrix() * w.matrix();
        let diag = (0..hw.nrows()).map(|k| hw[(k, k)].norm_sqr()).fold(0.0, f64::max);
        for i in 0..hw.nrows() {
            for j in 0..hw.ncols() {
                if i != j {
                    worst_leak = worst_leak.max(hw[(i, j)].norm_sqr() / diag);
                }
            }
        }
        let sol = beamform(&h, s.total_power, medium.noise_power).unwrap();
        let spent: f64 = sol.power.powers.iter().sum();
        worst_budget = worst_budget.max((spent - s.total_power).abs() / s.total_power);
    }
    if worst_leak >= 1e-18 {
        failures.push(format!("ZF leakage {worst_leak:.2e}"));
    }
    if worst_budget > 1e-9 {
        failures.push(format!("budget error {worst_budget:.2e}·P"));
    }

    // radiation factor rises on (0, π/2] and falls on [π/2, π)
    let n = 10_000;
    let f: Vec<f64> = (1..n).map(|i| radiation_factor(PI * i as f64 / n as f64)).collect();
    let half = n / 2 - 1;
    let rising = f[..=half].windows(2).all(|w| w[1] >= w[0]);
    let falling = f[half..].windows(2).all(|w| w[1] <= w[0]);
    if !(rising && falling) {
        failures.push("radiation factor not unimodal".into());
    }

    let brewster = (1.0 / (medium.relative_permittivity + 1.0).sqrt()).acos();
    let (par, _) = reflection_coefficients(brewster, &medium);
    if par.abs() > 1e-9 {
        failures.push(format!("Γ∥ at Brewster = {par:.2e}"));
    }

    // translation changes only the phase
    let mut worst_translation = 0.0f64;
    for s in scenarios(&ScenarioParams::default(), 20, 7) {
        let layout = s.initial_layout(ConfigurationId::new(1).unwrap().flags()).unwrap();
        for (tx, rx) in layout.tx_poses().iter().zip(layout.rx_poses(&s.users)) {
            let moved = AntennaPose::new(tx.position + Vec3::new(0.3, -0.7, 0.45), tx.orientation);
            let a = element_gain(tx, &rx, &medium).unwrap().norm();
            let b = element_gain(&moved, &rx, &medium).unwrap().norm();
            worst_translation = worst_translation.max((a - b).abs() / a);
        }
    }
    if worst_translation > 1e-15 {
        failures.push(format!("translation changed |h| by {worst_translation:.2e}"));
    }

    if log.broken > 0 || log.runs == 0 {
        failures.push(format!("{} of {} optimizer traces not monotone", log.broken, log.runs));
    }

    let summary = format!(
        "leak {worst_leak:.1e}, budget {worst_budget:.1e}·P, Γ∥(θ_B) {:.1e}, translation {worst_translation:.1e}, {} monotone traces",
        par.abs(),
        log.runs - log.broken
    );
    if failures.is_empty() {
        verdict(true, summary)
    } else {
        verdict(false, format!("{summary}; {}", failures.join("; ")))
    }
}

/// Peak of `F²·M²` over a 1° grid of both antennas' angles for a link
/// along `u`, from the closed-form link terms.
fn grid_peak_power_factor(u: Vec3, eps_r: f64) -> f64 {
    let grid: Vec<Vec3> = (0..=180)
        .flat_map(|t| {
            (0..360).map(move |p| {
                let (st, ct) = (t as f64).to_radians().sin_cos();
                let (sp, cp) = (p as f64).to_radians().sin_cos();
                Vec3::new(st * cp, st * sp, ct)
            })
        })
        .collect();
    // receive side: M² = (1 − Γ⊥²) − (Γ∥² − Γ⊥²)·cos²α
    let rx: Vec<(Vec3, f64, f64)> = grid
        .iter()
        .map(|n| {
            let c2 = 1.0 - u.dot(*n).powi(2);
            let root = (eps_r - 1.0 + c2).sqrt();
            let c = c2.max(0.0).sqrt();
            let par = (root - eps_r * c) / (root + eps_r * c);
            let perp = (root - c) / (root + c);
            (*n, 1.0 - perp * perp, par * par - perp * perp)
        })
        .collect();
    let mut best = 0.0f64;
    for n in &grid {
        let ce = u.dot(*n);
        let se = (1.0 - ce * ce).max(0.0).sqrt();
        if se < 1e-12 {
            continue;
        }
        let f = (FRAC_PI_2 * ce).cos() / se;
        let field = (*n - u * ce) * (1.0 / se);
        let f2 = f * f;
        if f2 <= best {
            continue;
        }
        let mut m2 = 0.0f64;
        for &(r, a, b) in &rx {
            let ca = field.dot(r);
            m2 = m2.max(a - b * ca * ca);
        }
        best = best.max(f2 * m2);
    }
    best
}

fn single_link_params() -> ScenarioParams {
    ScenarioParams {
        users: 1,
        antennas: 1,
        ..ScenarioParams::default()
    }
}

fn link_gamma_db(factor: f64, distance: f64, s: &Scenario) -> f64 {
    let m = &s.medium;
    let g = 2.0 * m.speed_of_light * m.permeability / (m.antenna_factor * 4.0 * PI * distance);
    to_db(s.total_power * g * g * factor / m.noise_power)
}

fn global_optimality(log: &mut TraceLog) -> Verdict {
    let start = Instant::now();
    let opt = OptimizerConfig::default();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for s in scenarios(&single_link_params(), 3, 8) {
        let o = optimize_configuration(&s, config(5), &opt).unwrap();
        log.outcome(&o);
        let found = to_db(o.solution.metrics.total_sinr);
        // far-field terms depend on the receiver position only
        let u_far = s.users[0].position * (1.0 / s.users[0].position.norm());
        let grid = link_gamma_db(grid_peak_power_factor(u_far, s.medium.relative_permittivity), s.users[0].position.norm(), &s);
        worst = worst.max((found - grid).abs());
        lines.push(format!("{found:.3}/{grid:.3}"));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 0.1 && elapsed < Duration::from_secs(300),
        format!(
            "optimizer/grid dB {}, worst gap {worst:.4} dB, {:.1} s",
            lines.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn absolute_scale(log: &mut TraceLog) -> Verdict {
    let opt = OptimizerConfig::default();
    let mut values = Vec::new();
    for mut s in scenarios(&single_link_params(), 10, 9) {
        let u = &mut s.users[0];
        u.position = u.position * (100.0 / u.position.norm());
        let o = optimize_configuration(&s, config(5), &opt).unwrap();
        log.outcome(&o);
        values.push(to_db(o.solution.metrics.total_sinr));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    verdict(
        lo >= 38.0 && hi <= 46.0,
        format!("γ_total at 100 m in [{lo:.2}, {hi:.2}] dB over {} drops (band 38–46 dB)", values.len()),
    )
}

fn main() -> ExitCode {
    let mut log = TraceLog::default();
    let mut results: Vec<(&str, Verdict)> = Vec::new();

    results.push(("1 tx-rotation half-energy fraction", monte_carlo(MonteCarloKind::TxRandom, 0.675, 0.02)));
    results.push(("2 rx-rotation half-energy fraction", monte_carlo(MonteCarloKind::RxRandom, 0.990, 0.005)));
    let runs = paired_runs(&mut log);
    results.push(("3 translation-only gain", translation_only(&runs)));
    results.push(("4 position+orientation gain", position_and_orientation(&runs)));
    if let Some((m, sd, n)) = mean_gamma_db(&runs.c1, |_| true) {
        println!("   config 1 mean γ_total {m:.2} dB (sd {sd:.2}, n {n})");
    }
    results.push(("5 rotation quantization", quantization(&mut log)));
    results.push(("7 single-link global optimum", global_optimality(&mut log)));
    results.push(("8 absolute scale", absolute_scale(&mut log)));
    results.push(("6 property suite", property_suite(&log)));
    results.sort_by_key(|(name, _)| name.split(' ').next().and_then(|n| n.parse::<u32>().ok()));

    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
