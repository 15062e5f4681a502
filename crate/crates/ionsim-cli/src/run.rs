//! The six subcommands and their output writers.
//!
//! Every run writes its data file(s) plus a JSON record embedding the
//! resolved configuration, so any output can be replayed with
//! `ionsim <cmd> --config <record>.json` and diffed byte for byte.

use std::path::PathBuf;

use serde::Serialize;

use ionsim::{
    build_generator, discrepancy_report, evolve_master_intensity_with, evolve_master_phase_with,
    exponent_comparison, fit_damped_cosine, fit_power_law, pg_intensity, pg_phase_red,
    pulse_area_stats, run_ensemble_intensity, run_ensemble_phase, DensityMatrix, ElectronicState,
    EnsembleResult, Erratum, EvolveOptions, ExactPropagator, ExponentComparison, FormulaVariant,
    Generator, HilbertConfig, IntensityNoise, InvariantReport, LevelRate, ModelParams,
    Normalization, PhaseNoise, PopulationTrace, PowerLawFit, PulseAreaStats, SidebandKind,
    TimeGrid, TrajectoryConfig,
};

use crate::config::{CliError, OutputFormat, ResolvedConfig, SCHEMA_VERSION};

const TOL_EXACT_VS_CLOSED: f64 = 1e-8;
const TOL_MASTER_VS_EXACT: f64 = 1e-6;
const TOL_MASTER_VS_CLOSED: f64 = 1e-6;
/// Minimum fraction of grid points an ensemble must place within three
/// standard errors of the master-equation curve.
const ENSEMBLE_MIN_FRACTION: f64 = 0.99;
/// Absolute slack added to the three-sigma band; covers points where the
/// sample standard error is itself zero (t = 0, decoupled states).
const ENSEMBLE_BAND_SLACK: f64 = 1e-12;

struct Prepared {
    params: ModelParams,
    generator: Generator,
    grid: TimeGrid,
}

impl Prepared {
    fn new(cfg: &ResolvedConfig) -> Result<Self, CliError> {
        let hilbert = HilbertConfig::new(cfg.n_max)?;
        let params = ModelParams::new(1.0, cfg.eta, hilbert)?;
        let generator = build_generator(cfg.sideband, &params);
        let grid = TimeGrid::new(cfg.t0, cfg.tmax, cfg.points)?;
        Ok(Self {
            params,
            generator,
            grid,
        })
    }

    fn initial_state(&self, n: usize) -> DensityMatrix {
        DensityMatrix::pure(self.params.cfg(), ElectronicState::Ground, n)
    }
}

fn master_trace(
    cfg: &ResolvedConfig,
    prep: &Prepared,
    n_init: usize,
) -> Result<(PopulationTrace, InvariantReport, &'static str), CliError> {
    let rho0 = prep.initial_state(n_init);
    let opts = EvolveOptions {
        step_factor: cfg.step_factor,
        ..EvolveOptions::default()
    };
    let evolution = if cfg.lambda > 0.0 {
        evolve_master_phase_with(
            &rho0,
            &prep.generator,
            &PhaseNoise::new(cfg.lambda)?,
            &prep.grid,
            &opts,
        )?
    } else {
        evolve_master_intensity_with(
            &rho0,
            &prep.generator,
            &IntensityNoise::new(cfg.gamma)?,
            &prep.grid,
            &opts,
        )?
    };
    let engine = if cfg.lambda > 0.0 {
        "master-phase"
    } else {
        "master-intensity"
    };
    Ok((evolution.trace, evolution.invariants, engine))
}

fn ensemble_trace(
    cfg: &ResolvedConfig,
    prep: &Prepared,
) -> Result<(EnsembleResult, &'static str), CliError> {
    let rho0 = prep.initial_state(cfg.n_init);
    let tcfg = TrajectoryConfig {
        dt: cfg.dt,
        n_traj: cfg.n_traj,
        seed: cfg.seed,
    };
    // Noiseless runs go through the phase sampler: its substeps apply the
    // exact unitary, while the intensity integrator's Euler drift would
    // slowly inflate a noise-free trajectory.
    if cfg.lambda > 0.0 || cfg.gamma == 0.0 {
        let result = run_ensemble_phase(
            &rho0,
            &prep.generator,
            &PhaseNoise::new(cfg.lambda)?,
            &prep.grid,
            &tcfg,
        )?;
        Ok((result, "trajectories-phase"))
    } else {
        let result = run_ensemble_intensity(
            &rho0,
            &prep.generator,
            &IntensityNoise::new(cfg.gamma)?,
            &prep.grid,
            &tcfg,
        )?;
        Ok((result, "trajectories-intensity"))
    }
}

fn closed_form_trace(cfg: &ResolvedConfig, grid: &TimeGrid) -> Option<Vec<f64>> {
    if cfg.lambda > 0.0 {
        // Only the red sideband has a closed dephasing solution.
        if cfg.sideband != SidebandKind::RedSideband {
            return None;
        }
        Some(
            grid.times()
                .iter()
                .map(|&t| pg_phase_red(cfg.n_init, cfg.eta, 1.0, cfg.lambda, t))
                .collect(),
        )
    } else {
        Some(
            grid.times()
                .iter()
                .map(|&t| {
                    pg_intensity(
                        cfg.sideband,
                        FormulaVariant::SelfConsistent,
                        cfg.n_init,
                        cfg.eta,
                        1.0,
                        cfg.gamma,
                        t,
                    )
                })
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------
// Output writers.

/// Fixed CSV shape: 17 significant digits, '.' decimal separator, '\n'
/// line ends, so outputs diff cleanly across platforms.
fn format_csv(trace: &PopulationTrace) -> String {
    let times = trace.times();
    let pg = trace.pg();
    let mut s = String::with_capacity(48 * times.len());
    match trace.stderr() {
        Some(se) => {
            s.push_str("tau,pg,stderr\n");
            for i in 0..times.len() {
                s.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e}\n",
                    times[i], pg[i], se[i]
                ));
            }
        }
        None => {
            s.push_str("tau,pg\n");
            for i in 0..times.len() {
                s.push_str(&format!("{:.16e},{:.16e}\n", times[i], pg[i]));
            }
        }
    }
    s
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io("cannot serialize report", std::io::Error::other(e)))?;
    text.push('\n');
    write_file(path, &text)
}

#[derive(Serialize)]
struct EnsembleMeta {
    n_traj: usize,
    dt_effective: f64,
    substeps_per_interval: usize,
    /// Largest population seen in the top two Fock levels; nonzero values
    /// mean the truncation is being exercised.
    truncation_top2_max: f64,
}

impl From<&EnsembleResult> for EnsembleMeta {
    fn from(r: &EnsembleResult) -> Self {
        Self {
            n_traj: r.n_traj,
            dt_effective: r.dt_effective,
            substeps_per_interval: r.substeps_per_interval,
            truncation_top2_max: r.truncation_top2_max,
        }
    }
}

/// The JSON record written next to (or instead of) the CSV.
#[derive(Serialize)]
struct TraceRecord<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    engine: &'static str,
    config: &'a ResolvedConfig,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    invariants: Option<InvariantReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<EnsembleMeta>,
    /// Trace arrays, embedded only for `--format json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pg: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<Vec<f64>>,
}

fn write_trace_outputs(
    cfg: &ResolvedConfig,
    command: &'static str,
    engine: &'static str,
    trace: &PopulationTrace,
    invariants: Option<InvariantReport>,
    ensemble: Option<EnsembleMeta>,
) -> Result<(), CliError> {
    let json_path = PathBuf::from(format!("{}.json", cfg.out));
    let mut record = TraceRecord {
        schema_version: SCHEMA_VERSION,
        tool: "ionsim",
        version: env!("CARGO_PKG_VERSION"),
        command,
        engine,
        config: cfg,
        outputs: vec![json_path.display().to_string()],
        invariants,
        ensemble,
        tau: None,
        pg: None,
        stderr: None,
    };
    match cfg.format {
        OutputFormat::Csv => {
            let csv_path = PathBuf::from(format!("{}.csv", cfg.out));
            record.outputs.insert(0, csv_path.display().to_string());
            write_file(&csv_path, &format_csv(trace))?;
        }
        OutputFormat::Json => {
            record.tau = Some(trace.times());
            record.pg = Some(trace.pg().to_vec());
            record.stderr = trace.stderr().map(<[f64]>::to_vec);
        }
    }
    write_json(&json_path, &record)
}

// ---------------------------------------------------------------------
// Subcommands.

pub fn cmd_simulate(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let prep = Prepared::new(cfg)?;
    let (trace, invariants, engine) = master_trace(cfg, &prep, cfg.n_init)?;
    write_trace_outputs(cfg, "simulate", engine, &trace, Some(invariants), None)
}

pub fn cmd_trajectories(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let prep = Prepared::new(cfg)?;
    let (result, engine) = ensemble_trace(cfg, &prep)?;
    let meta = EnsembleMeta::from(&result);
    write_trace_outputs(cfg, "trajectories", engine, &result.trace, None, Some(meta))
}

#[derive(Serialize)]
struct Leg {
    name: &'static str,
    max_abs_diff: f64,
    tolerance: f64,
    pass: bool,
}

impl Leg {
    fn new(name: &'static str, max_abs_diff: f64, tolerance: f64) -> Self {
        Self {
            name,
            max_abs_diff,
            tolerance,
            pass: max_abs_diff <= tolerance,
        }
    }
}

#[derive(Serialize)]
struct EnsembleLeg {
    n_traj: usize,
    n_points: usize,
    points_within_band: usize,
    fraction: f64,
    min_fraction: f64,
    max_abs_diff: f64,
    median_stderr: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CarrierVariants {
    max_abs_diff: f64,
    status: &'static str,
    erratum_id: &'static str,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ResolvedConfig,
    engine: &'static str,
    legs: Vec<Leg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<EnsembleLeg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_variants: Option<CarrierVariants>,
    discrepancy_report: Vec<Erratum>,
    pass: bool,
}

fn trace_vs_values(trace: &PopulationTrace, values: &[f64]) -> f64 {
    trace
        .pg()
        .iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn cmd_compare(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let prep = Prepared::new(cfg)?;
    let (master, _invariants, engine) = master_trace(cfg, &prep, cfg.n_init)?;
    let closed = closed_form_trace(cfg, &prep.grid);
    let mut legs = Vec::new();

    if cfg.lambda == 0.0 {
        let rho0 = prep.initial_state(cfg.n_init);
        let exact = ExactPropagator::new(&prep.generator, &IntensityNoise::new(cfg.gamma)?)?
            .population_trace(&rho0, &prep.grid)?;
        if let Some(values) = &closed {
            legs.push(Leg::new(
                "exact-vs-closed-form",
                trace_vs_values(&exact, values),
                TOL_EXACT_VS_CLOSED,
            ));
        }
        legs.push(Leg::new(
            "master-vs-exact",
            master.max_abs_diff(&exact)?,
            TOL_MASTER_VS_EXACT,
        ));
    }
    if let Some(values) = &closed {
        legs.push(Leg::new(
            "master-vs-closed-form",
            trace_vs_values(&master, values),
            TOL_MASTER_VS_CLOSED,
        ));
    }

    let (result, _) = ensemble_trace(cfg, &prep)?;
    let se = result
        .trace
        .stderr()
        .expect("ensemble traces always carry standard errors");
    let mut within = 0usize;
    let mut max_abs_diff: f64 = 0.0;
    for ((&e, &m), &s) in result.trace.pg().iter().zip(master.pg()).zip(se) {
        let diff = (e - m).abs();
        max_abs_diff = max_abs_diff.max(diff);
        if diff <= 3.0 * s + ENSEMBLE_BAND_SLACK {
            within += 1;
        }
    }
    let n_points = master.pg().len();
    let fraction = within as f64 / n_points as f64;
    let mut sorted: Vec<f64> = se.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ensemble = EnsembleLeg {
        n_traj: result.n_traj,
        n_points,
        points_within_band: within,
        fraction,
        min_fraction: ENSEMBLE_MIN_FRACTION,
        max_abs_diff,
        median_stderr: sorted[sorted.len() / 2],
        pass: fraction >= ENSEMBLE_MIN_FRACTION,
    };

    let carrier_variants = (cfg.sideband == SidebandKind::Carrier).then(|| {
        let dev = prep
            .grid
            .times()
            .iter()
            .map(|&t| {
                let a = pg_intensity(
                    cfg.sideband,
                    FormulaVariant::Published,
                    cfg.n_init,
                    cfg.eta,
                    1.0,
                    cfg.gamma,
                    t,
                );
                let b = pg_intensity(
                    cfg.sideband,
                    FormulaVariant::SelfConsistent,
                    cfg.n_init,
                    cfg.eta,
                    1.0,
                    cfg.gamma,
                    t,
                );
                (a - b).abs()
            })
            .fold(0.0, f64::max);
        CarrierVariants {
            max_abs_diff: dev,
            status: "known erratum",
            erratum_id: "carrier-dressed-splitting-half-factor",
        }
    });

    let pass = legs.iter().all(|l| l.pass) && ensemble.pass;
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        tool: "ionsim",
        version: env!("CARGO_PKG_VERSION"),
        command: "compare",
        config: cfg,
        engine,
        legs,
        ensemble: Some(ensemble),
        carrier_variants,
        discrepancy_report: discrepancy_report(),
        pass,
    };
    for leg in &report.legs {
        println!(
            "{}: max |dPg| = {:.3e} (tol {:.1e}) {}",
            leg.name,
            leg.max_abs_diff,
            leg.tolerance,
            if leg.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(e) = &report.ensemble {
        println!(
            "ensemble-vs-master: {}/{} points within 3 stderr {}",
            e.points_within_band,
            e.n_points,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    write_json(&PathBuf::from(format!("{}.json", cfg.out)), &report)
}

/// Lower Fock index of the pair the drive couples from `|g, n>`. The
/// power-law regression runs against level + 1, the number of quanta the
/// stronger-coupled arm exchanges, so a rate linear in that count fits
/// with exponent one on every sideband.
fn pair_level(kind: SidebandKind, n: usize) -> Option<usize> {
    match kind {
        SidebandKind::Carrier | SidebandKind::BlueSideband => Some(n),
        SidebandKind::RedSideband => n.checked_sub(1),
        SidebandKind::SecondRedSideband => n.checked_sub(2),
    }
}

#[derive(Serialize)]
struct LevelRow {
    n_init: usize,
    level: usize,
    omega: f64,
    gamma: f64,
    fit_residual_rms: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct LevelFailure {
    n_init: usize,
    message: String,
}

#[derive(Serialize)]
struct FitBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<PowerLawFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ExponentComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ResolvedConfig,
    engine: &'static str,
    levels: Vec<LevelRow>,
    failures: Vec<LevelFailure>,
    raw: FitBlock,
    per_rabi_cycle: FitBlock,
}

fn power_law_block(rates: &[LevelRate], normalization: Normalization) -> FitBlock {
    match fit_power_law(rates, normalization) {
        Ok(fit) => FitBlock {
            comparison: Some(exponent_comparison(&fit)),
            fit: Some(fit),
            error: None,
        },
        Err(e) => FitBlock {
            fit: None,
            comparison: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn cmd_sweep_fit(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let prep = Prepared::new(cfg)?;
    let mut levels = Vec::new();
    let mut failures = Vec::new();
    let mut rates = Vec::new();
    let mut engine = "master-intensity";

    for n in cfg.n_from..=cfg.n_to {
        let trace = match master_trace(cfg, &prep, n) {
            Ok((trace, _, e)) => {
                engine = e;
                trace
            }
            Err(e) => {
                failures.push(LevelFailure {
                    n_init: n,
                    message: e.message,
                });
                continue;
            }
        };
        let fit = match fit_damped_cosine(&trace) {
            Ok(fit) => fit,
            Err(e) => {
                failures.push(LevelFailure {
                    n_init: n,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if fit.degenerate {
            failures.push(LevelFailure {
                n_init: n,
                message: "degenerate trace: no oscillation to fit".to_owned(),
            });
            continue;
        }
        let level = match pair_level(cfg.sideband, n) {
            Some(level) => level,
            None => {
                failures.push(LevelFailure {
                    n_init: n,
                    message: "initial level is decoupled on this sideband".to_owned(),
                });
                continue;
            }
        };
        rates.push(LevelRate {
            n: level,
            gamma: fit.gamma,
            omega: Some(fit.omega),
        });
        levels.push(LevelRow {
            n_init: n,
            level,
            omega: fit.omega,
            gamma: fit.gamma,
            fit_residual_rms: fit.residual_rms,
            iterations: fit.iterations,
        });
    }

    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        tool: "ionsim",
        version: env!("CARGO_PKG_VERSION"),
        command: "sweep-fit",
        config: cfg,
        engine,
        raw: power_law_block(&rates, Normalization::Raw),
        per_rabi_cycle: power_law_block(&rates, Normalization::PerRabiCycle),
        levels,
        failures,
    };

    let mut csv = String::from("n_init,level,omega,gamma\n");
    for row in &report.levels {
        csv.push_str(&format!(
            "{},{},{:.16e},{:.16e}\n",
            row.n_init, row.level, row.omega, row.gamma
        ));
    }
    write_file(&PathBuf::from(format!("{}-levels.csv", cfg.out)), &csv)?;
    for failure in &report.failures {
        println!("n = {}: {}", failure.n_init, failure.message);
    }
    for (name, block) in [("raw", &report.raw), ("per-rabi-cycle", &report.per_rabi_cycle)] {
        match (&block.fit, &block.error) {
            (Some(fit), _) => println!(
                "{name}: exponent = {:.4} +- {:.4}",
                fit.exponent, fit.exponent_stderr
            ),
            (None, Some(e)) => println!("{name}: fit failed: {e}"),
            (None, None) => unreachable!("fit block carries a result or an error"),
        }
    }
    write_json(&PathBuf::from(format!("{}.json", cfg.out)), &report)?;

    if report.raw.fit.is_none() || report.per_rabi_cycle.fit.is_none() {
        return Err(CliError {
            code: 4,
            message: "power-law regression failed; see the report for per-level details"
                .to_owned(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct PulseAreaReport<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ResolvedConfig,
    stats: PulseAreaStats,
}

pub fn cmd_pulse_area(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let noise = IntensityNoise::new(cfg.gamma)?;
    let stats = pulse_area_stats(1.0, &noise, cfg.t_pulse, cfg.n_samples, cfg.seed)?;
    println!(
        "pulse area: mean = {:.6} (expected {:.6}), fractional rms error = {:.4}",
        stats.mean, stats.expected_mean, stats.fractional_error
    );
    let report = PulseAreaReport {
        schema_version: SCHEMA_VERSION,
        tool: "ionsim",
        version: env!("CARGO_PKG_VERSION"),
        command: "pulse-area",
        config: cfg,
        stats,
    };
    write_json(&PathBuf::from(format!("{}.json", cfg.out)), &report)
}

#[derive(Serialize)]
struct ErrataReport {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    discrepancy_report: Vec<Erratum>,
}

pub fn cmd_report_errata(out: &str) -> Result<(), CliError> {
    let report = ErrataReport {
        schema_version: SCHEMA_VERSION,
        tool: "ionsim",
        version: env!("CARGO_PKG_VERSION"),
        command: "report-errata",
        discrepancy_report: discrepancy_report(),
    };
    if out == "-" {
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::io("cannot serialize report", std::io::Error::other(e)))?;
        text.push('\n');
        print!("{text}");
        Ok(())
    } else {
        write_json(&PathBuf::from(format!("{out}.json")), &report)
    }
}
