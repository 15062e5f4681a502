//! Acceptance gate: one check per line, nonzero exit if any fails.
//!
//! Covers solver cross-validation, the default-profile curve, stochastic
//! convergence, the fit pipeline, pulse-area statistics, invariant
//! bookkeeping, and byte-level reproducibility of the CLI outputs.
//! Checks 3, 8, and 10 drive the installed binary; the rest call the
//! library directly. Everything runs sequentially so the reported
//! runtimes stay attributable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use ionsim::{
    analytic_eigenpairs, analytic_spectrum, build_generator, discrepancy_report,
    evolve_master_intensity, evolve_master_intensity_with, evolve_master_phase, fit_damped_cosine,
    pg_intensity, pg_phase_red, pulse_area_stats, run_ensemble_intensity, run_ensemble_phase,
    step_ito_intensity, DensityMatrix, ElectronicState, EvolveOptions, ExactPropagator,
    FormulaVariant, HilbertConfig, IntensityNoise, InvariantReport, ModelParams, PhaseNoise,
    PopulationTrace, SidebandKind, TimeGrid, TrajectoryConfig, DETERMINISTIC_PG_TOL,
};

const ETA: f64 = 0.2;
const GAMMA: f64 = 0.041;

type CheckResult = Result<String, String>;

struct Gate {
    work: PathBuf,
    failed: usize,
}

impl Gate {
    fn report(&mut self, number: usize, label: &str, result: CheckResult) {
        match result {
            Ok(detail) => println!("[PASS] {number:2}. {label}: {detail}"),
            Err(reason) => {
                self.failed += 1;
                println!("[FAIL] {number:2}. {label}: {reason}");
            }
        }
    }
}

fn lib<T>(r: ionsim::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn model(n_max: usize) -> Result<ModelParams, String> {
    let cfg = lib(HilbertConfig::new(n_max))?;
    lib(ModelParams::new(1.0, ETA, cfg))
}

fn ground(params: &ModelParams, n: usize) -> DensityMatrix {
    DensityMatrix::pure(params.cfg(), ElectronicState::Ground, n)
}

fn run_cli(work: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .current_dir(work)
        .args(args)
        .output()
        .map_err(|e| format!("cannot launch CLI: {e}"))?;
    if !output.status.success() {
        return Err(format!(
            "`ionsim {}` exited with {:?}: {}",
            args.join(" "),
            output.status.code(),
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    Ok(output.stdout)
}

fn read_csv_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut tau = Vec::new();
    let mut pg = Vec::new();
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        let t: f64 = cols
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad CSV line: {line}"))?;
        let p: f64 = cols
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad CSV line: {line}"))?;
        tau.push(t);
        pg.push(p);
    }
    Ok((tau, pg))
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad JSON in {}: {e}", path.display()))
}

// -------------------------------------------------------------------
// 1. Exact propagator vs master-equation integrator, all sidebands.

fn check_solver_agreement(reports: &mut Vec<InvariantReport>) -> CheckResult {
    let params = model(6)?;
    let grid = lib(TimeGrid::new(0.0, 50.0, 501))?;
    let noise = lib(IntensityNoise::new(GAMMA))?;
    let opts = EvolveOptions {
        step_factor: 0.02,
        ..EvolveOptions::default()
    };
    let mut worst: f64 = 0.0;
    for kind in SidebandKind::ALL {
        let g = build_generator(kind, &params);
        let exact = lib(ExactPropagator::new(&g, &noise))?;
        for n in 0..=3 {
            let rho0 = ground(&params, n);
            let evolution = lib(evolve_master_intensity_with(&rho0, &g, &noise, &grid, &opts))?;
            let reference = lib(exact.population_trace(&rho0, &grid))?;
            let diff = lib(evolution.trace.max_abs_diff(&reference))?;
            reports.push(evolution.invariants);
            if diff > 1e-6 {
                return Err(format!(
                    "{} n={n}: max |dPg| = {diff:.3e} exceeds 1e-6",
                    kind.label()
                ));
            }
            worst = worst.max(diff);
        }
    }
    Ok(format!(
        "16 sideband/level combinations agree, max |dPg| = {worst:.3e} (tol 1e-6)"
    ))
}

// -------------------------------------------------------------------
// 2. Closed-form populations vs the exact propagator; variant identity.

fn check_closed_forms() -> CheckResult {
    let params = model(6)?;
    let grid = lib(TimeGrid::new(0.0, 50.0, 501))?;
    let noise = lib(IntensityNoise::new(GAMMA))?;
    let mut worst: f64 = 0.0;
    for kind in SidebandKind::ALL {
        let g = build_generator(kind, &params);
        let exact = lib(ExactPropagator::new(&g, &noise))?;
        for n in 0..=3 {
            let rho0 = ground(&params, n);
            let reference = lib(exact.population_trace(&rho0, &grid))?;
            for (k, &t) in grid.times().iter().enumerate() {
                let closed =
                    pg_intensity(kind, FormulaVariant::SelfConsistent, n, ETA, 1.0, GAMMA, t);
                let diff = (closed - reference.pg()[k]).abs();
                worst = worst.max(diff);
                if diff > 1e-8 {
                    return Err(format!(
                        "{} n={n} t={t:.2}: closed-form off by {diff:.3e} (tol 1e-8)",
                        kind.label()
                    ));
                }
                if kind != SidebandKind::Carrier {
                    let published =
                        pg_intensity(kind, FormulaVariant::Published, n, ETA, 1.0, GAMMA, t);
                    if published.to_bits() != closed.to_bits() {
                        return Err(format!(
                            "{} n={n} t={t:.2}: published and self-consistent variants differ",
                            kind.label()
                        ));
                    }
                }
            }
        }
    }
    let errata = discrepancy_report();
    let carrier = errata
        .iter()
        .find(|e| e.id == "carrier-dressed-splitting-half-factor")
        .ok_or("carrier variant mismatch is not reported")?;
    let dev = carrier
        .max_observed_deviation
        .ok_or("carrier report lacks an observed deviation")?;
    if dev <= 0.1 {
        return Err(format!("carrier variant deviation {dev:.3} is implausibly small"));
    }
    Ok(format!(
        "closed forms match to {worst:.3e} (tol 1e-8); carrier mismatch reported at {dev:.3}"
    ))
}

// -------------------------------------------------------------------
// 3. Default CLI profile: damped cosine at the documented frequency and
// rate.

fn check_default_profile(work: &Path) -> CheckResult {
    run_cli(work, &["simulate"])?;
    let (tau, pg) = read_csv_trace(&work.join("simulate.csv"))?;
    if tau[0] != 0.0 || pg[0] != 1.0 {
        return Err(format!("first CSV row is ({}, {}), expected (0, 1)", tau[0], pg[0]));
    }
    let grid = lib(TimeGrid::new(0.0, 50.0, 501))?;
    let trace = lib(PopulationTrace::new(grid, pg, None, DETERMINISTIC_PG_TOL))?;
    let fit = lib(fit_damped_cosine(&trace))?;
    let omega_err = (fit.omega - 0.4).abs() / 0.4;
    let gamma_err = (fit.gamma - 0.00328).abs() / 0.00328;
    if omega_err > 0.01 || gamma_err > 0.01 {
        return Err(format!(
            "fitted omega = {:.6}, gamma = {:.6e}; relative errors {:.2e}, {:.2e} exceed 1%",
            fit.omega, fit.gamma, omega_err, gamma_err
        ));
    }
    Ok(format!(
        "omega = {:.5} (target 0.4), gamma = {:.5e} (target 3.28e-3), both within 1%",
        fit.omega, fit.gamma
    ))
}

// -------------------------------------------------------------------
// 4. Ensemble-vs-master statistical agreement and stderr scaling.

fn check_ensemble_convergence(reports: &mut Vec<InvariantReport>) -> CheckResult {
    let params = model(8)?;
    let grid = lib(TimeGrid::new(0.0, 50.0, 501))?;
    let noise = lib(IntensityNoise::new(GAMMA))?;
    let g = build_generator(SidebandKind::BlueSideband, &params);
    let rho0 = ground(&params, 0);
    let master = lib(evolve_master_intensity(&rho0, &g, &noise, &grid))?;
    reports.push(master.invariants);

    let base = TrajectoryConfig {
        dt: 1e-3,
        n_traj: 10_000,
        seed: 11,
    };
    let ens1 = lib(run_ensemble_intensity(&rho0, &g, &noise, &grid, &base))?;
    let se1 = ens1.trace.stderr().expect("ensemble carries stderr");
    let mut within = 0usize;
    for ((&e, &m), &s) in ens1
        .trace
        .pg()
        .iter()
        .zip(master.trace.pg())
        .zip(se1)
    {
        if (e - m).abs() <= 3.0 * s + 1e-12 {
            within += 1;
        }
    }
    let fraction = within as f64 / grid.n_points() as f64;
    let median = |se: &[f64]| {
        let mut v = se.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let med1 = median(se1);
    if fraction < 0.99 {
        return Err(format!(
            "only {within}/{} points within 3 stderr ({:.1}%, need 99%)",
            grid.n_points(),
            100.0 * fraction
        ));
    }
    if med1 > 0.01 {
        return Err(format!("median stderr {med1:.4} exceeds 0.01"));
    }

    let double = TrajectoryConfig {
        n_traj: 20_000,
        ..base
    };
    let ens2 = lib(run_ensemble_intensity(&rho0, &g, &noise, &grid, &double))?;
    let med2 = median(ens2.trace.stderr().expect("ensemble carries stderr"));
    let ratio = med2 / med1;
    let target = 0.5_f64.sqrt();
    if !(0.8 * target..=1.2 * target).contains(&ratio) {
        return Err(format!(
            "doubling n_traj changed median stderr by x{ratio:.3}, outside {:.3}..{:.3}",
            0.8 * target,
            1.2 * target
        ));
    }
    Ok(format!(
        "{within}/501 points within 3 stderr, median stderr {med1:.2e}, doubling ratio {ratio:.3}"
    ))
}

// -------------------------------------------------------------------
// 5. Phase-noise agreement: sampled paths vs master equation vs closed
// form, plus the exactly-decoupled level.

fn check_phase_channel(reports: &mut Vec<InvariantReport>) -> CheckResult {
    let params = model(8)?;
    let grid = lib(TimeGrid::new(0.0, 10.0, 101))?;
    let g = build_generator(SidebandKind::RedSideband, &params);
    let mut worst_det: f64 = 0.0;
    let mut worst_fraction: f64 = 1.0;
    for n in 1..=3 {
        for lambda in [0.05, 0.1] {
            let noise = lib(PhaseNoise::new(lambda))?;
            let rho0 = ground(&params, n);
            let master = lib(evolve_master_phase(&rho0, &g, &noise, &grid))?;
            reports.push(master.invariants);
            for (k, &t) in grid.times().iter().enumerate() {
                let closed = pg_phase_red(n, ETA, 1.0, lambda, t);
                let diff = (closed - master.trace.pg()[k]).abs();
                worst_det = worst_det.max(diff);
                if diff > 1e-6 {
                    return Err(format!(
                        "n={n} lambda={lambda}: master vs closed form off by {diff:.3e} at t={t:.2}"
                    ));
                }
            }
            let cfg = TrajectoryConfig {
                dt: 2e-3,
                n_traj: 2000,
                seed: 7 + n as u64,
            };
            let ens = lib(run_ensemble_phase(&rho0, &g, &noise, &grid, &cfg))?;
            let se = ens.trace.stderr().expect("ensemble carries stderr");
            let within = ens
                .trace
                .pg()
                .iter()
                .zip(master.trace.pg())
                .zip(se)
                .filter(|((e, m), s)| (**e - **m).abs() <= 3.0 * **s + 1e-9)
                .count();
            let fraction = within as f64 / grid.n_points() as f64;
            worst_fraction = worst_fraction.min(fraction);
            if fraction < 0.99 {
                return Err(format!(
                    "n={n} lambda={lambda}: only {within}/101 ensemble points within 3 stderr"
                ));
            }
        }
    }

    // The decoupled level must stay put exactly in every route.
    let rho0 = ground(&params, 0);
    let noise = lib(PhaseNoise::new(0.1))?;
    let master = lib(evolve_master_phase(&rho0, &g, &noise, &grid))?;
    reports.push(master.invariants);
    let cfg = TrajectoryConfig {
        dt: 2e-3,
        n_traj: 64,
        seed: 5,
    };
    let ens = lib(run_ensemble_phase(&rho0, &g, &noise, &grid, &cfg))?;
    for &t in &grid.times() {
        if pg_phase_red(0, ETA, 1.0, 0.1, t) != 1.0 {
            return Err("closed form leaves the decoupled level".to_owned());
        }
    }
    if master.trace.pg().iter().any(|&p| p != 1.0) {
        return Err("master equation leaves the decoupled level".to_owned());
    }
    if ens.trace.pg().iter().any(|&p| p != 1.0) {
        return Err("sampled paths leave the decoupled level".to_owned());
    }
    Ok(format!(
        "6 level/strength combinations agree (deterministic {worst_det:.2e}, worst ensemble \
         fraction {:.3}); decoupled level fixed exactly in all three routes",
        worst_fraction
    ))
}

// -------------------------------------------------------------------
// 6. Numerical spectra vs the closed-form eigenvalues.

fn check_spectra() -> CheckResult {
    let params = model(8)?;
    let mut worst: f64 = 0.0;
    for kind in SidebandKind::ALL {
        let g = build_generator(kind, &params);
        let eig = lib(g.matrix().eigen_hermitian())?;
        let mut analytic = analytic_spectrum(kind, &params);
        analytic.sort_by(f64::total_cmp);
        if analytic.len() != eig.values.len() {
            return Err(format!("{}: spectrum length mismatch", kind.label()));
        }
        for (a, b) in analytic.iter().zip(&eig.values) {
            let diff = (a - b).abs();
            worst = worst.max(diff);
            if diff > 1e-10 {
                return Err(format!(
                    "{}: eigenvalue off by {diff:.3e} (tol 1e-10)",
                    kind.label()
                ));
            }
        }
    }
    // The two-quantum pair splitting must grow with both participating
    // occupation numbers.
    let eta_omega = ETA;
    for n in 0..=params.cfg().n_max() - 2 {
        let (plus, minus) = lib(analytic_eigenpairs(
            SidebandKind::SecondRedSideband,
            &params,
            n,
        ))?;
        let expected = eta_omega * (((n + 1) * (n + 2)) as f64).sqrt();
        if (plus.value.abs() - expected).abs() > 1e-12
            || (minus.value.abs() - expected).abs() > 1e-12
        {
            return Err(format!(
                "second-red pair at n={n}: |value| = {:.12}, expected {expected:.12}",
                plus.value.abs()
            ));
        }
    }
    let flagged = discrepancy_report()
        .iter()
        .any(|e| e.id == "second-red-pair-index-offset");
    if !flagged {
        return Err("second-red eigenvalue discrepancy is not reported".to_owned());
    }
    Ok(format!(
        "all four spectra match analytics to {worst:.2e} (tol 1e-10); index-offset erratum reported"
    ))
}

// -------------------------------------------------------------------
// 7. Invariant audit across every deterministic run above, plus exact
// per-step trace preservation of the stochastic stepper.

fn check_invariants(reports: &[InvariantReport], work: &Path) -> CheckResult {
    if reports.is_empty() {
        return Err("no invariant reports were collected".to_owned());
    }
    let mut summary = String::new();
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for r in reports {
        worst_trace = worst_trace.max(r.max_trace_drift);
        worst_herm = worst_herm.max(r.max_hermiticity_dev);
        worst_eig = worst_eig.min(r.min_eigenvalue);
        if let Some(m) = r.max_moment_g_drift {
            worst_moment = worst_moment.max(m);
        }
        if let Some(m) = r.max_moment_g2_drift {
            worst_moment = worst_moment.max(m);
        }
    }
    // The CLI run of check 3 reports through its sidecar.
    let sidecar = read_json(&work.join("simulate.json"))?;
    let inv = &sidecar["invariants"];
    for (key, bound) in [("max_trace_drift", 1e-9), ("max_hermiticity_dev", 1e-10)] {
        let v = inv[key].as_f64().ok_or(format!("sidecar lacks {key}"))?;
        if v > bound {
            return Err(format!("CLI run: {key} = {v:.3e} exceeds {bound:.0e}"));
        }
    }
    let v = inv["min_eigenvalue"]
        .as_f64()
        .ok_or("sidecar lacks min_eigenvalue")?;
    worst_eig = worst_eig.min(v);

    if worst_trace > 1e-9 {
        return Err(format!("trace drift {worst_trace:.3e} exceeds 1e-9"));
    }
    if worst_herm > 1e-10 {
        return Err(format!("hermiticity deviation {worst_herm:.3e} exceeds 1e-10"));
    }
    if worst_eig < -1e-8 {
        return Err(format!("eigenvalue floor {worst_eig:.3e} below -1e-8"));
    }
    if worst_moment > 1e-8 {
        return Err(format!(
            "conserved-moment drift {worst_moment:.3e} exceeds 1e-8 relative"
        ));
    }
    write!(
        summary,
        "{} runs: trace {worst_trace:.1e}, hermiticity {worst_herm:.1e}, \
         eigenvalue floor {worst_eig:.1e}, moment drift {worst_moment:.1e}",
        reports.len() + 1
    )
    .expect("write to string");

    // One stochastic path, checked step by step.
    let params = model(5)?;
    let g = build_generator(SidebandKind::BlueSideband, &params);
    let noise = lib(IntensityNoise::new(GAMMA))?;
    let mut rho = ground(&params, 1);
    let dt = 1e-3_f64;
    let mut z = 0.37_f64;
    for k in 0..500 {
        // Deterministic bounded stand-in for a Gaussian draw; the trace
        // identity must hold pathwise for any increment.
        z = (4.0 * z * (1.0 - z)).clamp(0.0, 1.0);
        let dw = (z - 0.5) * 3.0 * dt.sqrt();
        rho = lib(step_ito_intensity(&rho, &g, &noise, dt, dw))?;
        let tr = rho.matrix().trace();
        if (tr.re - 1.0).abs() > 1e-13 || tr.im != 0.0 {
            return Err(format!(
                "trace left 1 at step {k}: {} + {}i",
                tr.re, tr.im
            ));
        }
    }
    write!(summary, "; 500 sampled steps hold trace to 1e-13").expect("write to string");
    Ok(summary)
}

// -------------------------------------------------------------------
// 8. CLI exponent pipeline on the blue sideband.

fn check_exponent_pipeline(work: &Path) -> CheckResult {
    run_cli(
        work,
        &["sweep-fit", "--tmax", "100", "--points", "1001", "--out", "sweep"],
    )?;
    let report = read_json(&work.join("sweep.json"))?;
    let raw = report["raw"]["fit"]["exponent"]
        .as_f64()
        .ok_or("report lacks a raw exponent")?;
    let cyc = report["per_rabi_cycle"]["fit"]["exponent"]
        .as_f64()
        .ok_or("report lacks a per-cycle exponent")?;
    if (raw - 1.0).abs() > 0.02 {
        return Err(format!("raw exponent {raw:.4} is not 1.00 +- 0.02"));
    }
    if (cyc - 0.5).abs() > 0.02 {
        return Err(format!("per-cycle exponent {cyc:.4} is not 0.50 +- 0.02"));
    }
    let comparison = &report["per_rabi_cycle"]["comparison"];
    let sqrt_ref = comparison["sqrt_scaling"]["reference"].as_f64();
    let exp_ref = comparison["experimental_scaling"]["reference"].as_f64();
    if sqrt_ref != Some(0.5) || exp_ref != Some(0.7) {
        return Err("comparison block lacks the 0.5 and 0.7 reference values".to_owned());
    }
    if comparison["sqrt_scaling"]["within_band"] != serde_json::Value::Bool(true) {
        return Err("per-cycle exponent does not land on the 0.5 reference".to_owned());
    }
    if comparison["experimental_scaling"]["within_band"] != serde_json::Value::Bool(false) {
        return Err(
            "per-cycle exponent unexpectedly matches the 0.7 reference; the measured \
             value should not reproduce apparatus-specific decay"
                .to_owned(),
        );
    }
    Ok(format!(
        "raw exponent {raw:.4} (target 1.00 +- 0.02), per-cycle {cyc:.4} (target 0.50 +- 0.02), \
         references 0.5/0.7 contrasted"
    ))
}

// -------------------------------------------------------------------
// 9. Pulse-area moments against their closed expressions.

fn check_pulse_area() -> CheckResult {
    let omega0 = 2.0 * std::f64::consts::PI * 470e3;
    let t_pulse = 1e-6;
    let mut details = Vec::new();
    for (gamma, expected_fe) in [(1e-10, 0.01), (1e-8, 0.1)] {
        let noise = lib(IntensityNoise::new(gamma))?;
        let stats = lib(pulse_area_stats(omega0, &noise, t_pulse, 100_000, 3))?;
        if (stats.fractional_error - expected_fe).abs() > 1e-12 {
            return Err(format!(
                "fractional error {} differs from sqrt(Gamma/T) = {expected_fe}",
                stats.fractional_error
            ));
        }
        let var_ratio = stats.variance / stats.expected_variance;
        if (var_ratio - 1.0).abs() > 0.05 {
            return Err(format!(
                "Gamma={gamma:.0e}: sample variance off by {:.2}% (tol 5%)",
                100.0 * (var_ratio - 1.0).abs()
            ));
        }
        let mean_err = (stats.mean - stats.expected_mean).abs() / stats.expected_mean;
        if mean_err > 1e-3 {
            return Err(format!(
                "Gamma={gamma:.0e}: mean area off by {mean_err:.2e} relative"
            ));
        }
        details.push(format!(
            "Gamma={gamma:.0e}: fe={expected_fe}, variance ratio {var_ratio:.4}"
        ));
    }
    Ok(details.join("; "))
}

// -------------------------------------------------------------------
// 10. Byte-level reproducibility across reruns, worker counts, and the
// sidecar replay path.

fn check_reproducibility(work: &Path) -> CheckResult {
    let base = [
        "trajectories",
        "--ntraj",
        "400",
        "--tmax",
        "5",
        "--points",
        "51",
        "--seed",
        "42",
    ];
    for (out, extra) in [
        ("rep-a", None),
        ("rep-b", None),
        ("rep-t1", Some(("--threads", "1"))),
        ("rep-t4", Some(("--threads", "4"))),
    ] {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--out", out]);
        if let Some((k, v)) = extra {
            args.extend([k, v]);
        }
        run_cli(work, &args)?;
    }
    let reference = std::fs::read(work.join("rep-a.csv"))
        .map_err(|e| format!("cannot read rep-a.csv: {e}"))?;
    for other in ["rep-b", "rep-t1", "rep-t4"] {
        let bytes = std::fs::read(work.join(format!("{other}.csv")))
            .map_err(|e| format!("cannot read {other}.csv: {e}"))?;
        if bytes != reference {
            return Err(format!("{other}.csv differs from rep-a.csv"));
        }
    }

    // Replaying a sidecar must reproduce its CSV exactly.
    run_cli(
        work,
        &["trajectories", "--config", "rep-a.json", "--out", "rep-replay"],
    )?;
    let replay = std::fs::read(work.join("rep-replay.csv"))
        .map_err(|e| format!("cannot read rep-replay.csv: {e}"))?;
    if replay != reference {
        return Err("sidecar replay produced a different CSV".to_owned());
    }
    Ok("4 reruns (2 plain, threads 1 and 4) and the sidecar replay are byte-identical".to_owned())
}

fn main() {
    let work = std::env::temp_dir().join(format!("ionsim-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&work).expect("create scratch directory");

    let mut gate = Gate { work, failed: 0 };

    // Invariant reports from every deterministic evolution run by the
    // library-level checks; check 7 audits them in aggregate.
    let mut reports = Vec::new();
    let r = check_solver_agreement(&mut reports);
    gate.report(1, "exact propagator vs master equation", r);
    gate.report(2, "closed-form populations", check_closed_forms());
    let r = check_default_profile(&gate.work);
    gate.report(3, "default-profile frequency and decay", r);
    let r = check_ensemble_convergence(&mut reports);
    gate.report(4, "intensity-ensemble convergence", r);
    let r = check_phase_channel(&mut reports);
    gate.report(5, "phase-noise cross-validation", r);
    gate.report(6, "generator spectra", check_spectra());
    let r = check_invariants(&reports, &gate.work);
    gate.report(7, "invariant audit", r);
    let r = check_exponent_pipeline(&gate.work);
    gate.report(8, "decay-exponent pipeline", r);
    gate.report(9, "pulse-area statistics", check_pulse_area());
    let r = check_reproducibility(&gate.work);
    gate.report(10, "byte-level reproducibility", r);

    let _ = std::fs::remove_dir_all(&gate.work);
    if gate.failed > 0 {
        println!("acceptance: {} of 10 checks failed", gate.failed);
        std::process::exit(1);
    }
    println!("acceptance: 10/10 checks passed");
}
