//! Stochastic trajectory ensembles for both noise models.
//!
//! Intensity noise integrates the Ito stochastic master equation
//!   d rho = -i [G, rho] (dt + sqrt(Gamma) dW)
//!           - (Gamma / 2) [G, [G, rho]] dt
//! with Euler-Maruyama on density matrices; averaging over trajectories
//! converges to [`crate::evolve::evolve_master_intensity`] (the scheme's
//! ensemble mean is exactly the Euler discretization of the master
//! equation, so its bias vanishes with the step).
//!
//! Phase noise evolves pure states under a piecewise-frozen laser phase:
//! on each substep the phase phi (a random walk with increments
//! sqrt(lambda dt) z, left-endpoint convention, phi(0) = 0) is held fixed
//! and the exact unitary exp(-i H(phi) dt) = D(phi) exp(-i G dt)
//! D(phi)^dagger is applied, with D(phi) the phase rotation of the
//! excited manifold. The only discretization error is the freezing
//! itself; ensemble averages converge to
//! [`crate::evolve::evolve_master_phase`] with dephasing coefficient
//! lambda / 2.
//!
//! Every trajectory consumes its own [`crate::rng::stream_rng`] stream
//! keyed by (seed, trajectory index), and reduction runs in trajectory
//! order with compensated summation, so ensemble output is bit-identical
//! across thread counts and runs.
//!
//! Dynamics are restricted to the exact reachable block of the initial
//! state (see [`crate::reduction::SupportBlock`]); 2x2 blocks, the common
//! case for |g, n> initial states, take a fixed-size fast path.

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::evolve::{IntensityNoise, PhaseNoise};
use crate::grid::{PopulationTrace, TimeGrid, ENSEMBLE_PG_TOL};
use crate::hilbert::DensityMatrix;
use crate::linalg::ComplexMatrix;
use crate::reduction::SupportBlock;
use crate::rng::stream_rng;
use crate::sideband::Generator;

/// Hard bound on dt * ||G|| and on Gamma * ||G||^2 * dt (and lambda * dt
/// for phase ensembles).
pub const STEP_BOUND: f64 = 0.05;

/// Base per-trajectory positivity allowance. Euler-Maruyama trajectories
/// of the intensity equation stay individually near-pure (the
/// double-commutator contraction is compensated, in distribution, by the
/// stochastic rotation; decay lives only in the ensemble mean), so the
/// per-trajectory coherence length performs an unbiased log random walk
/// with standard deviation Delta^2 sqrt(Gamma dt (Gamma/2 + dt) T) after
/// time T, Delta being the level splitting. Negative eigenvalue
/// excursions of a few such deviations are therefore expected, grow like
/// sqrt(T), and are not an integrator failure; intensity runners widen
/// this base by six walk deviations, which no realistic draw count
/// exceeds while genuine blowup, growing exponentially, still trips it.
pub const TRAJECTORY_MIN_EIGENVALUE: f64 = -1e-6;

/// Per-trajectory bound on |trace - 1| (the scheme preserves the trace
/// exactly; only rounding accumulates).
pub const TRAJECTORY_TRACE_TOL: f64 = 1e-9;

/// Ensemble controls. `dt` is a ceiling: each grid interval is split into
/// the smallest number of equal substeps with effective step <= dt, so
/// substeps always land exactly on grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl TrajectoryConfig {
    /// Validates the step against the generator norm and noise strength.
    pub fn validate(&self, g_norm: f64, noise_scale: f64) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                message: format!("must be finite and positive, got {}", self.dt),
            });
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter {
                name: "n_traj",
                message: "must be at least 1".into(),
            });
        }
        if self.dt * g_norm > STEP_BOUND {
            return Err(Error::StepSize {
                step: self.dt,
                norm: g_norm,
                bound: STEP_BOUND,
            });
        }
        // Second moment of the noise increment per step must stay small
        // too: Gamma ||G||^2 dt for intensity, lambda dt for phase.
        if noise_scale * self.dt > STEP_BOUND {
            return Err(Error::StepSize {
                step: self.dt,
                norm: noise_scale,
                bound: STEP_BOUND,
            });
        }
        Ok(())
    }
}

/// Ensemble average with statistics and diagnostics.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    /// Mean ground population with per-point standard error (zero when
    /// n_traj = 1, where the sample variance is undefined).
    pub trace: PopulationTrace,
    /// Largest population seen in the top two vibrational levels by any
    /// trajectory at any grid point.
    pub truncation_top2_max: f64,
    /// The substep actually used.
    pub dt_effective: f64,
    pub substeps_per_interval: usize,
    pub n_traj: usize,
}

/// One Euler-Maruyama step of the intensity-noise trajectory equation on
/// the full space: `dw` is the Wiener increment for the step. The state
/// is hermitized afterwards; the step preserves the trace exactly up to
/// rounding.
pub fn step_ito_intensity(
    rho: &DensityMatrix,
    g: &Generator,
    noise: &IntensityNoise,
    dt: f64,
    dw: f64,
) -> Result<DensityMatrix> {
    let cfg = TrajectoryConfig {
        dt,
        n_traj: 1,
        seed: 0,
    };
    cfg.validate(g.norm(), noise.gamma() * g.norm() * g.norm())?;
    if rho.dim() != g.matrix().dim() {
        return Err(Error::DimensionMismatch {
            expected: g.matrix().dim(),
            got: rho.dim(),
        });
    }
    let mut state = rho.matrix().clone();
    let mut c1 = ComplexMatrix::zeros(state.dim());
    let mut c2 = ComplexMatrix::zeros(state.dim());
    dense_ito_step(
        g.matrix(),
        &mut state,
        &mut c1,
        &mut c2,
        dt + noise.gamma().sqrt() * dw,
        -0.5 * noise.gamma() * dt,
    );
    Ok(DensityMatrix::from_matrix_unchecked(state))
}

/// Trajectory-averaged intensity-noise evolution.
pub fn run_ensemble_intensity(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &IntensityNoise,
    grid: &TimeGrid,
    cfg: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    cfg.validate(g.norm(), noise.gamma() * g.norm() * g.norm())?;
    if rho0.dim() != g.matrix().dim() {
        return Err(Error::DimensionMismatch {
            expected: g.matrix().dim(),
            got: rho0.dim(),
        });
    }
    let fock_dim = rho0.dim() / 2;
    let block = SupportBlock::from_state(g.matrix(), rho0);
    let gb = block.restrict(g.matrix());
    let rho_b = block.restrict(rho0.matrix());
    let ground = block.ground_positions(fock_dim);
    let edges = block.edge_positions(fock_dim);

    let spacing = grid.spacing();
    let substeps = ((spacing / cfg.dt).ceil() as usize).max(1);
    let dt = spacing / substeps as f64;
    let sqrt_dt = dt.sqrt();
    let sqrt_gamma = noise.gamma().sqrt();
    let beta = -0.5 * noise.gamma() * dt;
    let n_points = grid.n_points();

    let block_norm = gb.hermitian_spectral_norm()?;
    let delta_sq = 4.0 * block_norm * block_norm;
    let span = grid.t1() - grid.t0();
    let walk_sd = delta_sq * (noise.gamma() * dt * (0.5 * noise.gamma() + dt) * span).sqrt();
    let eig_floor = TRAJECTORY_MIN_EIGENVALUE - 6.0 * walk_sd;
    let runner = IntensityRunner {
        gb: &gb,
        rho_b: &rho_b,
        ground: &ground,
        edges: &edges,
        grid,
        dt,
        sqrt_dt,
        sqrt_gamma,
        beta,
        eig_floor,
        substeps,
        seed: cfg.seed,
    };
    let per_traj = map_streams(cfg.n_traj, |ti| runner.run(ti));
    reduce_ensemble(per_traj, *grid, n_points, cfg.n_traj, dt, substeps)
}

struct IntensityRunner<'a> {
    gb: &'a ComplexMatrix,
    rho_b: &'a ComplexMatrix,
    ground: &'a [usize],
    edges: &'a [usize],
    grid: &'a TimeGrid,
    dt: f64,
    sqrt_dt: f64,
    sqrt_gamma: f64,
    beta: f64,
    eig_floor: f64,
    substeps: usize,
    seed: u64,
}

impl IntensityRunner<'_> {
    fn run(&self, traj: u64) -> Result<TrajOutput> {
        let mut rng = stream_rng(self.seed, traj);
        if self.gb.dim() == 2 {
            self.run_pair(&mut rng)
        } else {
            self.run_dense(&mut rng)
        }
    }

    fn run_pair(&self, rng: &mut ChaCha12Rng) -> Result<TrajOutput> {
        let g = [
            self.gb.get(0, 0),
            self.gb.get(0, 1),
            self.gb.get(1, 0),
            self.gb.get(1, 1),
        ];
        let mut r = [
            self.rho_b.get(0, 0),
            self.rho_b.get(0, 1),
            self.rho_b.get(1, 0),
            self.rho_b.get(1, 1),
        ];
        let n_points = self.grid.n_points();
        let mut pg = Vec::with_capacity(n_points);
        let mut trunc: f64 = 0.0;
        for k in 0..n_points {
            let mut p = 0.0;
            for &gi in self.ground {
                p += r[3 * gi].re;
            }
            pg.push(p);
            for &ei in self.edges {
                trunc = trunc.max(r[3 * ei].re.max(0.0));
            }
            let tr = r[0].re + r[3].re;
            check_trajectory_state(
                (tr - 1.0).abs(),
                pair_min_eigenvalue(&r),
                self.eig_floor,
                self.grid.time_at(k),
            )?;
            if k + 1 == n_points {
                break;
            }
            for _ in 0..self.substeps {
                let z: f64 = StandardNormal.sample(rng);
                let s = self.dt + self.sqrt_gamma * self.sqrt_dt * z;
                pair_ito_step(&g, &mut r, s, self.beta);
            }
        }
        Ok(TrajOutput { pg, trunc })
    }

    fn run_dense(&self, rng: &mut ChaCha12Rng) -> Result<TrajOutput> {
        let dim = self.gb.dim();
        let mut r = self.rho_b.clone();
        let mut c1 = ComplexMatrix::zeros(dim);
        let mut c2 = ComplexMatrix::zeros(dim);
        let n_points = self.grid.n_points();
        let mut pg = Vec::with_capacity(n_points);
        let mut trunc: f64 = 0.0;
        for k in 0..n_points {
            let mut p = 0.0;
            for &gi in self.ground {
                p += r.get(gi, gi).re;
            }
            pg.push(p);
            for &ei in self.edges {
                trunc = trunc.max(r.get(ei, ei).re.max(0.0));
            }
            let tr = r.trace();
            check_trajectory_state(
                (tr.re - 1.0).hypot(tr.im),
                r.hermitian_min_eigenvalue()?,
                self.eig_floor,
                self.grid.time_at(k),
            )?;
            if k + 1 == n_points {
                break;
            }
            for _ in 0..self.substeps {
                let z: f64 = StandardNormal.sample(rng);
                let s = self.dt + self.sqrt_gamma * self.sqrt_dt * z;
                dense_ito_step(self.gb, &mut r, &mut c1, &mut c2, s, self.beta);
            }
        }
        Ok(TrajOutput { pg, trunc })
    }
}

/// Trajectory-averaged phase-noise evolution (pure-state unraveling; a
/// mixed initial state is decomposed into eigenstate kets that share each
/// trajectory's phase path).
pub fn run_ensemble_phase(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &PhaseNoise,
    grid: &TimeGrid,
    cfg: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    cfg.validate(g.norm(), noise.lambda())?;
    if rho0.dim() != g.matrix().dim() {
        return Err(Error::DimensionMismatch {
            expected: g.matrix().dim(),
            got: rho0.dim(),
        });
    }
    let fock_dim = rho0.dim() / 2;
    let block = SupportBlock::from_state(g.matrix(), rho0);
    let gb = block.restrict(g.matrix());
    let rho_b = block.restrict(rho0.matrix());
    let ground = block.ground_positions(fock_dim);
    let edges = block.edge_positions(fock_dim);
    // Excited-manifold flags within the block (the phase rotation acts on
    // these components only).
    let excited: Vec<bool> = block.indices().iter().map(|&i| i >= fock_dim).collect();

    let spacing = grid.spacing();
    let substeps = ((spacing / cfg.dt).ceil() as usize).max(1);
    let dt = spacing / substeps as f64;

    // Exact one-substep propagator of the frozen-phase generator at
    // phi = 0; D(phi) conjugation supplies the phase dependence.
    let eig = gb.eigen_hermitian()?;
    let dim = gb.dim();
    let mut diag = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        diag.set(i, i, Complex64::from_polar(1.0, -eig.values[i] * dt));
    }
    let unitary = eig.from_eigenbasis(&diag);

    // Mixed states decompose into weighted kets; eigenvalues below the
    // cut contribute nothing within tolerance.
    let rho_eig = rho_b.eigen_hermitian()?;
    let mut kets: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for i in (0..dim).rev() {
        let w = rho_eig.values[i];
        if w > 1e-12 {
            kets.push((w, rho_eig.column(i)));
        }
    }
    if kets.is_empty() {
        return Err(Error::InvalidParameter {
            name: "rho0",
            message: "state has no eigenvalue above 1e-12".into(),
        });
    }

    let runner = PhaseRunner {
        unitary: &unitary,
        kets: &kets,
        ground: &ground,
        edges: &edges,
        excited: &excited,
        grid,
        step_sd: (noise.lambda() * dt).sqrt(),
        substeps,
        seed: cfg.seed,
    };
    let per_traj = map_streams(cfg.n_traj, |ti| runner.run(ti));
    reduce_ensemble(per_traj, *grid, grid.n_points(), cfg.n_traj, dt, substeps)
}

struct PhaseRunner<'a> {
    unitary: &'a ComplexMatrix,
    kets: &'a [(f64, Vec<Complex64>)],
    ground: &'a [usize],
    edges: &'a [usize],
    excited: &'a [bool],
    grid: &'a TimeGrid,
    step_sd: f64,
    substeps: usize,
    seed: u64,
}

impl PhaseRunner<'_> {
    fn run(&self, traj: u64) -> Result<TrajOutput> {
        let mut rng = stream_rng(self.seed, traj);
        let dim = self.unitary.dim();
        if dim == 2 && self.kets.len() == 1 && !self.excited[0] && self.excited[1] {
            self.run_pair(&mut rng)
        } else {
            self.run_dense(&mut rng)
        }
    }

    /// Fast path: one ket on a (ground, excited) pair block.
    fn run_pair(&self, rng: &mut ChaCha12Rng) -> Result<TrajOutput> {
        let u = [
            self.unitary.get(0, 0),
            self.unitary.get(0, 1),
            self.unitary.get(1, 0),
            self.unitary.get(1, 1),
        ];
        let w = self.kets[0].0;
        let mut psi = [self.kets[0].1[0], self.kets[0].1[1]];
        let ground_at_0 = self.ground == [0];
        debug_assert!(ground_at_0 || self.ground.is_empty());
        let n_points = self.grid.n_points();
        let mut pg = Vec::with_capacity(n_points);
        let mut trunc: f64 = 0.0;
        let mut phi = 0.0f64;
        for k in 0..n_points {
            let n0 = psi[0].norm_sqr();
            let n1 = psi[1].norm_sqr();
            if ground_at_0 {
                pg.push(w * n0);
            } else {
                pg.push(0.0);
            }
            for &ei in self.edges {
                trunc = trunc.max(w * if ei == 0 { n0 } else { n1 });
            }
            check_trajectory_state(
                (n0 + n1 - 1.0).abs(),
                0.0,
                TRAJECTORY_MIN_EIGENVALUE,
                self.grid.time_at(k),
            )?;
            if k + 1 == n_points {
                break;
            }
            for _ in 0..self.substeps {
                // Frozen phase over [t, t + dt): rotate the excited
                // component by -phi, apply the bare propagator, rotate
                // back, then advance the phase walk.
                let rot = Complex64::from_polar(1.0, phi);
                let pe = rot.conj() * psi[1];
                let a = u[0] * psi[0] + u[1] * pe;
                let b = u[2] * psi[0] + u[3] * pe;
                psi[0] = a;
                psi[1] = rot * b;
                let z: f64 = StandardNormal.sample(rng);
                phi += self.step_sd * z;
            }
        }
        Ok(TrajOutput { pg, trunc })
    }

    fn run_dense(&self, rng: &mut ChaCha12Rng) -> Result<TrajOutput> {
        let dim = self.unitary.dim();
        let mut states: Vec<Vec<Complex64>> =
            self.kets.iter().map(|(_, k)| k.clone()).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
        let n_points = self.grid.n_points();
        let mut pg = Vec::with_capacity(n_points);
        let mut trunc: f64 = 0.0;
        let mut phi = 0.0f64;
        for k in 0..n_points {
            let mut p = 0.0;
            let mut edge_p = 0.0;
            for ((w, _), psi) in self.kets.iter().zip(&states) {
                let norm_sqr: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
                check_trajectory_state(
                    (norm_sqr - 1.0).abs(),
                    0.0,
                    TRAJECTORY_MIN_EIGENVALUE,
                    self.grid.time_at(k),
                )?;
                for &gi in self.ground {
                    p += w * psi[gi].norm_sqr();
                }
                for &ei in self.edges {
                    edge_p += w * psi[ei].norm_sqr();
                }
            }
            pg.push(p);
            trunc = trunc.max(edge_p);
            if k + 1 == n_points {
                break;
            }
            for _ in 0..self.substeps {
                let rot = Complex64::from_polar(1.0, phi);
                let rot_c = rot.conj();
                for psi in &mut states {
                    for i in 0..dim {
                        scratch[i] = if self.excited[i] { rot_c * psi[i] } else { psi[i] };
                    }
                    for i in 0..dim {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..dim {
                            acc += self.unitary.get(i, j) * scratch[j];
                        }
                        psi[i] = if self.excited[i] { rot * acc } else { acc };
                    }
                }
                let z: f64 = StandardNormal.sample(rng);
                phi += self.step_sd * z;
            }
        }
        Ok(TrajOutput { pg, trunc })
    }
}

/// Monte Carlo laser pulse-area statistics: the integral of the noisy
/// Rabi frequency over a pulse of length `t_pulse` is
/// A = Omega0 (t_pulse + sqrt(Gamma) W(t_pulse)), so the area is unbiased
/// with variance Omega0^2 Gamma t_pulse and fractional r.m.s. spread
/// sqrt(Gamma / t_pulse).
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PulseAreaStats {
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    /// Analytic fractional r.m.s. error sqrt(Gamma / t_pulse).
    pub fractional_error: f64,
    pub n_samples: usize,
}

/// Samples `n_samples` pulse areas over discretized Wiener paths
/// (64 increments per path; the terminal distribution is independent of
/// the segmentation, kept finite only to exercise genuine path sampling).
pub fn pulse_area_stats(
    omega0: f64,
    noise: &IntensityNoise,
    t_pulse: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PulseAreaStats> {
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "omega0",
            message: format!("must be finite and positive, got {omega0}"),
        });
    }
    if !(t_pulse.is_finite() && t_pulse > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_pulse",
            message: format!("must be finite and positive, got {t_pulse}"),
        });
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            message: format!("need at least 2 samples for a variance, got {n_samples}"),
        });
    }
    const SEGMENTS: usize = 64;
    let seg_sd = (t_pulse / SEGMENTS as f64).sqrt();
    let sqrt_gamma = noise.gamma().sqrt();
    let areas = map_streams(n_samples, |i| -> Result<f64> {
        let mut rng = stream_rng(seed, i);
        let mut w = 0.0f64;
        for _ in 0..SEGMENTS {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += seg_sd * z;
        }
        Ok(omega0 * (t_pulse + sqrt_gamma * w))
    });
    let mut values = Vec::with_capacity(n_samples);
    for a in areas {
        values.push(a?);
    }
    let mean = neumaier_sum(values.iter().copied()) / n_samples as f64;
    let variance =
        neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n_samples - 1) as f64;
    Ok(PulseAreaStats {
        mean,
        variance,
        expected_mean: omega0 * t_pulse,
        expected_variance: omega0 * omega0 * noise.gamma() * t_pulse,
        fractional_error: (noise.gamma() / t_pulse).sqrt(),
        n_samples,
    })
}

struct TrajOutput {
    pg: Vec<f64>,
    trunc: f64,
}

fn check_trajectory_state(trace_dev: f64, min_eig: f64, eig_floor: f64, t: f64) -> Result<()> {
    if trace_dev > TRAJECTORY_TRACE_TOL {
        return Err(Error::StateInvariant {
            which: "trajectory trace",
            value: trace_dev,
            tolerance: TRAJECTORY_TRACE_TOL,
            time: t,
        });
    }
    if min_eig < eig_floor {
        return Err(Error::StateInvariant {
            which: "trajectory positivity",
            value: min_eig,
            tolerance: eig_floor,
            time: t,
        });
    }
    Ok(())
}

/// c = [G, r] for 2x2 row-major [c00, c01, c10, c11]. The diagonal comes
/// out as exact negatives of each other, which is what makes the Ito step
/// trace-exact.
#[inline]
fn pair_commutator(g: &[Complex64; 4], r: &[Complex64; 4]) -> [Complex64; 4] {
    [
        g[1] * r[2] - r[1] * g[2],
        g[0] * r[1] + g[1] * r[3] - r[0] * g[1] - r[1] * g[3],
        g[2] * r[0] + g[3] * r[2] - r[2] * g[0] - r[3] * g[2],
        g[2] * r[1] - r[2] * g[1],
    ]
}

/// r += -i s [G, r] - (Gamma dt / 2) [G, [G, r]], then hermitize.
/// `s` = dt + sqrt(Gamma) dW, `beta` = -Gamma dt / 2.
#[inline]
fn pair_ito_step(g: &[Complex64; 4], r: &mut [Complex64; 4], s: f64, beta: f64) {
    let c1 = pair_commutator(g, r);
    let c2 = pair_commutator(g, &c1);
    for k in 0..4 {
        r[k] += Complex64::new(s * c1[k].im + beta * c2[k].re, -s * c1[k].re + beta * c2[k].im);
    }
    r[0] = Complex64::new(r[0].re, 0.0);
    r[3] = Complex64::new(r[3].re, 0.0);
    let avg = 0.5 * (r[1] + r[2].conj());
    r[1] = avg;
    r[2] = avg.conj();
}

#[inline]
fn pair_min_eigenvalue(r: &[Complex64; 4]) -> f64 {
    let tr = r[0].re + r[3].re;
    let det = r[0].re * r[3].re - (r[1] * r[2]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0);
    0.5 * (tr - disc.sqrt())
}

/// Same step on an arbitrary-dimension block.
fn dense_ito_step(
    g: &ComplexMatrix,
    r: &mut ComplexMatrix,
    c1: &mut ComplexMatrix,
    c2: &mut ComplexMatrix,
    s: f64,
    beta: f64,
) {
    ComplexMatrix::commutator_into(c1, g, r);
    ComplexMatrix::commutator_into(c2, g, c1);
    let rd = r.data_mut();
    for ((dst, a), b) in rd.iter_mut().zip(c1.data()).zip(c2.data()) {
        *dst += Complex64::new(s * a.im + beta * b.re, -s * a.re + beta * b.im);
    }
    r.hermitize();
}

#[cfg(feature = "parallel")]
fn map_streams<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_streams<T>(n: usize, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..n as u64).map(f).collect()
}

/// Neumaier-compensated sum; insensitive to magnitude ordering.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn reduce_ensemble(
    per_traj: Vec<Result<TrajOutput>>,
    grid: TimeGrid,
    n_points: usize,
    n_traj: usize,
    dt: f64,
    substeps: usize,
) -> Result<EnsembleResult> {
    let mut outputs = Vec::with_capacity(n_traj);
    for r in per_traj {
        outputs.push(r?);
    }
    // Column-wise compensated accumulation in trajectory order keeps the
    // result independent of worker scheduling.
    let mut sum = vec![0.0f64; n_points];
    let mut comp = vec![0.0f64; n_points];
    for out in &outputs {
        for (k, &v) in out.pg.iter().enumerate() {
            let t = sum[k] + v;
            if sum[k].abs() >= v.abs() {
                comp[k] += (sum[k] - t) + v;
            } else {
                comp[k] += (v - t) + sum[k];
            }
            sum[k] = t;
        }
    }
    let mean: Vec<f64> = (0..n_points)
        .map(|k| (sum[k] + comp[k]) / n_traj as f64)
        .collect();

    let stderr = if n_traj >= 2 {
        let mut vsum = vec![0.0f64; n_points];
        let mut vcomp = vec![0.0f64; n_points];
        for out in &outputs {
            for (k, &v) in out.pg.iter().enumerate() {
                let d = (v - mean[k]) * (v - mean[k]);
                let t = vsum[k] + d;
                if vsum[k].abs() >= d.abs() {
                    vcomp[k] += (vsum[k] - t) + d;
                } else {
                    vcomp[k] += (d - t) + vsum[k];
                }
                vsum[k] = t;
            }
        }
        (0..n_points)
            .map(|k| (((vsum[k] + vcomp[k]) / (n_traj - 1) as f64) / n_traj as f64).sqrt())
            .collect()
    } else {
        vec![0.0; n_points]
    };

    let truncation_top2_max = outputs.iter().map(|o| o.trunc).fold(0.0, f64::max);
    let trace = PopulationTrace::new(grid, mean, Some(stderr), ENSEMBLE_PG_TOL)?;
    Ok(EnsembleResult {
        trace,
        truncation_top2_max,
        dt_effective: dt,
        substeps_per_interval: substeps,
        n_traj,
    })
}
