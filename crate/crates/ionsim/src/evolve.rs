//! Deterministic evolutions of the noise-averaged master equations.
//!
//! Intensity noise averages to
//!   d rho / dt = -i [G, rho] - (Gamma / 2) [G, [G, rho]],
//! which is diagonal in the generator eigenbasis: the coherence between
//! eigenvalues e_i, e_j evolves by exp(-i t (e_i - e_j) - Gamma t
//! (e_i - e_j)^2 / 2). [`ExactPropagator`] applies that factor directly;
//! [`evolve_master_intensity`] integrates the same equation with fixed-step
//! RK4 so the two can cross-validate.
//!
//! Phase noise phi(t) = sqrt(lambda) W(t) averages, in the transformed
//! frame, to
//!   d rho / dt = -i [G, rho] - (lambda / 2) [P, [P, rho]],
//! with P the excited-state projector. This one is not diagonal in the
//! generator eigenbasis, so RK4 is the reference for it.
//!
//! Both flows preserve trace, hermiticity and positivity; the intensity
//! flow additionally conserves trace(G rho) and trace(G^2 rho) exactly
//! (the phase flow does not, since [G, P] != 0). The integrator hermitizes
//! after every substep, monitors all of these at grid points, and aborts
//! rather than repair when a tolerance is breached.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{PopulationTrace, TimeGrid, DETERMINISTIC_PG_TOL};
use crate::hilbert::{qubit_operators, tensor, DensityMatrix};
use crate::linalg::{ComplexMatrix, EigenDecomposition};
use crate::sideband::Generator;

/// Strength Gamma of white intensity noise: Omega(t) dt = Omega_0 (dt +
/// sqrt(Gamma) dW). Units: time (Gamma carries the dimension of t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntensityNoise {
    gamma: f64,
}

impl IntensityNoise {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                message: format!("must be finite and nonnegative, got {gamma}"),
            });
        }
        Ok(Self { gamma })
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Strength lambda of white phase diffusion: phi(t) = sqrt(lambda) W(t).
/// Units: inverse time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseNoise {
    lambda: f64,
}

impl PhaseNoise {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                message: format!("must be finite and nonnegative, got {lambda}"),
            });
        }
        Ok(Self { lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Abort thresholds for the invariants monitored at grid points.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantTolerances {
    /// |trace(rho) - 1|.
    pub trace: f64,
    /// Relative Frobenius deviation from hermiticity, measured on the raw
    /// RK4 result before the hermitize step.
    pub hermiticity: f64,
    /// Smallest admissible eigenvalue.
    pub min_eigenvalue: f64,
    /// Relative drift of trace(G rho) and trace(G^2 rho); intensity flow
    /// only.
    pub moment_rel: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self {
            trace: 1e-9,
            hermiticity: 1e-10,
            min_eigenvalue: -1e-8,
            moment_rel: 1e-8,
        }
    }
}

/// Integration controls.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvolveOptions {
    /// Upper bound on substep * ||G||; the grid spacing is subdivided into
    /// the smallest number of equal substeps that honors it. At most
    /// [`EvolveOptions::MAX_STEP_FACTOR`].
    pub step_factor: f64,
    pub tolerances: InvariantTolerances,
}

impl EvolveOptions {
    pub const MAX_STEP_FACTOR: f64 = 0.1;
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            step_factor: 0.05,
            tolerances: InvariantTolerances::default(),
        }
    }
}

/// Worst-case invariant drifts observed over a whole evolution, plus the
/// truncation diagnostic (largest total population found in the top two
/// vibrational levels at any grid point).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantReport {
    pub max_trace_drift: f64,
    pub max_hermiticity_dev: f64,
    pub min_eigenvalue: f64,
    pub max_moment_g_drift: Option<f64>,
    pub max_moment_g2_drift: Option<f64>,
    pub truncation_top2_max: f64,
    pub substep: f64,
    pub substeps_per_interval: usize,
}

/// Result of a deterministic evolution: the state at every grid point,
/// the ground-population trace, and the invariant diagnostics.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub states: Vec<DensityMatrix>,
    pub trace: PopulationTrace,
    pub invariants: InvariantReport,
}

enum MasterRhs<'a> {
    Intensity {
        g: &'a ComplexMatrix,
        gamma: f64,
    },
    Phase {
        g: &'a ComplexMatrix,
        p: ComplexMatrix,
        lambda: f64,
    },
}

impl MasterRhs<'_> {
    /// out = -i [G, rho] - (coeff/2) [K, [K, rho]] with K = G or P.
    fn eval(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix, ws: &mut RhsScratch) {
        match self {
            MasterRhs::Intensity { g, gamma } => {
                ComplexMatrix::commutator_into(&mut ws.c1, g, rho);
                ComplexMatrix::commutator_into(&mut ws.c2, g, &ws.c1);
                combine(out, &ws.c1, &ws.c2, 0.5 * gamma);
            }
            MasterRhs::Phase { g, p, lambda } => {
                ComplexMatrix::commutator_into(&mut ws.c1, g, rho);
                ComplexMatrix::commutator_into(&mut ws.c2, p, rho);
                ComplexMatrix::commutator_into(&mut ws.c3, p, &ws.c2);
                combine(out, &ws.c1, &ws.c3, 0.5 * lambda);
            }
        }
    }
}

/// out = -i c1 - coeff * c2
fn combine(out: &mut ComplexMatrix, c1: &ComplexMatrix, c2: &ComplexMatrix, coeff: f64) {
    let od = out.data_mut();
    for ((o, a), b) in od.iter_mut().zip(c1.data()).zip(c2.data()) {
        *o = Complex64::new(a.im, -a.re) - coeff * b;
    }
}

struct RhsScratch {
    c1: ComplexMatrix,
    c2: ComplexMatrix,
    c3: ComplexMatrix,
}

/// RK4 evolution of the intensity-noise master equation with default
/// options.
pub fn evolve_master_intensity(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &IntensityNoise,
    grid: &TimeGrid,
) -> Result<Evolution> {
    evolve_master_intensity_with(rho0, g, noise, grid, &EvolveOptions::default())
}

pub fn evolve_master_intensity_with(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &IntensityNoise,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let rhs = MasterRhs::Intensity {
        g: g.matrix(),
        gamma: noise.gamma(),
    };
    integrate_rk4(rho0, g, rhs, grid, opts, true)
}

/// RK4 evolution of the phase-noise master equation (dephasing
/// coefficient lambda / 2) with default options.
pub fn evolve_master_phase(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &PhaseNoise,
    grid: &TimeGrid,
) -> Result<Evolution> {
    evolve_master_phase_with(rho0, g, noise, grid, &EvolveOptions::default())
}

pub fn evolve_master_phase_with(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &PhaseNoise,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let cfg = g.params().cfg();
    let q = qubit_operators();
    let p = tensor(&q.excited_projector, &ComplexMatrix::identity(cfg.fock_dim()))
        .expect("projector is 2x2");
    let rhs = MasterRhs::Phase {
        g: g.matrix(),
        p,
        lambda: noise.lambda(),
    };
    integrate_rk4(rho0, g, rhs, grid, opts, false)
}

fn integrate_rk4(
    rho0: &DensityMatrix,
    g: &Generator,
    rhs: MasterRhs<'_>,
    grid: &TimeGrid,
    opts: &EvolveOptions,
    check_moments: bool,
) -> Result<Evolution> {
    if !(opts.step_factor > 0.0 && opts.step_factor <= EvolveOptions::MAX_STEP_FACTOR) {
        return Err(Error::InvalidParameter {
            name: "step_factor",
            message: format!(
                "must lie in (0, {}], got {}",
                EvolveOptions::MAX_STEP_FACTOR,
                opts.step_factor
            ),
        });
    }
    let dim = g.matrix().dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho0.dim(),
        });
    }

    let spacing = grid.spacing();
    let substeps = ((spacing * g.norm() / opts.step_factor).ceil() as usize).max(1);
    let h = spacing / substeps as f64;

    let g2;
    let mut moments = if check_moments {
        g2 = g.matrix().mul(g.matrix());
        let m1_0 = g.matrix().trace_of_product(rho0.matrix()).re;
        let m2_0 = g2.trace_of_product(rho0.matrix()).re;
        Some(MomentTracker {
            g2: &g2,
            m1_0,
            m2_0,
            scale1: m1_0.abs().max(g.norm()),
            scale2: m2_0.abs().max(g.norm() * g.norm()),
            max_drift1: 0.0,
            max_drift2: 0.0,
        })
    } else {
        None
    };

    let mut ws = RhsScratch {
        c1: ComplexMatrix::zeros(dim),
        c2: ComplexMatrix::zeros(dim),
        c3: ComplexMatrix::zeros(dim),
    };
    let mut k1 = ComplexMatrix::zeros(dim);
    let mut k2 = ComplexMatrix::zeros(dim);
    let mut k3 = ComplexMatrix::zeros(dim);
    let mut k4 = ComplexMatrix::zeros(dim);
    let mut stage = ComplexMatrix::zeros(dim);

    let mut rho = rho0.matrix().clone();
    let tol = &opts.tolerances;
    let n_points = grid.n_points();
    let mut states = Vec::with_capacity(n_points);
    let mut pg = Vec::with_capacity(n_points);
    let mut report = InvariantReport {
        max_trace_drift: 0.0,
        max_hermiticity_dev: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_moment_g_drift: None,
        max_moment_g2_drift: None,
        truncation_top2_max: 0.0,
        substep: h,
        substeps_per_interval: substeps,
    };

    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let third = Complex64::new(h / 3.0, 0.0);

    for k in 0..n_points {
        let t = grid.time_at(k);

        // Grid-point checks on the current state.
        let tr = rho.trace();
        let trace_drift = (tr.re - 1.0).hypot(tr.im);
        report.max_trace_drift = report.max_trace_drift.max(trace_drift);
        if trace_drift > tol.trace {
            return Err(Error::StateInvariant {
                which: "trace",
                value: trace_drift,
                tolerance: tol.trace,
                time: t,
            });
        }
        let min_eig = rho.hermitian_min_eigenvalue()?;
        report.min_eigenvalue = report.min_eigenvalue.min(min_eig);
        if min_eig < tol.min_eigenvalue {
            return Err(Error::StateInvariant {
                which: "positivity",
                value: min_eig,
                tolerance: tol.min_eigenvalue,
                time: t,
            });
        }
        if let Some(m) = moments.as_mut() {
            let d1 = (g.matrix().trace_of_product(&rho).re - m.m1_0).abs() / m.scale1;
            let d2 = (m.g2.trace_of_product(&rho).re - m.m2_0).abs() / m.scale2;
            m.max_drift1 = m.max_drift1.max(d1);
            m.max_drift2 = m.max_drift2.max(d2);
            if d1 > tol.moment_rel || d2 > tol.moment_rel {
                return Err(Error::StateInvariant {
                    which: "moment conservation",
                    value: d1.max(d2),
                    tolerance: tol.moment_rel,
                    time: t,
                });
            }
        }
        report.truncation_top2_max = report.truncation_top2_max.max(top_two_population(&rho));

        pg.push(ground_population_of(&rho));
        states.push(DensityMatrix::from_matrix_unchecked(rho.clone()));

        if k + 1 == n_points {
            break;
        }

        for _ in 0..substeps {
            rhs.eval(&rho, &mut k1, &mut ws);
            stage.copy_from(&rho);
            stage.add_scaled(half, &k1);
            rhs.eval(&stage, &mut k2, &mut ws);
            stage.copy_from(&rho);
            stage.add_scaled(half, &k2);
            rhs.eval(&stage, &mut k3, &mut ws);
            stage.copy_from(&rho);
            stage.add_scaled(full, &k3);
            rhs.eval(&stage, &mut k4, &mut ws);
            rho.add_scaled(sixth, &k1);
            rho.add_scaled(third, &k2);
            rho.add_scaled(third, &k3);
            rho.add_scaled(sixth, &k4);

            let herm_dev = rho.hermitian_deviation_rel();
            report.max_hermiticity_dev = report.max_hermiticity_dev.max(herm_dev);
            if herm_dev > tol.hermiticity {
                return Err(Error::StateInvariant {
                    which: "hermiticity",
                    value: herm_dev,
                    tolerance: tol.hermiticity,
                    time: t,
                });
            }
            rho.hermitize();
        }
    }

    if let Some(m) = moments {
        report.max_moment_g_drift = Some(m.max_drift1);
        report.max_moment_g2_drift = Some(m.max_drift2);
    }

    let trace = PopulationTrace::new(*grid, pg, None, DETERMINISTIC_PG_TOL)?;
    Ok(Evolution {
        states,
        trace,
        invariants: report,
    })
}

struct MomentTracker<'a> {
    g2: &'a ComplexMatrix,
    m1_0: f64,
    m2_0: f64,
    scale1: f64,
    scale2: f64,
    max_drift1: f64,
    max_drift2: f64,
}

fn ground_population_of(rho: &ComplexMatrix) -> f64 {
    let fock_dim = rho.dim() / 2;
    (0..fock_dim).map(|n| rho.get(n, n).re).sum()
}

/// Total population in the top two vibrational levels, both electronic
/// manifolds.
fn top_two_population(rho: &ComplexMatrix) -> f64 {
    let dim = rho.dim();
    let fock_dim = dim / 2;
    let mut p = rho.get(fock_dim - 1, fock_dim - 1).re + rho.get(dim - 1, dim - 1).re;
    if fock_dim >= 2 {
        p += rho.get(fock_dim - 2, fock_dim - 2).re + rho.get(dim - 2, dim - 2).re;
    }
    p
}

/// Closed-form propagator for the intensity-noise master equation,
/// built once per (generator, noise strength) and reusable across states
/// and times.
pub struct ExactPropagator {
    eigen: EigenDecomposition,
    gamma: f64,
}

impl ExactPropagator {
    pub fn new(g: &Generator, noise: &IntensityNoise) -> Result<Self> {
        let eigen = g.matrix().eigen_hermitian()?;
        Ok(Self {
            eigen,
            gamma: noise.gamma(),
        })
    }

    #[inline]
    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eigen
    }

    /// State at time t >= 0, given the state at time 0.
    pub fn state_at(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!("must be finite and nonnegative, got {t}"),
            });
        }
        let dim = self.eigen.dim();
        if rho0.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rho0.dim(),
            });
        }
        let mut tilde = self.eigen.to_eigenbasis(rho0.matrix());
        for i in 0..dim {
            for j in 0..dim {
                let d = self.eigen.values[i] - self.eigen.values[j];
                let factor =
                    Complex64::from_polar((-0.5 * self.gamma * t * d * d).exp(), -t * d);
                let v = tilde.get(i, j) * factor;
                tilde.set(i, j, v);
            }
        }
        let mut back = self.eigen.from_eigenbasis(&tilde);
        back.hermitize();
        Ok(DensityMatrix::from_matrix_unchecked(back))
    }

    /// Ground population on a whole grid without materializing the states:
    /// the eigenbasis coherences evolve independently, so P_g(t) is a sum
    /// of d^2 damped phasors with precomputable weights.
    pub fn population_trace(&self, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<PopulationTrace> {
        let dim = self.eigen.dim();
        if rho0.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rho0.dim(),
            });
        }
        let tilde = self.eigen.to_eigenbasis(rho0.matrix());
        let fock_dim = dim / 2;
        // P_g(t) = sum_ij tilde(i, j) f_ij(t) S(j, i) with the ground-row
        // overlap S(i, j) = sum_g V(g, i)^* V(g, j) and the decay phasor
        // f_ij(t) = exp(-i t d - Gamma t d^2 / 2), d = e_i - e_j. Stored
        // as weight(i, j) = tilde(i, j) S(j, i), Hermitian, so the sum
        // reduces to the diagonal plus twice the real part over i < j.
        let mut weights = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut s = Complex64::new(0.0, 0.0);
                for gi in 0..fock_dim {
                    s += self.eigen.vectors.get(gi, i).conj() * self.eigen.vectors.get(gi, j);
                }
                weights.set(i, j, tilde.get(i, j) * s.conj());
            }
        }
        let mut pg = Vec::with_capacity(grid.n_points());
        for k in 0..grid.n_points() {
            let t = grid.time_at(k);
            let mut total = 0.0;
            for i in 0..dim {
                total += weights.get(i, i).re;
                for j in (i + 1)..dim {
                    let d = self.eigen.values[i] - self.eigen.values[j];
                    let phasor =
                        Complex64::from_polar((-0.5 * self.gamma * t * d * d).exp(), -t * d);
                    total += 2.0 * (weights.get(i, j) * phasor).re;
                }
            }
            pg.push(total);
        }
        PopulationTrace::new(*grid, pg, None, DETERMINISTIC_PG_TOL)
    }
}

/// One-shot convenience wrapper over [`ExactPropagator`].
pub fn propagate_exact(
    rho0: &DensityMatrix,
    g: &Generator,
    noise: &IntensityNoise,
    t: f64,
) -> Result<DensityMatrix> {
    ExactPropagator::new(g, noise)?.state_at(rho0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{pg_intensity, pg_phase_red, FormulaVariant};
    use crate::hilbert::{ground_population, ElectronicState, HilbertConfig};
    use crate::sideband::{build_generator, ModelParams, SidebandKind};
    use approx::assert_relative_eq;

    fn setup(
        kind: SidebandKind,
        n_max: usize,
        n_init: usize,
    ) -> (Generator, DensityMatrix, ModelParams) {
        let cfg = HilbertConfig::new(n_max).unwrap();
        let params = ModelParams::new(1.0, 0.2, cfg).unwrap();
        let g = build_generator(kind, &params);
        let rho0 = DensityMatrix::pure(&cfg, ElectronicState::Ground, n_init);
        (g, rho0, params)
    }

    #[test]
    fn noise_strength_validation() {
        assert!(IntensityNoise::new(-0.1).is_err());
        assert!(IntensityNoise::new(f64::NAN).is_err());
        assert!(IntensityNoise::new(0.0).is_ok());
        assert!(PhaseNoise::new(-1.0).is_err());
        assert!(PhaseNoise::new(0.05).is_ok());
    }

    #[test]
    fn step_factor_validation() {
        let (g, rho0, _) = setup(SidebandKind::BlueSideband, 4, 0);
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let noise = IntensityNoise::new(0.0).unwrap();
        let mut opts = EvolveOptions::default();
        opts.step_factor = 0.5;
        assert!(matches!(
            evolve_master_intensity_with(&rho0, &g, &noise, &grid, &opts),
            Err(Error::InvalidParameter { name: "step_factor", .. })
        ));
    }

    #[test]
    fn noiseless_master_matches_closed_form() {
        let (g, rho0, _) = setup(SidebandKind::BlueSideband, 6, 0);
        let grid = TimeGrid::new(0.0, 10.0, 101).unwrap();
        let noise = IntensityNoise::new(0.0).unwrap();
        let opts = EvolveOptions {
            step_factor: 0.01,
            ..EvolveOptions::default()
        };
        let ev = evolve_master_intensity_with(&rho0, &g, &noise, &grid, &opts).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let expected = pg_intensity(
                SidebandKind::BlueSideband,
                FormulaVariant::SelfConsistent,
                0,
                0.2,
                1.0,
                0.0,
                t,
            );
            assert!(
                (ev.trace.pg()[k] - expected).abs() < 1e-8,
                "t={t}: {} vs {expected}",
                ev.trace.pg()[k]
            );
        }
    }

    #[test]
    fn noisy_master_matches_exact_propagator() {
        let (g, rho0, _) = setup(SidebandKind::BlueSideband, 5, 1);
        let grid = TimeGrid::new(0.0, 20.0, 201).unwrap();
        let noise = IntensityNoise::new(0.041).unwrap();
        let opts = EvolveOptions {
            step_factor: 0.01,
            ..EvolveOptions::default()
        };
        let ev = evolve_master_intensity_with(&rho0, &g, &noise, &grid, &opts).unwrap();
        let exact = ExactPropagator::new(&g, &noise)
            .unwrap()
            .population_trace(&rho0, &grid)
            .unwrap();
        assert!(ev.trace.max_abs_diff(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn exact_states_match_exact_trace() {
        let (g, rho0, _) = setup(SidebandKind::RedSideband, 4, 2);
        let noise = IntensityNoise::new(0.2).unwrap();
        let prop = ExactPropagator::new(&g, &noise).unwrap();
        let grid = TimeGrid::new(0.0, 8.0, 17).unwrap();
        let trace = prop.population_trace(&rho0, &grid).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let state = prop.state_at(&rho0, t).unwrap();
            assert_relative_eq!(
                ground_population(&state),
                trace.pg()[k],
                epsilon = 1e-12
            );
        }
    }

    // Frozen oracle: starting from |g, 1> on the red sideband with
    // Gamma = 0.5, the dressed-pair coherence magnitude after t = 1 is
    // (1/2) exp(-Gamma t (2 g)^2 / 2) = (1/2) e^{-0.04} with g = 0.2.
    #[test]
    fn exact_propagator_coherence_decay_oracle() {
        let (g, rho0, _) = setup(SidebandKind::RedSideband, 2, 1);
        let noise = IntensityNoise::new(0.5).unwrap();
        let prop = ExactPropagator::new(&g, &noise).unwrap();
        let state = prop.state_at(&rho0, 1.0).unwrap();
        let tilde = prop.eigen().to_eigenbasis(state.matrix());
        let mut max_offdiag = 0.0f64;
        for i in 0..tilde.dim() {
            for j in 0..tilde.dim() {
                if i != j {
                    max_offdiag = max_offdiag.max(tilde.get(i, j).norm());
                }
            }
        }
        assert_relative_eq!(max_offdiag, 0.4803947195761616, epsilon = 1e-12);
    }

    #[test]
    fn exact_propagator_semigroup_property() {
        let (g, rho0, _) = setup(SidebandKind::BlueSideband, 4, 1);
        let noise = IntensityNoise::new(0.07).unwrap();
        let prop = ExactPropagator::new(&g, &noise).unwrap();
        let one_shot = prop.state_at(&rho0, 3.7).unwrap();
        let mid = prop.state_at(&rho0, 1.3).unwrap();
        let two_step = prop.state_at(&mid, 2.4).unwrap();
        let mut diff = one_shot.matrix().clone();
        diff.add_scaled(Complex64::new(-1.0, 0.0), two_step.matrix());
        assert!(diff.frobenius_norm() < 1e-10);
    }

    // Freezes the lambda/2 dephasing convention against the independent
    // Bloch-equation oracle.
    #[test]
    fn phase_master_matches_bloch_oracle() {
        let (g, rho0, _) = setup(SidebandKind::RedSideband, 3, 1);
        let grid = TimeGrid::new(0.0, 10.0, 101).unwrap();
        let noise = PhaseNoise::new(0.1).unwrap();
        let opts = EvolveOptions {
            step_factor: 0.01,
            ..EvolveOptions::default()
        };
        let ev = evolve_master_phase_with(&rho0, &g, &noise, &grid, &opts).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let expected = pg_phase_red(1, 0.2, 1.0, 0.1, t);
            assert!(
                (ev.trace.pg()[k] - expected).abs() < 1e-7,
                "t={t}: {} vs {expected}",
                ev.trace.pg()[k]
            );
        }
        assert!((ev.trace.pg()[100] - 0.2248445652860599).abs() < 1e-7);
    }

    #[test]
    fn intensity_moments_conserved_to_rounding() {
        let (g, rho0, _) = setup(SidebandKind::BlueSideband, 5, 1);
        let grid = TimeGrid::new(0.0, 30.0, 301).unwrap();
        let noise = IntensityNoise::new(0.041).unwrap();
        let ev = evolve_master_intensity(&rho0, &g, &noise, &grid).unwrap();
        assert!(ev.invariants.max_moment_g_drift.unwrap() < 1e-10);
        assert!(ev.invariants.max_moment_g2_drift.unwrap() < 1e-10);
        assert!(ev.invariants.max_trace_drift < 1e-12);
        assert!(ev.invariants.min_eigenvalue > -1e-10);
        assert!(ev.invariants.max_hermiticity_dev < 1e-13);
    }

    #[test]
    fn truncation_report_flags_leakage() {
        // |g, 2> on the blue sideband reaches |e, 3> = the top level when
        // n_max = 3; with n_max = 8 the same evolution never gets near the
        // edge from |g, 0>.
        let (g_small, rho_small, _) = setup(SidebandKind::BlueSideband, 3, 2);
        let grid = TimeGrid::new(0.0, 10.0, 51).unwrap();
        let noise = IntensityNoise::new(0.0).unwrap();
        let ev = evolve_master_intensity(&rho_small, &g_small, &noise, &grid).unwrap();
        assert!(ev.invariants.truncation_top2_max > 0.1);

        let (g_big, rho_big, _) = setup(SidebandKind::BlueSideband, 8, 0);
        let ev2 = evolve_master_intensity(&rho_big, &g_big, &noise, &grid).unwrap();
        assert!(ev2.invariants.truncation_top2_max < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (g, _, _) = setup(SidebandKind::BlueSideband, 4, 0);
        let other_cfg = HilbertConfig::new(6).unwrap();
        let rho_wrong = DensityMatrix::pure(&other_cfg, ElectronicState::Ground, 0);
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let noise = IntensityNoise::new(0.0).unwrap();
        assert!(matches!(
            evolve_master_intensity(&rho_wrong, &g, &noise, &grid),
            Err(Error::DimensionMismatch { .. })
        ));
        let prop = ExactPropagator::new(&g, &noise).unwrap();
        assert!(prop.state_at(&rho_wrong, 1.0).is_err());
        assert!(prop.state_at(&rho_wrong, -1.0).is_err());
    }

    #[test]
    fn phase_noise_zero_reduces_to_unitary_motion() {
        let (g, rho0, _) = setup(SidebandKind::RedSideband, 4, 2);
        let grid = TimeGrid::new(0.0, 12.0, 121).unwrap();
        let phase = PhaseNoise::new(0.0).unwrap();
        let intensity = IntensityNoise::new(0.0).unwrap();
        let a = evolve_master_phase(&rho0, &g, &phase, &grid).unwrap();
        let b = evolve_master_intensity(&rho0, &g, &intensity, &grid).unwrap();
        assert!(a.trace.max_abs_diff(&b.trace).unwrap() < 1e-12);
    }
}
