//! Decoherence of a single trapped ion driven by a noisy laser.
//!
//! The ion is a two-level system coupled to one vibrational mode of its
//! trap, truncated at `n_max` quanta. Four drive configurations are
//! supported (carrier, first red and blue sidebands, second red
//! sideband), each with its time-independent interaction generator in
//! the Lamb-Dicke expansion. Two laser noise channels are modeled:
//!
//! - **Intensity noise**: white fluctuations of the Rabi frequency with
//!   strength `Gamma`, giving the master equation
//!   `d rho/dt = -i [G, rho] - (Gamma/2) [G, [G, rho]]`.
//! - **Phase noise**: the laser phase diffuses with rate `lambda`,
//!   giving (in the frame that ties the phase to the qubit)
//!   `d rho/dt = -i [G, rho] - (lambda/2) [P, [P, rho]]` with `P` the
//!   excited-state projector.
//!
//! Both equations can be driven three independent ways, which is the
//! point of the crate: spectral-decomposition exact propagation
//! ([`evolve::ExactPropagator`], intensity only), fixed-step RK4
//! integration ([`evolve::evolve_master_intensity`],
//! [`evolve::evolve_master_phase`]), and stochastic trajectory averaging
//! ([`trajectory::run_ensemble_intensity`],
//! [`trajectory::run_ensemble_phase`]). Closed-form population curves
//! ([`closed_form`]) and damped-cosine / power-law fits ([`fit`]) close
//! the loop for verification and parameter extraction.
//!
//! # Conventions
//!
//! Basis index = `s * (n_max + 1) + n` with `s = 0` for the electronic
//! ground state, `s = 1` for the excited state, and `n` the Fock number
//! (electronic-major ordering). Frequencies are expressed in units of
//! the bare Rabi frequency unless a caller chooses otherwise; every
//! formula is written so that `omega0` carries the unit.
//!
//! Evolutions validate trace, hermiticity, positivity and (where the
//! equation conserves them) generator moments as they go, and abort with
//! [`Error::StateInvariant`] instead of repairing states. Random numbers
//! come from counter-keyed per-trajectory streams, so ensemble results
//! are bit-identical across thread counts; the `parallel` feature
//! (default) distributes trajectories with rayon and can be disabled for
//! a fully sequential build.

pub mod closed_form;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod grid;
pub mod hilbert;
pub mod linalg;
pub mod reduction;
pub mod rng;
pub mod sideband;
pub mod trajectory;

pub use closed_form::{
    discrepancy_report, intensity_freq_rate, pg_intensity, pg_phase_red, phase_red_frequency,
    Erratum, FormulaVariant,
};
pub use error::{Error, Result};
pub use evolve::{
    evolve_master_intensity, evolve_master_intensity_with, evolve_master_phase,
    evolve_master_phase_with, propagate_exact, Evolution, EvolveOptions, ExactPropagator,
    IntensityNoise, InvariantReport, InvariantTolerances, PhaseNoise,
};
pub use fit::{
    exponent_comparison, fit_damped_cosine, fit_power_law, DampedCosineFit, ExponentComparison,
    LevelRate, Normalization, PowerLawFit, ReferenceCheck,
};
pub use grid::{PopulationTrace, TimeGrid, DETERMINISTIC_PG_TOL, ENSEMBLE_PG_TOL};
pub use hilbert::{
    ground_population, DensityMatrix, ElectronicState, HilbertConfig, StateTolerances,
};
pub use linalg::{ComplexMatrix, EigenDecomposition};
pub use reduction::SupportBlock;
pub use sideband::{
    analytic_eigenpairs, analytic_spectrum, build_generator, noisy_hamiltonian, EigenPair,
    Generator, ModelParams, SidebandKind, Sign,
};
pub use trajectory::{
    pulse_area_stats, run_ensemble_intensity, run_ensemble_phase, step_ito_intensity,
    EnsembleResult, PulseAreaStats, TrajectoryConfig,
};
