//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument failed validation.
    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// Two operands do not live on the same space.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A state invariant (trace, hermiticity, positivity, moment
    /// conservation) drifted past its tolerance during an evolution.
    /// Signals an integrator or step-size failure; never silently repaired.
    #[error("state invariant '{which}' violated at t={time:.6}: deviation {value:.6e} exceeds tolerance {tolerance:.1e}")]
    StateInvariant {
        which: &'static str,
        value: f64,
        tolerance: f64,
        time: f64,
    },

    /// A fixed integration step is too coarse for the generator norm.
    #[error("step {step:.3e} too large for generator norm {norm:.3e}: the product must stay at or below {bound}")]
    StepSize { step: f64, norm: f64, bound: f64 },

    /// A vibrational index points past the Fock truncation.
    #[error("vibrational index {n} outside truncation: pair states need n_max >= {required}, have {n_max}")]
    OutOfTruncation {
        n: usize,
        required: usize,
        n_max: usize,
    },

    /// The eigensolver failed to converge (not expected for Hermitian input).
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    /// Nonlinear least squares ran out of iterations.
    #[error("fit did not converge within {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    /// The trace is too short to constrain a damped-cosine model.
    #[error("trace spans {periods:.2} oscillation periods at the detected frequency; at least {required} required")]
    ShortTrace { periods: f64, required: f64 },

    /// Power-law fitting works on logarithms and needs positive rates.
    #[error("power-law fit requires positive rates: gamma(n={n}) = {value:.3e}")]
    NonpositiveRate { n: usize, value: f64 },

    /// Power-law fitting needs enough levels to be meaningful.
    #[error("power-law fit requires at least {required} levels, got {got}")]
    TooFewLevels { got: usize, required: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
