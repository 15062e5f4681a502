//! Joint Hilbert space of a two-level ion and its truncated vibrational mode.
//!
//! Basis convention, fixed across the crate and asserted in tests:
//! electronic-major indexing with `index = s * (n_max + 1) + n`, where
//! s = 0 tags the electronic ground state |g>, s = 1 the excited state |e>,
//! and n = 0..=n_max counts vibrational quanta. Under this ordering
//! [`tensor`] is the plain Kronecker product with the electronic factor on
//! the left, and the ground-state populations occupy the first
//! `n_max + 1` diagonal entries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C_ONE, C_ZERO};

/// Electronic (internal) state of the ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectronicState {
    Ground,
    Excited,
}

impl ElectronicState {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            ElectronicState::Ground => 0,
            ElectronicState::Excited => 1,
        }
    }
}

/// Fock-space truncation for the vibrational mode.
///
/// `n_max` is the highest retained vibrational level; the joint dimension
/// is `2 * (n_max + 1)`. Truncation artifacts concentrate in the top one
/// or two levels, so anything physical should keep its support well below
/// `n_max` (the evolution routines report the population that reaches the
/// top two levels).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertConfig {
    n_max: usize,
}

impl HilbertConfig {
    pub const MIN_N_MAX: usize = 2;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < Self::MIN_N_MAX {
            return Err(Error::InvalidParameter {
                name: "n_max",
                message: format!("must be at least {}, got {n_max}", Self::MIN_N_MAX),
            });
        }
        Ok(Self { n_max })
    }

    #[inline]
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Dimension of the vibrational factor alone.
    #[inline]
    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the joint space.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.fock_dim()
    }

    /// Basis index of |s, n>.
    #[inline]
    pub fn index(&self, s: ElectronicState, n: usize) -> usize {
        assert!(n <= self.n_max, "vibrational index {n} > n_max {}", self.n_max);
        s.index() * self.fock_dim() + n
    }

    /// Unit vector for |s, n> on the joint space.
    pub fn basis_ket(&self, s: ElectronicState, n: usize) -> Vec<Complex64> {
        let mut v = vec![C_ZERO; self.dim()];
        v[self.index(s, n)] = C_ONE;
        v
    }
}

/// Annihilation operator on the vibrational factor alone
/// (`fock_dim x fock_dim`): a|n> = sqrt(n)|n-1>.
///
/// Truncation makes [a, a^dagger] deviate from the identity only in the
/// (n_max, n_max) entry, where it takes the value -n_max instead of 1.
pub fn annihilation(cfg: &HilbertConfig) -> ComplexMatrix {
    let f = cfg.fock_dim();
    let mut m = ComplexMatrix::zeros(f);
    for n in 1..f {
        m.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    m
}

/// Creation operator on the vibrational factor alone.
pub fn creation(cfg: &HilbertConfig) -> ComplexMatrix {
    annihilation(cfg).adjoint()
}

/// Number operator a^dagger a on the vibrational factor alone; exactly
/// diag(0, 1, ..., n_max) despite truncation.
pub fn number(cfg: &HilbertConfig) -> ComplexMatrix {
    let f = cfg.fock_dim();
    ComplexMatrix::from_fn(f, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            C_ZERO
        }
    })
}

/// The 2x2 electronic operators in the (|g>, |e>) ordering.
#[derive(Clone, Debug)]
pub struct QubitOperators {
    /// sigma_+ = |e><g|
    pub raising: ComplexMatrix,
    /// sigma_- = |g><e|
    pub lowering: ComplexMatrix,
    /// sigma_x = sigma_+ + sigma_-
    pub sigma_x: ComplexMatrix,
    /// sigma_+ sigma_- = |e><e|
    pub excited_projector: ComplexMatrix,
}

pub fn qubit_operators() -> QubitOperators {
    let mut raising = ComplexMatrix::zeros(2);
    raising.set(1, 0, C_ONE);
    let lowering = raising.adjoint();
    let mut sigma_x = raising.clone();
    sigma_x.add_scaled(C_ONE, &lowering);
    let mut excited_projector = ComplexMatrix::zeros(2);
    excited_projector.set(1, 1, C_ONE);
    QubitOperators {
        raising,
        lowering,
        sigma_x,
        excited_projector,
    }
}

/// Kronecker product lifting (electronic op, vibrational op) to the joint
/// space. The electronic factor must be 2x2; the vibrational factor sets
/// the Fock dimension.
pub fn tensor(qubit_op: &ComplexMatrix, fock_op: &ComplexMatrix) -> Result<ComplexMatrix> {
    if qubit_op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: qubit_op.dim(),
        });
    }
    Ok(ComplexMatrix::kron(qubit_op, fock_op))
}

/// Validation tolerances for [`DensityMatrix`] construction.
#[derive(Clone, Copy, Debug)]
pub struct StateTolerances {
    /// Relative Frobenius bound on ||rho - rho^dagger||.
    pub hermiticity: f64,
    /// Absolute bound on |trace(rho) - 1|.
    pub trace: f64,
    /// Lower bound on the smallest eigenvalue (slightly negative to absorb
    /// rounding).
    pub min_eigenvalue: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            trace: 1e-12,
            min_eigenvalue: -1e-10,
        }
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite within
/// [`StateTolerances`]. Construction validates; evolution code that
/// maintains the invariants by construction uses the unchecked path and
/// re-checks at grid points.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &StateTolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &StateTolerances) -> Result<Self> {
        let herm = matrix.hermitian_deviation_rel();
        if !(herm <= tol.hermiticity) {
            return Err(Error::StateInvariant {
                which: "hermiticity",
                value: herm,
                tolerance: tol.hermiticity,
                time: 0.0,
            });
        }
        let tr = matrix.trace();
        let tr_dev = (tr.re - 1.0).hypot(tr.im);
        if !(tr_dev <= tol.trace) {
            return Err(Error::StateInvariant {
                which: "trace",
                value: tr_dev,
                tolerance: tol.trace,
                time: 0.0,
            });
        }
        let min_eig = matrix.hermitian_min_eigenvalue()?;
        if !(min_eig >= tol.min_eigenvalue) {
            return Err(Error::StateInvariant {
                which: "positivity",
                value: min_eig,
                tolerance: tol.min_eigenvalue,
                time: 0.0,
            });
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is a valid state by construction.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    /// Pure joint basis state |s, n><s, n|; exact, no validation needed.
    pub fn pure(cfg: &HilbertConfig, s: ElectronicState, n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(cfg.dim());
        let k = cfg.index(s, n);
        m.set(k, k, C_ONE);
        Self { matrix: m }
    }

    /// Projector onto a ket, which must be normalized to 1e-12.
    pub fn from_ket(ket: &[Complex64]) -> Result<Self> {
        let norm_sqr: f64 = ket.iter().map(|v| v.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "ket",
                message: format!("must be normalized; |ket|^2 = {norm_sqr:.3e}"),
            });
        }
        let n = ket.len();
        let m = ComplexMatrix::from_fn(n, |i, j| ket[i] * ket[j].conj());
        Ok(Self { matrix: m })
    }

    /// Maximally mixed thermal-like diagonal state over vibrational levels
    /// 0..=n_top of the electronic ground manifold, equal weights.
    pub fn mixed_ground(cfg: &HilbertConfig, n_top: usize) -> Result<Self> {
        if n_top > cfg.n_max() {
            return Err(Error::OutOfTruncation {
                n: n_top,
                required: n_top,
                n_max: cfg.n_max(),
            });
        }
        let w = 1.0 / (n_top + 1) as f64;
        let mut m = ComplexMatrix::zeros(cfg.dim());
        for n in 0..=n_top {
            let k = cfg.index(ElectronicState::Ground, n);
            m.set(k, k, Complex64::new(w, 0.0));
        }
        Ok(Self { matrix: m })
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Total population of the electronic ground manifold: the sum of the
/// first fock_dim diagonal entries under the crate's basis convention.
///
/// Expects a state on the full joint space (even dimension); the excited
/// population is `trace - ground_population`.
pub fn ground_population(rho: &DensityMatrix) -> f64 {
    let dim = rho.dim();
    assert!(dim % 2 == 0, "ground_population needs a full joint-space state");
    let fock_dim = dim / 2;
    let mut p = 0.0;
    for n in 0..fock_dim {
        p += rho.matrix().get(n, n).re;
    }
    p
}
