//! Interaction-picture coupling generators for the four laser-ion
//! resonances, their conserved charges, and their dressed-state spectra.
//!
//! All generators are written in units where hbar = 1 and carry the full
//! Rabi frequency Omega_0 (no factor 1/2). Within the Lamb-Dicke expansion:
//!
//! * carrier:     Omega_0 sigma_x (x) (1 + eta^2 a^dagger a)
//! * red:         eta Omega_0 (sigma_+ (x) a + sigma_- (x) a^dagger)
//! * blue:        eta Omega_0 (sigma_+ (x) a^dagger + sigma_- (x) a)
//! * second red:  eta Omega_0 (sigma_+ (x) a^2 + sigma_- (x) a^dagger^2)
//!
//! Each generator couples basis states in pairs, which makes the dressed
//! spectrum available in closed form; [`analytic_eigenpairs`] returns those
//! pairs and [`analytic_spectrum`] the full expected multiset including
//! zero modes and truncation-edge artifacts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, number, qubit_operators, tensor, ElectronicState, HilbertConfig,
};
use crate::linalg::{ComplexMatrix, C_ONE, C_ZERO};

/// Which resonance the driving laser is tuned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidebandKind {
    Carrier,
    #[serde(alias = "red")]
    RedSideband,
    #[serde(alias = "blue")]
    BlueSideband,
    #[serde(alias = "second-red")]
    SecondRedSideband,
}

impl SidebandKind {
    pub const ALL: [SidebandKind; 4] = [
        SidebandKind::Carrier,
        SidebandKind::RedSideband,
        SidebandKind::BlueSideband,
        SidebandKind::SecondRedSideband,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SidebandKind::Carrier => "carrier",
            SidebandKind::RedSideband => "red-sideband",
            SidebandKind::BlueSideband => "blue-sideband",
            SidebandKind::SecondRedSideband => "second-red-sideband",
        }
    }

    /// How many vibrational quanta the excited-state arm absorbs
    /// (negative: emits).
    fn quanta_shift(self) -> i64 {
        match self {
            SidebandKind::Carrier => 0,
            SidebandKind::RedSideband => 1,
            SidebandKind::BlueSideband => -1,
            SidebandKind::SecondRedSideband => 2,
        }
    }
}

/// Physical parameters of the coupling: bare Rabi frequency, Lamb-Dicke
/// parameter, and the Fock truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    omega0: f64,
    eta: f64,
    cfg: HilbertConfig,
}

impl ModelParams {
    pub fn new(omega0: f64, eta: f64, cfg: HilbertConfig) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega0",
                message: format!("must be finite and positive, got {omega0}"),
            });
        }
        if !(eta.is_finite() && eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                message: format!("must lie strictly in (0, 1), got {eta}"),
            });
        }
        Ok(Self { omega0, eta, cfg })
    }

    #[inline]
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn cfg(&self) -> &HilbertConfig {
        &self.cfg
    }
}

/// A coupling generator on the joint space: Hermitian by construction,
/// with its spectral norm cached for step-size control.
#[derive(Clone, Debug)]
pub struct Generator {
    kind: SidebandKind,
    params: ModelParams,
    matrix: ComplexMatrix,
    norm: f64,
}

impl Generator {
    #[inline]
    pub fn kind(&self) -> SidebandKind {
        self.kind
    }

    #[inline]
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Spectral norm, used for step-size control.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Operator commuting exactly with the generator, even under
    /// truncation: a weighted sum of the vibrational number operator N and
    /// the excited-state projector P. The generator only connects basis
    /// states of equal charge, so the commutator vanishes identically
    /// rather than up to rounding.
    pub fn conserved_charge(&self) -> ComplexMatrix {
        let cfg = self.params.cfg();
        let q = qubit_operators();
        let n_joint = tensor(&ComplexMatrix::identity(2), &number(cfg)).expect("qubit identity");
        let p_joint = tensor(&q.excited_projector, &ComplexMatrix::identity(cfg.fock_dim()))
            .expect("qubit projector");
        let weight = self.kind.quanta_shift() as f64;
        let mut charge = n_joint;
        if weight != 0.0 {
            charge.add_scaled(Complex64::new(weight, 0.0), &p_joint);
        }
        charge
    }
}

/// Builds the generator for the requested resonance.
pub fn build_generator(kind: SidebandKind, params: &ModelParams) -> Generator {
    let matrix = coupling_matrix(kind, params, params.omega0, 0.0);
    debug_assert!(matrix.hermitian_deviation_rel() < 1e-15);
    let norm = matrix
        .hermitian_spectral_norm()
        .expect("Hermitian generator has a real spectrum");
    Generator {
        kind,
        params: *params,
        matrix,
        norm,
    }
}

/// Coupling Hamiltonian with an instantaneous Rabi frequency `omega_t` and
/// laser phase `phi_t`: every sigma_+ arm picks up exp(i phi_t), every
/// sigma_- arm the conjugate. With `omega_t = omega0` and `phi_t = 0` this
/// reproduces the generator exactly.
pub fn noisy_hamiltonian(
    kind: SidebandKind,
    params: &ModelParams,
    omega_t: f64,
    phi_t: f64,
) -> ComplexMatrix {
    coupling_matrix(kind, params, omega_t, phi_t)
}

fn coupling_matrix(
    kind: SidebandKind,
    params: &ModelParams,
    omega_t: f64,
    phi_t: f64,
) -> ComplexMatrix {
    let cfg = params.cfg();
    let q = qubit_operators();
    let phase = Complex64::from_polar(1.0, phi_t);
    match kind {
        SidebandKind::Carrier => {
            // omega_t (e^{i phi} sigma_+ + e^{-i phi} sigma_-) (x) (1 + eta^2 N)
            let mut fock = ComplexMatrix::identity(cfg.fock_dim());
            fock.add_scaled(
                Complex64::new(params.eta * params.eta, 0.0),
                &number(cfg),
            );
            let mut qubit = ComplexMatrix::zeros(2);
            qubit.add_scaled(phase, &q.raising);
            qubit.add_scaled(phase.conj(), &q.lowering);
            let mut m = tensor(&qubit, &fock).expect("qubit factor is 2x2");
            m.scale(Complex64::new(omega_t, 0.0));
            m
        }
        SidebandKind::RedSideband
        | SidebandKind::BlueSideband
        | SidebandKind::SecondRedSideband => {
            let a = annihilation(cfg);
            let fock_up: ComplexMatrix = match kind {
                SidebandKind::RedSideband => a.clone(),
                SidebandKind::BlueSideband => creation(cfg),
                SidebandKind::SecondRedSideband => a.mul(&a),
                SidebandKind::Carrier => unreachable!(),
            };
            let mut m = tensor(&q.raising, &fock_up).expect("qubit factor is 2x2");
            m.scale(phase);
            let mut lower = tensor(&q.lowering, &fock_up.adjoint()).expect("qubit factor is 2x2");
            lower.scale(phase.conj());
            m.add_scaled(C_ONE, &lower);
            m.scale(Complex64::new(params.eta * omega_t, 0.0));
            m
        }
    }
}

/// Sign of the dressed eigenvalue within a coupled pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// One dressed eigenstate: an equal-weight combination of the two basis
/// states the generator couples at pair index n.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub n: usize,
    pub sign: Sign,
    pub value: f64,
    pub state: Vec<Complex64>,
}

/// Dressed eigenpair at pair index n, in closed form.
///
/// Pair structure (|psi_+->, value), with s = 1/sqrt(2):
///
/// * carrier:     s(|g,n>   +- |e,n>),   +- Omega_0 (1 + n eta^2),          n <= n_max
/// * red:         s(|g,n+1> +- |e,n>),   +- eta Omega_0 sqrt(n+1),          n <= n_max - 1
/// * blue:        s(|g,n-1> +- |e,n>),   +- eta Omega_0 sqrt(n),            1 <= n <= n_max
/// * second red:  s(|g,n+2> +- |e,n>),   +- eta Omega_0 sqrt((n+1)(n+2)),   n <= n_max - 2
///
/// The index n counts vibrational quanta in the excited-state arm. Out of
/// range indices return [`Error::OutOfTruncation`] (for blue, n = 0 labels
/// the decoupled |e, 0>, not a pair, and is also rejected).
pub fn analytic_eigenpairs(
    kind: SidebandKind,
    params: &ModelParams,
    n: usize,
) -> Result<(EigenPair, EigenPair)> {
    let cfg = params.cfg();
    let n_max = cfg.n_max();
    let (ground_n, magnitude) = match kind {
        SidebandKind::Carrier => (n, params.omega0 * (1.0 + n as f64 * params.eta * params.eta)),
        SidebandKind::RedSideband => (
            n + 1,
            params.eta * params.omega0 * ((n + 1) as f64).sqrt(),
        ),
        SidebandKind::BlueSideband => {
            if n == 0 {
                return Err(Error::OutOfTruncation {
                    n: 0,
                    required: 1,
                    n_max,
                });
            }
            (n - 1, params.eta * params.omega0 * (n as f64).sqrt())
        }
        SidebandKind::SecondRedSideband => (
            n + 2,
            params.eta * params.omega0 * (((n + 1) * (n + 2)) as f64).sqrt(),
        ),
    };
    if n > n_max || ground_n > n_max {
        return Err(Error::OutOfTruncation {
            n,
            required: ground_n.max(n),
            n_max,
        });
    }
    let ig = cfg.index(ElectronicState::Ground, ground_n);
    let ie = cfg.index(ElectronicState::Excited, n);
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut plus = vec![C_ZERO; cfg.dim()];
    plus[ig] = s;
    plus[ie] = s;
    let mut minus = vec![C_ZERO; cfg.dim()];
    minus[ig] = s;
    minus[ie] = -s;
    Ok((
        EigenPair {
            n,
            sign: Sign::Plus,
            value: magnitude,
            state: plus,
        },
        EigenPair {
            n,
            sign: Sign::Minus,
            value: -magnitude,
            state: minus,
        },
    ))
}

/// The full expected spectrum of the truncated generator, sorted
/// ascending: all +-pair values from [`analytic_eigenpairs`], plus zeros
/// for basis states the coupling leaves alone (e.g. |g,0> on the red
/// sideband) and for truncation-edge states whose partner was cut off
/// (e.g. |e,n_max> on the red sideband). The count always equals the joint
/// dimension.
pub fn analytic_spectrum(kind: SidebandKind, params: &ModelParams) -> Vec<f64> {
    let n_max = params.cfg().n_max();
    let pair_range: Vec<usize> = match kind {
        SidebandKind::Carrier => (0..=n_max).collect(),
        SidebandKind::RedSideband => (0..n_max).collect(),
        SidebandKind::BlueSideband => (1..=n_max).collect(),
        SidebandKind::SecondRedSideband => (0..=n_max - 2).collect(),
    };
    let mut values = Vec::with_capacity(params.cfg().dim());
    for n in pair_range {
        let (p, m) = analytic_eigenpairs(kind, params, n).expect("pair index in range");
        values.push(p.value);
        values.push(m.value);
    }
    // Decoupled and truncation-orphaned states contribute exact zeros.
    while values.len() < params.cfg().dim() {
        values.push(0.0);
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    values
}
