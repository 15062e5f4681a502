//! Property tests for structural invariants that should hold across the
//! whole parameter space, not just at hand-picked values.

use ionsim::closed_form::{intensity_freq_rate, pg_intensity, FormulaVariant};
use ionsim::hilbert::{tensor, DensityMatrix, HilbertConfig};
use ionsim::linalg::ComplexMatrix;
use ionsim::rng::stream_rng;
use ionsim::sideband::{analytic_eigenpairs, build_generator, ModelParams, SidebandKind};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn sideband_kind() -> impl Strategy<Value = SidebandKind> {
    prop_oneof![
        Just(SidebandKind::Carrier),
        Just(SidebandKind::RedSideband),
        Just(SidebandKind::BlueSideband),
        Just(SidebandKind::SecondRedSideband),
    ]
}

fn complex_entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    })]

    /// tr(A (x) B) = tr(A) tr(B) for any 2x2 A and square B.
    #[test]
    fn tensor_trace_factorizes(
        a_entries in complex_entries(2),
        b_dim in 1usize..6,
        b_seed in complex_entries(5),
    ) {
        let a = ComplexMatrix::from_fn(2, |i, j| {
            let (re, im) = a_entries[i * 2 + j];
            Complex64::new(re, im)
        });
        let b = ComplexMatrix::from_fn(b_dim, |i, j| {
            let (re, im) = b_seed[i * 5 + j];
            Complex64::new(re, im)
        });
        let t = tensor(&a, &b).unwrap();
        let lhs = t.trace();
        let rhs = a.trace() * b.trace();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    /// Ground and excited populations of any pure state sum to the trace.
    #[test]
    fn populations_partition_the_trace(
        n_max in 2usize..8,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 18),
    ) {
        let cfg = HilbertConfig::new(n_max).unwrap();
        let dim = cfg.dim();
        let mut ket: Vec<Complex64> = raw[..dim]
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        let norm: f64 = ket.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        for c in &mut ket {
            *c /= norm;
        }
        let rho = DensityMatrix::from_ket(&ket).unwrap();
        let pg = ionsim::ground_population(&rho);
        let pe: f64 = (cfg.fock_dim()..dim)
            .map(|i| rho.matrix().get(i, i).re)
            .sum();
        prop_assert!((pg + pe - 1.0).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pg));
    }

    /// Closed-form populations stay in [0, 1] and inside the decay
    /// envelope 1/2 (1 +- exp(-rate t)).
    #[test]
    fn closed_form_respects_envelope(
        kind in sideband_kind(),
        n in 0usize..10,
        eta in 0.01f64..0.7,
        omega0 in 0.1f64..5.0,
        gamma in 0.0f64..1.0,
        t in 0.0f64..100.0,
    ) {
        let pg = pg_intensity(kind, FormulaVariant::SelfConsistent, n, eta, omega0, gamma, t);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pg));
        let (_, rate) = intensity_freq_rate(kind, FormulaVariant::SelfConsistent, n, eta, omega0, gamma);
        let envelope = 0.5 * (-rate * t).exp();
        prop_assert!((pg - 0.5).abs() <= envelope + 1e-12);
    }

    /// The two formula variants are the same function away from the
    /// carrier.
    #[test]
    fn variants_agree_off_carrier(
        kind in prop_oneof![
            Just(SidebandKind::RedSideband),
            Just(SidebandKind::BlueSideband),
            Just(SidebandKind::SecondRedSideband),
        ],
        n in 0usize..10,
        eta in 0.01f64..0.7,
        omega0 in 0.1f64..5.0,
        gamma in 0.0f64..1.0,
        t in 0.0f64..100.0,
    ) {
        let a = pg_intensity(kind, FormulaVariant::Published, n, eta, omega0, gamma, t);
        let b = pg_intensity(kind, FormulaVariant::SelfConsistent, n, eta, omega0, gamma, t);
        prop_assert_eq!(a, b);
    }

    /// Analytic eigenpairs solve the eigenvalue equation of the built
    /// generator wherever the truncation admits them.
    #[test]
    fn eigenpairs_satisfy_eigen_equation(
        kind in sideband_kind(),
        n_max in 2usize..9,
        n in 0usize..9,
        eta in 0.05f64..0.5,
        omega0 in 0.2f64..3.0,
    ) {
        let cfg = HilbertConfig::new(n_max).unwrap();
        let params = ModelParams::new(omega0, eta, cfg).unwrap();
        let in_range = match kind {
            SidebandKind::Carrier => n <= n_max,
            SidebandKind::RedSideband => n + 1 <= n_max,
            SidebandKind::BlueSideband => (1..=n_max).contains(&n),
            SidebandKind::SecondRedSideband => n + 2 <= n_max,
        };
        match analytic_eigenpairs(kind, &params, n) {
            Ok((plus, minus)) => {
                prop_assert!(in_range);
                let g = build_generator(kind, &params);
                for pair in [&plus, &minus] {
                    let gv = g.matrix().apply(&pair.state);
                    let residual: f64 = gv
                        .iter()
                        .zip(&pair.state)
                        .map(|(a, b)| (a - b * pair.value).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    prop_assert!(residual <= 1e-10 * g.norm().max(1.0));
                }
                prop_assert!((plus.value + minus.value).abs() <= 1e-12 * g.norm());
            }
            Err(_) => prop_assert!(!in_range),
        }
    }

    /// Per-index random streams are reproducible and pairwise distinct.
    #[test]
    fn rng_streams_are_stable_and_distinct(seed in any::<u64>(), index in 0u64..1000) {
        let a: u128 = stream_rng(seed, index).random();
        let b: u128 = stream_rng(seed, index).random();
        prop_assert_eq!(a, b);
        let c: u128 = stream_rng(seed, index + 1).random();
        prop_assert_ne!(a, c);
        let d: u128 = stream_rng(seed ^ 0x5555_5555_5555_5555, index).random();
        prop_assert_ne!(a, d);
    }
}
