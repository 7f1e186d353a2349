use chernflow::chern::{chern_package, chern_ricci, RicciMethod};
use chernflow::linalg::ComplexPoint;
use chernflow::metric::DerivativeMode;
use chernflow::models::{
    hopf_exact_flow, hopf_metric, pullback_residual, torus_metric, HopfModel, PerturbationMode, TorusModel,
};
use chernflow::stencil::Stencil;
use num_complex::Complex64;
use proptest::prelude::*;

fn hopf_point(n: usize) -> impl Strategy<Value = ComplexPoint> {
    // Nonzero points of moderate size; the metric is scale invariant.
    (prop::collection::vec(-2.0f64..2.0, 2 * n), 0.5f64..2.0).prop_filter_map("away from 0", |(v, r)| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| ComplexPoint::from_real(&v.iter().map(|x| r * x / norm).collect::<Vec<_>>()).unwrap())
    })
}

fn off_diagonal_torus(phase: f64, im: f64) -> TorusModel {
    TorusModel::new(
        2,
        vec![1.0, 1.0, 1.5, 1.0],
        0.15,
        vec![
            PerturbationMode {
                row: 0,
                col: 1,
                amplitude: Complex64::new(1.0, im),
                phase,
                wave: vec![1, 0, 1, 1],
            },
            PerturbationMode {
                row: 1,
                col: 1,
                amplitude: Complex64::new(0.5, 0.0),
                phase: 0.0,
                wave: vec![0, 1, 0, 0],
            },
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hopf_package_invariants(p in hopf_point(2), t in 0.0f64..0.45) {
        let model = HopfModel::new(2, 2.0).unwrap();
        let field = hopf_exact_flow(&model, t).unwrap();
        let pkg = chern_package(&field, &p).unwrap();
        prop_assert!(pkg.curvature.conjugate_symmetry_residual() < 1e-9 * pkg.curvature.max_abs().max(1.0));
        prop_assert!(pkg.torsion.antisymmetry_residual() == 0.0);
        let logdet = chern_ricci(&field, &p, RicciMethod::LogDet).unwrap();
        prop_assert!((*pkg.ricci.as_cmat() - *logdet.as_cmat()).max_abs() < 1e-8);
        // R(t) = (n - 1) / (1/n - t) everywhere.
        prop_assert!((pkg.scalar - 1.0 / (0.5 - t)).abs() < 1e-8 * (1.0 / (0.5 - t)));
    }

    #[test]
    fn hopf_metric_descends_to_the_quotient(p in hopf_point(3), arg in 0.0f64..6.3) {
        let model = HopfModel::new(3, 2.0).unwrap();
        let alpha = vec![Complex64::from_polar(2.0, arg); 3];
        prop_assert!(pullback_residual(&hopf_metric(&model), &alpha, &p).unwrap() < 1e-12);
    }

    #[test]
    fn torus_ricci_routes_and_stencils_agree(
        x in prop::collection::vec(0.0f64..1.0, 4),
        phase in 0.0f64..6.3,
        im in -1.0f64..1.0,
    ) {
        let field = torus_metric(&off_diagonal_torus(phase, im));
        let p = ComplexPoint::from_real(&x).unwrap();
        let closed = chern_ricci(&field, &p, RicciMethod::Trace).unwrap();
        let stencil = chern_ricci(
            &field.with_mode(DerivativeMode::Stencil(Stencil::with_richardson(1e-3))),
            &p,
            RicciMethod::Trace,
        )
        .unwrap();
        prop_assert!((*closed.as_cmat() - *stencil.as_cmat()).max_abs() < 1e-6);
        // The trace of Chern curvature is -ddbar log det for any Hermitian
        // metric, Kahler or not.
        let logdet = chern_ricci(&field, &p, RicciMethod::LogDet).unwrap();
        prop_assert!((*closed.as_cmat() - *logdet.as_cmat()).max_abs() < 1e-6);
    }
}
