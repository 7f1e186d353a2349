use std::sync::Arc;

use chernflow::flow::{read_checkpoint, step, write_checkpoint, FlowState, Formulation, Reference};
use chernflow::linalg::CMat;
use chernflow::models::{PerturbationMode, TorusModel};
use chernflow::singularity::{fit_blowup, maximal_time_proxy};
use num_complex::Complex64;
use proptest::prelude::*;

/// `g = 1 + eps amp cos(...)`, positive since `eps |amp| < 0.3`.
fn torus(eps: f64, amp: f64, phase: f64, wave: (i32, i32)) -> TorusModel {
    TorusModel::new(
        1,
        vec![1.0, 1.5],
        eps,
        vec![PerturbationMode {
            row: 0,
            col: 0,
            amplitude: Complex64::new(amp, 0.0),
            phase,
            wave: vec![wave.0, wave.1],
        }],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoints_round_trip_bit_exactly(
        eps in 0.0f64..0.3,
        amp in -1.0f64..1.0,
        phase in 0.0f64..6.3,
        wave in (0i32..3, 0i32..3),
        potential in any::<bool>(),
        dt in 1e-5f64..1e-3,
    ) {
        let model = torus(eps, amp, phase, wave);
        let reference = Arc::new(Reference::from_model(&model, 8).unwrap());
        let formulation = if potential { Formulation::Potential } else { Formulation::Tensor };
        let s = step(&FlowState::initial(reference, formulation), dt).unwrap();
        let text = write_checkpoint(&s);
        let back = read_checkpoint(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(write_checkpoint(&back), text);
    }

    #[test]
    fn fit_recovers_power_laws_and_scales_only_c(
        big_t in 0.2f64..2.0,
        k in 0.5f64..2.5,
        log_c in -2.0f64..2.0,
        lambda in 0.1f64..10.0,
    ) {
        let c = log_c.exp();
        let series = |scale: f64| -> Vec<(f64, f64)> {
            (0..40)
                .map(|i| {
                    let t = big_t * (0.5 + 0.45 * i as f64 / 39.0);
                    (t, scale * c * (big_t - t).powf(-k))
                })
                .collect()
        };
        let window = (0.5 * big_t, 0.95 * big_t);
        let a = fit_blowup(&series(1.0), window).unwrap();
        let b = fit_blowup(&series(lambda), window).unwrap();
        prop_assert!((a.t_fit - big_t).abs() < 1e-6 * big_t);
        prop_assert!((a.k - k).abs() < 1e-5);
        prop_assert!((a.c / c - 1.0).abs() < 1e-4);
        prop_assert!((b.t_fit - a.t_fit).abs() < 1e-6 * big_t);
        prop_assert!((b.k - a.k).abs() < 1e-5);
        prop_assert!((b.c / (lambda * a.c) - 1.0).abs() < 1e-4);
        prop_assert!(!a.low_confidence && !b.low_confidence);
    }

    #[test]
    fn proxy_shrinks_as_ricci_grows(
        g in prop::collection::vec((0.5f64..2.0, 0.5f64..2.0), 1..6),
        r in prop::collection::vec((-1.0f64..3.0, -1.0f64..3.0), 1..6),
        scale in 1.0f64..4.0,
    ) {
        let len = g.len().min(r.len());
        let g0: Vec<CMat> = g[..len].iter().map(|&(a, b)| CMat::from_diagonal(&[a, b])).collect();
        let ric: Vec<CMat> = r[..len].iter().map(|&(a, b)| CMat::from_diagonal(&[a, b])).collect();
        let bigger: Vec<CMat> = ric.iter().map(|m| *m * scale).collect();
        let p = maximal_time_proxy(&g0, &ric).unwrap();
        let q = maximal_time_proxy(&g0, &bigger).unwrap();
        prop_assert!(q <= p);
        // Diagonal data: the proxy is min over positive entries of g / ric.
        let exact = g[..len]
            .iter()
            .zip(&r[..len])
            .flat_map(|(&(ga, gb), &(ra, rb))| [(ga, ra), (gb, rb)])
            .filter(|&(_, ri)| ri > 0.0)
            .map(|(gi, ri)| gi / ri)
            .fold(f64::INFINITY, f64::min);
        if exact.is_finite() {
            prop_assert!((p - exact).abs() <= 2f64.powi(-33));
        } else {
            prop_assert_eq!(p, f64::INFINITY);
        }
    }
}
