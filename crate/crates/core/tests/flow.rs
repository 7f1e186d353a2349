use std::f64::consts::PI;
use std::sync::Arc;

use chernflow::flow::{
    potential_step, run_flow, tensor_step, FlowConfig, FlowProblem, FlowState, Formulation, Reference, StepPolicy,
    Termination, TerminationLabel,
};
use chernflow::linalg::CMat;
use chernflow::models::{PerturbationMode, TorusModel};
use chernflow::verify::{cosine_torus, grid_run};
use num_complex::Complex64;

fn max_dev(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).max_abs()).fold(0.0, f64::max)
}

fn cosine_state(points: usize, formulation: Formulation) -> FlowState {
    let reference = Arc::new(Reference::from_model(&cosine_torus().unwrap(), points).unwrap());
    FlowState::initial(reference, formulation)
}

#[test]
fn flat_torus_is_a_fixed_point() {
    let model = TorusModel::flat(2).unwrap();
    for f in [Formulation::Tensor, Formulation::Potential] {
        let tr = grid_run(&model, 8, 0.05, 1.0, f).unwrap();
        assert_eq!(tr.label, TerminationLabel::Completed);
        for row in &tr.rows {
            assert_eq!(row.sup_r, 0.0);
            assert_eq!(row.inf_r, 0.0);
            assert_eq!(row.min_eig, 1.0);
        }
    }
}

/// For n = 1, `Ric = -(1/4) (log g)''` in `x`, so at `t = 0`
/// `dg/dt = (g'' g - g'^2) / (4 g^2)` with `g = 1 + 0.1 cos 2 pi x`.
fn cosine_rate(x: f64) -> f64 {
    let w = 2.0 * PI;
    let g = 1.0 + 0.1 * (w * x).cos();
    let g1 = -0.1 * w * (w * x).sin();
    let g2 = -0.1 * w * w * (w * x).cos();
    (g2 * g - g1 * g1) / (4.0 * g * g)
}

fn rate_error(points: usize, f: Formulation) -> f64 {
    let dt = 1e-5;
    let s = cosine_state(points, f);
    let step = |dt| {
        if f == Formulation::Tensor {
            tensor_step(&s, dt)
        } else {
            potential_step(&s, dt)
        }
        .unwrap()
    };
    let (fwd, back) = (step(dt).metric_grid(), step(-dt).metric_grid());
    let grid = s.grid();
    (0..grid.len())
        .map(|idx| {
            let rate = (fwd[idx][(0, 0)] - back[idx][(0, 0)]).re / (2.0 * dt);
            (rate - cosine_rate(grid.point(idx).z(0).re)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn first_step_matches_the_analytic_rate() {
    for f in [Formulation::Tensor, Formulation::Potential] {
        let (coarse, fine) = (rate_error(32, f), rate_error(64, f));
        assert!(fine < 1e-5, "{f:?}: {fine:e}");
        assert!(coarse / fine > 12.0, "{f:?}: not fourth order ({coarse:e} -> {fine:e})");
    }
}

fn integrate(mut s: FlowState, t_end: f64, steps: usize) -> FlowState {
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        s = tensor_step(&s, dt).unwrap();
    }
    s
}

#[test]
fn time_stepping_is_fourth_order() {
    let s = cosine_state(16, Formulation::Tensor);
    let reference = integrate(s.clone(), 0.05, 160).metric_grid();
    let errs: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&k| max_dev(&integrate(s.clone(), 0.05, k).metric_grid(), &reference))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..20.0).contains(&ratio), "ratios {errs:?}");
    }
}

#[test]
fn stepping_back_returns_to_the_start() {
    let s = cosine_state(32, Formulation::Tensor);
    let dt = 1e-3;
    let back = tensor_step(&tensor_step(&s, dt).unwrap(), -dt).unwrap();
    assert!(back.t.abs() < 1e-18);
    let dev = max_dev(&back.metric_grid(), &s.metric_grid());
    // Local error O(dt^5) times the stiffness scale.
    assert!(dev < 1e-9, "{dev:e}");
    assert!(dev > 0.0, "a nonlinear step is not exactly reversible");
}

fn mode(row: usize, col: usize, wave: [i32; 4]) -> PerturbationMode {
    PerturbationMode {
        row,
        col,
        amplitude: Complex64::new(1.0, 0.0),
        phase: 0.0,
        wave: wave.to_vec(),
    }
}

#[test]
fn kahler_metrics_stay_kahler_and_others_do_not_become_kahler() {
    // `I + eps ddbar cos 2 pi (x_1 + x_2)`, up to scale: every entry is the
    // same function of `x_1 + x_2`.
    let w = [1, 0, 1, 0];
    let kahler = TorusModel::new(2, vec![1.0; 4], 0.1, vec![mode(0, 0, w), mode(1, 1, w), mode(0, 1, w)]).unwrap();
    for f in [Formulation::Tensor, Formulation::Potential] {
        // Exactly closed at t = 0; afterwards closed up to the O(h^4)
        // truncation error of the stencils.
        let sups: Vec<f64> = [(16, 2e-3), (32, 1e-3)]
            .into_iter()
            .map(|(points, dt)| {
                let tr = grid_run(&kahler, points, dt, 0.1, f).unwrap();
                assert_eq!(tr.label, TerminationLabel::Completed);
                assert!(tr.rows[0].dbar_residual < 1e-12);
                tr.rows.iter().map(|r| r.dbar_residual).fold(0.0, f64::max)
            })
            .collect();
        assert!(sups[1] < 1e-4 && sups[0] / sups[1] > 8.0, "{f:?}: {sups:?}");
    }
    let non_kahler = TorusModel::new(2, vec![1.0; 4], 0.1, vec![mode(0, 0, [0, 0, 1, 0])]).unwrap();
    let tr = grid_run(&non_kahler, 16, 2e-3, 0.1, Formulation::Tensor).unwrap();
    assert!(tr.rows.iter().all(|r| r.dbar_residual > 0.1));
}

#[test]
fn determinant_bound_and_positivity_hold_on_the_cosine_torus() {
    for f in [Formulation::Tensor, Formulation::Potential] {
        let tr = grid_run(&cosine_torus().unwrap(), 32, 2e-3, 0.2, f).unwrap();
        assert_eq!(tr.determinant_bound_excess, 0.0);
        assert!(tr.rows.iter().all(|r| r.min_eig > 0.5));
        // The flow spreads curvature out: sup |R| never exceeds its start.
        let r0 = tr.rows[0].sup_abs_r();
        assert!(tr.rows.iter().all(|r| r.sup_abs_r() <= r0 + 1e-12));
    }
}

#[test]
fn collapsing_step_budget_is_reported_as_underflow() {
    // The cosine torus has a long lifetime; a step floor above any
    // admissible step makes the controller give up at once.
    let reference = Arc::new(Reference::from_model(&cosine_torus().unwrap(), 16).unwrap());
    let mut policy = StepPolicy::new(1e-2, 9e-3, 0.1);
    policy.margin_factor = 1e3;
    let tr = run_flow(&FlowConfig {
        problem: FlowProblem::Grid {
            reference,
            formulation: Formulation::Tensor,
        },
        policy,
        checkpoint_every: 0,
    })
    .unwrap();
    assert!(matches!(tr.termination, Termination::StepUnderflow { .. }));
    assert_eq!(tr.label, TerminationLabel::ResolutionFailure);
}

#[test]
fn bad_policies_are_config_errors() {
    let reference = Arc::new(Reference::from_model(&cosine_torus().unwrap(), 16).unwrap());
    let problem = FlowProblem::Grid {
        reference,
        formulation: Formulation::Tensor,
    };
    for (policy, field) in [
        (StepPolicy::new(1e-3, 1e-2, 1.0), "dt_min"),
        (StepPolicy::new(-1e-3, 1e-6, 1.0), "dt"),
        (StepPolicy::new(1e-3, 1e-6, 0.0), "t_end"),
    ] {
        let err = run_flow(&FlowConfig {
            problem: problem.clone(),
            policy,
            checkpoint_every: 0,
        })
        .unwrap_err();
        assert!(
            matches!(err, chernflow::Error::Config { field: ref f, .. } if f == field),
            "{err}"
        );
    }
}
