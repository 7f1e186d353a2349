//! Property suites behind `chernflow verify`: exact-solution residuals,
//! kernel identities, formulation cross-validation and the scalar
//! evolution identity.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chern::{chern_package, chern_ricci, chern_scalar, kahler_gauduchon_residuals, torsion, RicciMethod};
use crate::error::{Error, Result};
use crate::flow::hopf_time_step;
use crate::flow::{
    cross_validate, phi_dot_identity_residual, richardson_time_derivative, run_flow, FlowConfig, FlowProblem,
    Formulation, Reference, StepPolicy, Trajectory,
};
use crate::linalg::{CMat, ComplexPoint};
use crate::metric::DerivativeMode;
use crate::models::{
    hopf_exact_flow, hopf_metric, hopf_singular_time, torus_metric, HopfModel, PerturbationMode, TorusModel,
};
use crate::singularity::{fit_blowup, scalar_evolution_residual, BlowupFit};
use crate::stencil::Stencil;

/// Seed of every random draw in the suites.
pub const VERIFY_SEED: u64 = 20_240_601;

/// Fundamental-domain modulus `|alpha|` of the Hopf manifolds under test.
pub const HOPF_ALPHA: f64 = 2.0;

/// Hopf samples are drawn with `t` in `[0, SAMPLE_HORIZON * T)`.
const SAMPLE_HORIZON: f64 = 0.9;

/// Scalar-evolution and identity checks on the exact Hopf family cover `t <= 0.8 T`;
/// closer to `T` the metric's condition number eats the tolerance.
pub const HOPF_IDENTITY_HORIZON: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Hopf,
    Equivalence,
    Lemma,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Kernel, Suite::Hopf, Suite::Equivalence, Suite::Lemma];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Kernel => "kernel",
            Suite::Hopf => "hopf",
            Suite::Equivalence => "equivalence",
            Suite::Lemma => "lemma",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            Error::config(
                "suite",
                format!("expected kernel, hopf, equivalence or lemma, got `{s}`"),
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// `value < bound`.
    Below,
    /// `value >= bound`.
    AtLeast,
}

/// One named check with its measured value.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: Bound,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            kind: Bound::Below,
            passed: value < bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            kind: Bound::AtLeast,
            passed: value >= bound,
        }
    }

    /// A boolean property, reported as value 1 (true) or 0 against `>= 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

/// `PASS <name> <value> < <bound>`, one line, floats with 17 digits.
impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.kind {
            Bound::Below => "<",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "{} {} {:.16e} {} {:.16e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            op,
            self.bound
        )
    }
}

fn sup<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn par_sup<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync + Send) -> Result<f64> {
    let values: Vec<Result<f64>> = items.par_iter().map(f).collect();
    let mut m: f64 = 0.0;
    for v in values {
        m = m.max(v?);
    }
    Ok(m)
}

/// `(p, t)` samples of the exact Hopf flow, `t` uniform in `[0, 0.9 T)`.
pub fn hopf_samples(model: &HopfModel, seed: u64, count: usize) -> Vec<(ComplexPoint, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x7469_6d65);
    let horizon = SAMPLE_HORIZON * hopf_singular_time(model);
    model
        .sample_points(seed, count)
        .into_iter()
        .map(|p| (p, rng.gen_range(0.0..horizon)))
        .collect()
}

/// `d g / dt` at `(p, t)` by Richardson-extrapolated central differences
/// of the exact family, entry by entry.
fn metric_time_derivative(model: &HopfModel, p: &ComplexPoint, t: f64) -> Result<CMat> {
    let n = model.dim();
    let delta = hopf_time_step(model, t);
    let entry = |i: usize, j: usize, imag: bool| {
        richardson_time_derivative(
            |s| {
                let z = hopf_exact_flow(model, s)?.metric(p)?.get(i, j);
                Ok(if imag { z.im } else { z.re })
            },
            t,
            delta,
        )
    };
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(entry(i, j, false)?, entry(i, j, true)?);
        }
    }
    Ok(m)
}

/// Sup over samples of `max_entry |dg/dt + Ric(g(t))|` with closed-form
/// derivatives throughout.
pub fn hopf_solution_residual_closed_form(model: &HopfModel, samples: &[(ComplexPoint, f64)]) -> Result<f64> {
    par_sup(samples, |(p, t)| {
        let field = hopf_exact_flow(model, *t)?;
        let ric = chern_ricci(&field, p, RicciMethod::Trace)?;
        Ok((*model.time_derivative(p).as_cmat() + *ric.as_cmat()).max_abs())
    })
}

/// As [`hopf_solution_residual_closed_form`], with spatial derivatives by
/// Richardson-extrapolated stencils of step `h` and the time derivative by
/// differencing the family.
pub fn hopf_solution_residual_stencil(model: &HopfModel, samples: &[(ComplexPoint, f64)], h: f64) -> Result<f64> {
    let mode = DerivativeMode::Stencil(Stencil::with_richardson(h));
    par_sup(samples, |(p, t)| {
        let field = hopf_exact_flow(model, *t)?.with_mode(mode);
        let ric = chern_ricci(&field, p, RicciMethod::Trace)?;
        Ok((metric_time_derivative(model, p, *t)? + *ric.as_cmat()).max_abs())
    })
}

/// Sup over samples of `max_entry |Ric(g(t)) - Ric(omega_H)|`, both computed.
pub fn hopf_ricci_constancy(model: &HopfModel, samples: &[(ComplexPoint, f64)]) -> Result<f64> {
    let base = hopf_metric(model);
    par_sup(samples, |(p, t)| {
        let field = hopf_exact_flow(model, *t)?;
        let ric = chern_ricci(&field, p, RicciMethod::Trace)?;
        let ric0 = chern_ricci(&base, p, RicciMethod::Trace)?;
        Ok((*ric.as_cmat() - *ric0.as_cmat()).max_abs())
    })
}

/// `sup_p R(t)` along the exact Hopf flow, evaluated by the generic kernel
/// at `count` times evenly spread over `[lo T, hi T]`.
pub fn hopf_computed_scalar_series(
    model: &HopfModel,
    points: &[ComplexPoint],
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    let big_t = hopf_singular_time(model);
    (0..count)
        .map(|k| {
            let t = big_t * (lo + (hi - lo) * k as f64 / (count - 1) as f64);
            let field = hopf_exact_flow(model, t)?;
            let values: Vec<Result<f64>> = points.par_iter().map(|p| chern_scalar(&field, p)).collect();
            let mut s = f64::NEG_INFINITY;
            for v in values {
                s = s.max(v?);
            }
            Ok((t, s))
        })
        .collect()
}

/// Blow-up fit of the computed Hopf scalar-curvature series on `[T/2, 0.99 T]`.
pub fn hopf_type_i_fit(model: &HopfModel, seed: u64) -> Result<BlowupFit> {
    let points = model.sample_points(seed, 16);
    let series = hopf_computed_scalar_series(model, &points, 0.5, 0.99, 50)?;
    let window = (series[0].0, series[series.len() - 1].0);
    fit_blowup(&series, window)
}

/// Exact torsion `T^k_{ij}` of `omega_H = |dz|^2 / r^2`:
/// `-(delta_{jk} zbar_i - delta_{ik} zbar_j) / r^2`.
pub fn hopf_torsion_oracle(p: &ComplexPoint, k: usize, i: usize, j: usize) -> Complex64 {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    -(p.z(i).conj() * d(j, k) - p.z(j).conj() * d(i, k)) / p.r2()
}

fn kernel_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let flat = torus_metric(&TorusModel::flat(2)?);
    let flat_points: Vec<ComplexPoint> = (0..16)
        .map(|k| {
            let x = k as f64 / 16.0;
            ComplexPoint::from_real(&[x, 0.3 * x, 0.7 - x, 0.1])
        })
        .collect::<Result<_>>()?;
    let flat_sup = par_sup(&flat_points, |p| {
        let pkg = chern_package(&flat, p)?;
        Ok(sup([
            pkg.gamma.max_abs(),
            pkg.curvature.max_abs(),
            pkg.ricci.as_cmat().max_abs(),
            pkg.scalar.abs(),
            pkg.torsion.max_abs(),
        ]))
    })?;
    out.push(Check::below("kernel.flat_torus_package", flat_sup, f64::MIN_POSITIVE));

    for n in [2usize, 3] {
        let model = HopfModel::new(n, HOPF_ALPHA)?;
        let field = hopf_metric(&model);
        let points = model.sample_points(seed, 1000);
        let two_way = par_sup(&points, |p| {
            let a = chern_ricci(&field, p, RicciMethod::Trace)?;
            let b = chern_ricci(&field, p, RicciMethod::LogDet)?;
            Ok((*a.as_cmat() - *b.as_cmat()).max_abs())
        })?;
        out.push(Check::below(format!("kernel.hopf{n}.ricci_two_way"), two_way, 1e-8));
        let oracle = par_sup(&points, |p| {
            let a = chern_ricci(&field, p, RicciMethod::Trace)?;
            Ok((*a.as_cmat() - *model.ricci_form(p).as_cmat()).max_abs())
        })?;
        out.push(Check::below(
            format!("kernel.hopf{n}.ricci_vs_closed_form"),
            oracle,
            1e-8,
        ));
        let tors = par_sup(&points, |p| {
            let t = torsion(&field, p)?;
            let mut m: f64 = 0.0;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        m = m.max((t.get(k, i, j) - hopf_torsion_oracle(p, k, i, j)).norm());
                    }
                }
            }
            Ok(m)
        })?;
        out.push(Check::below(
            format!("kernel.hopf{n}.torsion_vs_closed_form"),
            tors,
            1e-10,
        ));
        let (kahler, gauduchon) = kahler_gauduchon_residuals(&field, &points)?;
        // `d dbar omega = 0` is the Gauduchon condition only on surfaces.
        if n == 2 {
            out.push(Check::below(
                format!("kernel.hopf{n}.gauduchon_residual"),
                gauduchon,
                1e-6,
            ));
        }
        out.push(Check::at_least(format!("kernel.hopf{n}.kahler_residual"), kahler, 0.1));
    }
    Ok(out)
}

fn hopf_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in [2usize, 3] {
        let model = HopfModel::new(n, HOPF_ALPHA)?;
        let samples = hopf_samples(&model, seed, 100);
        out.push(Check::below(
            format!("hopf{n}.solution_residual.closed_form"),
            hopf_solution_residual_closed_form(&model, &samples)?,
            1e-8,
        ));
        out.push(Check::below(
            format!("hopf{n}.solution_residual.stencil"),
            hopf_solution_residual_stencil(&model, &samples, 1e-3)?,
            1e-4,
        ));
        out.push(Check::below(
            format!("hopf{n}.ricci_constancy"),
            hopf_ricci_constancy(&model, &samples)?,
            1e-8,
        ));
        let fit = hopf_type_i_fit(&model, seed)?;
        let big_t = hopf_singular_time(&model);
        let c_expected = (n - 1) as f64;
        out.push(Check::below(
            format!("hopf{n}.fit.t_fit_error"),
            (fit.t_fit - big_t).abs(),
            1e-3,
        ));
        out.push(Check::below(format!("hopf{n}.fit.k_error"), (fit.k - 1.0).abs(), 0.05));
        out.push(Check::below(
            format!("hopf{n}.fit.c_relative_error"),
            (fit.c - c_expected).abs() / c_expected,
            0.02,
        ));
    }
    Ok(out)
}

/// The smooth n = 1 test torus `g = 1 + 0.1 cos(2 pi x)`.
pub fn cosine_torus() -> Result<TorusModel> {
    TorusModel::new(
        1,
        vec![1.0, 1.0],
        0.1,
        vec![PerturbationMode {
            row: 0,
            col: 0,
            amplitude: Complex64::new(1.0, 0.0),
            phase: 0.0,
            wave: vec![1, 0],
        }],
    )
}

/// Runs `model` on an `N`-point grid to `t_end` with a checkpoint every step.
pub fn grid_run(
    model: &TorusModel,
    points: usize,
    dt: f64,
    t_end: f64,
    formulation: Formulation,
) -> Result<Trajectory> {
    let reference = Arc::new(Reference::from_model(model, points)?);
    run_flow(&FlowConfig {
        problem: FlowProblem::Grid { reference, formulation },
        policy: StepPolicy::new(dt, dt * 1e-4, t_end),
        checkpoint_every: 1,
    })
}

/// Coarse (`N = 32`, `dt = 2e-3`) and fine (`N = 64`, `dt = 1e-3`)
/// resolutions of the refinement studies.
pub const REFINEMENT: [(usize, f64); 2] = [(32, 2e-3), (64, 1e-3)];

/// End time of the torus refinement studies.
pub const TORUS_T_END: f64 = 0.2;

fn equivalence_checks() -> Result<Vec<Check>> {
    let model = cosine_torus()?;
    let mut out = Vec::new();
    let mut sups = Vec::new();
    for (points, dt) in REFINEMENT {
        let tensor = grid_run(&model, points, dt, TORUS_T_END, Formulation::Tensor)?;
        let potential = grid_run(&model, points, dt, TORUS_T_END, Formulation::Potential)?;
        let report = cross_validate(&tensor, &potential)?;
        sups.push(report.sup_deviation);
        if points == REFINEMENT[1].0 {
            out.push(Check::below(
                format!("equivalence.n{points}.sup_deviation"),
                report.sup_deviation,
                1e-5,
            ));
            out.push(Check::below(
                format!("equivalence.n{points}.calibrated_bound"),
                report.sup_deviation,
                report.tolerance,
            ));
            for tr in [&tensor, &potential] {
                let name = match &tr.problem {
                    FlowProblem::Grid { formulation, .. } => formulation.name(),
                    FlowProblem::HopfClosedForm { .. } => "closed_form",
                };
                let res = sup(phi_dot_identity_residual(tr)?.into_iter().map(|(_, r)| r));
                out.push(Check::below(
                    format!("equivalence.n{points}.{name}.phidot_identity"),
                    res,
                    1e-4,
                ));
            }
        }
    }
    out.push(Check::at_least("equivalence.refinement_ratio", sups[0] / sups[1], 8.0));
    Ok(out)
}

/// Sup of the scalar-evolution residual of a closed-form Hopf run over
/// `t <= HOPF_IDENTITY_HORIZON * T`.
pub fn hopf_lemma_residual(tr: &Trajectory) -> Result<f64> {
    let FlowProblem::HopfClosedForm { model, .. } = &tr.problem else {
        return Err(Error::contract("closed-form Hopf trajectory required"));
    };
    let horizon = HOPF_IDENTITY_HORIZON * hopf_singular_time(model);
    Ok(sup(scalar_evolution_residual(tr)?
        .into_iter()
        .filter(|(t, _)| *t <= horizon)
        .map(|(_, r)| r)))
}

/// The closed-form Hopf run used throughout: 16 sample points, `dt = 1e-3`,
/// checkpoints every 10 steps, `t_end = 1` (past the singular time).
pub fn hopf_run(n: usize, seed: u64) -> Result<Trajectory> {
    let model = HopfModel::new(n, HOPF_ALPHA)?;
    run_flow(&FlowConfig {
        problem: FlowProblem::HopfClosedForm {
            model,
            points: model.sample_points(seed, 16),
        },
        policy: StepPolicy::new(1e-3, 1e-7, 1.0),
        checkpoint_every: 10,
    })
}

fn lemma_checks(seed: u64) -> Result<Vec<Check>> {
    let model = cosine_torus()?;
    let mut sups = Vec::new();
    let mut out = Vec::new();
    for (points, dt) in REFINEMENT {
        let tr = grid_run(&model, points, dt, TORUS_T_END, Formulation::Tensor)?;
        let s = sup(scalar_evolution_residual(&tr)?.into_iter().map(|(_, r)| r));
        out.push(Check::below(
            format!("lemma.torus.n{points}.residual"),
            s,
            f64::INFINITY,
        ));
        sups.push(s);
    }
    out.push(Check::at_least("lemma.torus.refinement_ratio", sups[0] / sups[1], 4.0));
    for n in [2usize, 3] {
        let tr = hopf_run(n, seed)?;
        out.push(Check::below(
            format!("lemma.hopf{n}.residual"),
            hopf_lemma_residual(&tr)?,
            1e-8,
        ));
    }
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::Kernel => kernel_checks(seed),
        Suite::Hopf => hopf_checks(seed),
        Suite::Equivalence => equivalence_checks(),
        Suite::Lemma => lemma_checks(seed),
    }
}
