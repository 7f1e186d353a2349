//! The flow driver: outer steps with CFL sub-stepping, adaptive halving on
//! positivity-margin shrinkage, diagnostics rows and checkpoints.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::ComplexPoint;
use crate::models::{hopf_singular_time, HopfModel};

use super::diagnostics::{evaluate_grid, evaluate_hopf, DiagnosticsRow, Evaluation};
use super::integrator::step;
use super::state::{FlowState, Formulation, Reference};

/// Length of the sup-R tail inspected when labelling an aborted run.
pub const BLOWUP_TAIL: usize = 10;

/// What is being evolved.
#[derive(Clone, Debug)]
pub enum FlowProblem {
    /// A torus metric on a periodic grid.
    Grid {
        reference: Arc<Reference>,
        formulation: Formulation,
    },
    /// The exact Hopf family, stepped analytically and observed at sample points.
    HopfClosedForm {
        model: HopfModel,
        points: Vec<ComplexPoint>,
    },
}

impl FlowProblem {
    pub fn dim(&self) -> usize {
        match self {
            FlowProblem::Grid { reference, .. } => reference.dim(),
            FlowProblem::HopfClosedForm { model, .. } => model.dim(),
        }
    }

    /// Number of points at which fields are observed.
    pub fn len(&self) -> usize {
        match self {
            FlowProblem::Grid { reference, .. } => reference.len(),
            FlowProblem::HopfClosedForm { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Time-step policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    /// Initial outer step; one diagnostics row is emitted per outer step.
    pub dt0: f64,
    /// Abort threshold for adaptive halving.
    pub dt_min: f64,
    pub t_end: f64,
    /// Explicit stability factor: grid sub-steps are at most
    /// `cfl * min_eig / sum_a h_a^-2`.
    pub cfl: f64,
    /// Halve the step when the smallest eigenvalue at a point falls below
    /// this multiple of its projected decrement over the next step.
    pub margin_factor: f64,
}

impl StepPolicy {
    pub fn new(dt0: f64, dt_min: f64, t_end: f64) -> Self {
        Self {
            dt0,
            dt_min,
            t_end,
            cfl: 1.0,
            margin_factor: 10.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.dt0) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !positive(self.dt_min) || self.dt_min >= self.dt0 {
            return Err(Error::config("dt_min", "must be positive and smaller than dt"));
        }
        if !positive(self.t_end) {
            return Err(Error::config("t_end", "must be positive"));
        }
        if !positive(self.cfl) {
            return Err(Error::config("cfl", "must be positive"));
        }
        if !positive(self.margin_factor) {
            return Err(Error::config("margin_factor", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub problem: FlowProblem,
    pub policy: StepPolicy,
    /// Store a checkpoint every this many outer steps (0: only the first
    /// and last states).
    pub checkpoint_every: usize,
}

/// Why integration stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    ReachedTEnd,
    PositivityLoss { t: f64, point: usize, min_eigenvalue: f64 },
    StepUnderflow { t: f64, dt: f64 },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::ReachedTEnd => "reached_t_end",
            Termination::PositivityLoss { .. } => "positivity_loss",
            Termination::StepUnderflow { .. } => "step_underflow",
        }
    }
}

/// Interpretation of the termination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationLabel {
    Completed,
    /// Aborted with sup R growing monotonically over the final rows.
    CurvatureBlowUp,
    /// Aborted without that growth: the discretization gave out first.
    ResolutionFailure,
}

impl TerminationLabel {
    pub fn name(&self) -> &'static str {
        match self {
            TerminationLabel::Completed => "completed",
            TerminationLabel::CurvatureBlowUp => "curvature_blow_up",
            TerminationLabel::ResolutionFailure => "resolution_failure",
        }
    }
}

/// A stored state.
#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Grid(FlowState),
    /// States of the exact Hopf family are determined by their time.
    Hopf {
        t: f64,
    },
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        match self {
            Snapshot::Grid(s) => s.t,
            Snapshot::Hopf { t } => *t,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub problem: FlowProblem,
    pub policy: StepPolicy,
    pub rows: Vec<DiagnosticsRow>,
    /// Scalar curvature at every observed point, one field per row.
    pub scalar_fields: Vec<Vec<f64>>,
    pub checkpoints: Vec<Snapshot>,
    pub termination: Termination,
    pub label: TerminationLabel,
    /// Largest excess of `sup |phidot(t)|` over `sup |phidot(0)| + t sup_{s<=t} sup |R(s)|`
    /// (zero when the determinant bound held at every row).
    pub determinant_bound_excess: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    /// Largest `|R|` seen over the run.
    pub fn sup_abs_scalar(&self) -> f64 {
        self.rows.iter().map(DiagnosticsRow::sup_abs_r).fold(0.0, f64::max)
    }
}

/// Whether `sup R` grew strictly over each of the last `tail` rows.
pub fn monotone_tail(rows: &[DiagnosticsRow], tail: usize) -> bool {
    rows.len() > tail
        && rows[rows.len() - tail - 1..]
            .windows(2)
            .all(|w| w[1].sup_r > w[0].sup_r)
}

fn label_for(termination: &Termination, rows: &[DiagnosticsRow]) -> TerminationLabel {
    match termination {
        Termination::ReachedTEnd => TerminationLabel::Completed,
        _ if monotone_tail(rows, BLOWUP_TAIL) => TerminationLabel::CurvatureBlowUp,
        _ => TerminationLabel::ResolutionFailure,
    }
}

/// The evolving object inside the driver loop.
enum Current {
    Grid(FlowState),
    Hopf {
        model: HopfModel,
        points: Vec<ComplexPoint>,
        t: f64,
    },
}

impl Current {
    fn t(&self) -> f64 {
        match self {
            Current::Grid(s) => s.t,
            Current::Hopf { t, .. } => *t,
        }
    }

    fn evaluate(&self) -> Result<Evaluation> {
        match self {
            Current::Grid(s) => evaluate_grid(&s.reference, s.t, &s.metric_grid(), &s.phi),
            Current::Hopf { model, points, t } => evaluate_hopf(model, *t, points),
        }
    }

    fn snapshot(&self) -> Snapshot {
        match self {
            Current::Grid(s) => Snapshot::Grid(s.clone()),
            Current::Hopf { t, .. } => Snapshot::Hopf { t: *t },
        }
    }

    /// Advances by `h`, splitting grid steps into equal explicit-stable sub-steps.
    fn advance(&self, h: f64, t_target: f64, min_eig: f64, cfl: f64) -> Result<Current> {
        match self {
            Current::Grid(s) => {
                let stiffness = s.grid().inv_spacing_sq_sum();
                let substeps = if stiffness > 0.0 {
                    let limit = cfl * min_eig / stiffness;
                    (h / limit).ceil().max(1.0) as usize
                } else {
                    1
                };
                let sub = h / substeps as f64;
                let mut state = s.clone();
                for k in 0..substeps {
                    state = step(&state, sub)?;
                    if k + 1 == substeps {
                        state.t = t_target;
                    }
                }
                Ok(Current::Grid(state))
            }
            Current::Hopf { model, points, .. } => {
                let t = t_target;
                if t >= hopf_singular_time(model) {
                    return Err(Error::PositivityLoss {
                        t,
                        point: 0,
                        min_eigenvalue: 0.0,
                    });
                }
                Ok(Current::Hopf {
                    model: *model,
                    points: points.clone(),
                    t,
                })
            }
        }
    }
}

/// Integrates until `t_end`, loss of positivity, or step underflow.
pub fn run_flow(config: &FlowConfig) -> Result<Trajectory> {
    let policy = config.policy;
    policy.validate()?;
    if config.problem.is_empty() {
        return Err(Error::contract("flow problem has no observation points"));
    }
    let mut current = match &config.problem {
        FlowProblem::Grid { reference, formulation } => {
            Current::Grid(FlowState::initial(reference.clone(), *formulation))
        }
        FlowProblem::HopfClosedForm { model, points } => Current::Hopf {
            model: *model,
            points: points.clone(),
            t: 0.0,
        },
    };
    let mut eval = current.evaluate()?;
    let phidot0 = eval.row.sup_abs_phidot;
    let mut running_sup_r = eval.row.sup_abs_r();
    let mut excess: f64 = 0.0;
    let mut rows = vec![eval.row];
    let mut scalar_fields = vec![eval.scalar.clone()];
    let mut checkpoints = vec![current.snapshot()];
    let mut dt = policy.dt0;
    let mut steps = 0usize;
    let t_tol = 1e-12 * policy.t_end.max(1.0);

    let termination = loop {
        let t = current.t();
        if policy.t_end - t <= t_tol {
            break Termination::ReachedTEnd;
        }
        let h = dt.min(policy.t_end - t);
        let squeezed = eval
            .margins
            .iter()
            .any(|&(lambda, rate)| lambda < policy.margin_factor * h * rate.max(0.0));
        if squeezed {
            dt *= 0.5;
            if dt < policy.dt_min {
                break Termination::StepUnderflow { t, dt };
            }
            continue;
        }
        let t_target = if policy.t_end - (t + h) <= t_tol {
            policy.t_end
        } else {
            t + h
        };
        let next = match current.advance(h, t_target, eval.row.min_eig, policy.cfl) {
            Ok(next) => next,
            Err(Error::PositivityLoss {
                t,
                point,
                min_eigenvalue,
            }) => {
                break Termination::PositivityLoss {
                    t,
                    point,
                    min_eigenvalue,
                }
            }
            Err(e) => return Err(e),
        };
        current = next;
        eval = current.evaluate()?;
        running_sup_r = running_sup_r.max(eval.row.sup_abs_r());
        let bound = phidot0 + eval.row.t * running_sup_r;
        excess = excess.max(eval.row.sup_abs_phidot - bound);
        rows.push(eval.row);
        scalar_fields.push(eval.scalar.clone());
        steps += 1;
        if config.checkpoint_every > 0 && steps.is_multiple_of(config.checkpoint_every) {
            checkpoints.push(current.snapshot());
        }
    };
    if checkpoints.last().map(Snapshot::t) != Some(current.t()) {
        checkpoints.push(current.snapshot());
    }
    let label = label_for(&termination, &rows);
    Ok(Trajectory {
        problem: config.problem.clone(),
        policy,
        rows,
        scalar_fields,
        checkpoints,
        termination,
        label,
        determinant_bound_excess: excess.max(0.0),
    })
}
