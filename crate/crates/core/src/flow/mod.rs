//! Time integration of the Chern-Ricci flow.
//!
//! Torus metrics are evolved on periodic grids either as tensors,
//! `d g / dt = -Ric(g)`, or through the potential of the parabolic complex
//! Monge-Ampere equation, `g(t) = alpha_t + d dbar phi` with
//! `alpha_t = g0 - t Ric(g0)`. The exact Hopf family is stepped
//! analytically and observed at sample points.

mod checkpoint;
mod diagnostics;
mod integrator;
mod run;
mod state;
mod validate;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use diagnostics::{fmt_f64, grid_geometry, hopf_potential, write_csv, DiagnosticsRow, GridGeometry, CSV_COLUMNS};
pub use integrator::{potential_step, step, tensor_step};
pub use run::{
    monotone_tail, run_flow, FlowConfig, FlowProblem, Snapshot, StepPolicy, Termination, TerminationLabel, Trajectory,
    BLOWUP_TAIL,
};
pub use state::{FlowState, Formulation, Reference};
pub use validate::{
    cross_validate, phi_dot_identity_residual, richardson_time_derivative, DeviationReport, CROSS_VALIDATION_CONSTANT,
    HOPF_TIME_STEP_FRACTION,
};

pub(crate) use validate::{hopf_scalar, hopf_time_step};
