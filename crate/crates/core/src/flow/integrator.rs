//! Classical four-stage explicit integration of both grid formulations.

use rayon::prelude::*;

use crate::chern::{ricci_trace_raw, RICCI_SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{CMat, HermitianMatrix};

use super::state::{checked_log_det, log_dets, potential_metric, FlowState, Formulation, Reference};

/// Tensor right-hand side: `(-Ric(g), theta)` with Ricci by the trace route.
///
/// The potential formulation differentiates `log det` instead, so the two
/// semi-discretizations are genuinely different and agree only up to the
/// stencil error; cross-validation between them is therefore meaningful.
fn tensor_rates(reference: &Reference, t: f64, g: &[CMat]) -> Result<(Vec<CMat>, Vec<f64>)> {
    let grid = &reference.grid;
    let results: Vec<Result<(CMat, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let ld = checked_log_det(&g[idx], t, idx)?;
            let jet = grid.metric_jet(g, idx)?;
            let ric = HermitianMatrix::checked(ricci_trace_raw(&jet), RICCI_SYMMETRY_TOL)?;
            Ok((-ric.into_cmat(), ld - reference.log_det0[idx]))
        })
        .collect();
    let mut dg = Vec::with_capacity(g.len());
    let mut dphi = Vec::with_capacity(g.len());
    for r in results {
        let (a, b) = r?;
        dg.push(a);
        dphi.push(b);
    }
    Ok((dg, dphi))
}

/// Potential right-hand side `theta = log det(alpha_t + d dbar phi) - log det g0`.
fn potential_rates(reference: &Reference, t: f64, phi: &[f64]) -> Result<Vec<f64>> {
    let g = potential_metric(reference, t, phi);
    let ld = log_dets(&g, t)?;
    Ok(ld.iter().zip(&reference.log_det0).map(|(a, b)| a - b).collect())
}

fn axpy_mat(base: &[CMat], k: &[CMat], s: f64) -> Vec<CMat> {
    base.iter().zip(k).map(|(b, k)| (*b + *k * s).symmetrized()).collect()
}

fn axpy(base: &[f64], k: &[f64], s: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, k)| b + k * s).collect()
}

fn rk4_combine<T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>>(
    base: &[T],
    k: [&[T]; 4],
    dt: f64,
) -> Vec<T> {
    (0..base.len())
        .map(|i| base[i] + (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (dt / 6.0))
        .collect()
}

fn check_step(s: &FlowState, dt: f64, expected: Formulation) -> Result<()> {
    if s.formulation != expected {
        return Err(Error::contract(format!(
            "{} step applied to a {} state",
            expected.name(),
            s.formulation.name()
        )));
    }
    // Negative steps are allowed: integrating backward over a short interval
    // is how time symmetry of the scheme is checked.
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::contract(format!(
            "time step must be finite and nonzero, got {dt}"
        )));
    }
    Ok(())
}

/// One four-stage step of `d g / dt = -Ric(g)` (and `d phi / dt = theta`).
/// Every stage and the result are checked for positivity.
pub fn tensor_step(s: &FlowState, dt: f64) -> Result<FlowState> {
    check_step(s, dt, Formulation::Tensor)?;
    let r = &*s.reference;
    let t = s.t;
    let (k1g, k1p) = tensor_rates(r, t, &s.metric)?;
    let (k2g, k2p) = tensor_rates(r, t + 0.5 * dt, &axpy_mat(&s.metric, &k1g, 0.5 * dt))?;
    let (k3g, k3p) = tensor_rates(r, t + 0.5 * dt, &axpy_mat(&s.metric, &k2g, 0.5 * dt))?;
    let (k4g, k4p) = tensor_rates(r, t + dt, &axpy_mat(&s.metric, &k3g, dt))?;
    let metric: Vec<CMat> = rk4_combine(&s.metric, [&k1g, &k2g, &k3g, &k4g], dt)
        .iter()
        .map(CMat::symmetrized)
        .collect();
    let phi = rk4_combine(&s.phi, [&k1p, &k2p, &k3p, &k4p], dt);
    let t_new = t + dt;
    let ld = log_dets(&metric, t_new)?;
    let phidot = ld.iter().zip(&r.log_det0).map(|(a, b)| a - b).collect();
    Ok(FlowState {
        t: t_new,
        formulation: Formulation::Tensor,
        metric,
        phi,
        phidot,
        reference: s.reference.clone(),
    })
}

/// One four-stage step of the parabolic complex Monge-Ampere equation.
pub fn potential_step(s: &FlowState, dt: f64) -> Result<FlowState> {
    check_step(s, dt, Formulation::Potential)?;
    let r = &*s.reference;
    let t = s.t;
    // phidot of a state is exactly the first-stage rate.
    let k1 = &s.phidot;
    let k2 = potential_rates(r, t + 0.5 * dt, &axpy(&s.phi, k1, 0.5 * dt))?;
    let k3 = potential_rates(r, t + 0.5 * dt, &axpy(&s.phi, &k2, 0.5 * dt))?;
    let k4 = potential_rates(r, t + dt, &axpy(&s.phi, &k3, dt))?;
    let phi = rk4_combine(&s.phi, [k1, &k2, &k3, &k4], dt);
    let t_new = t + dt;
    let phidot = potential_rates(r, t_new, &phi)?;
    Ok(FlowState {
        t: t_new,
        formulation: Formulation::Potential,
        metric: Vec::new(),
        phi,
        phidot,
        reference: s.reference.clone(),
    })
}

/// Dispatches on the state's formulation.
pub fn step(s: &FlowState, dt: f64) -> Result<FlowState> {
    match s.formulation {
        Formulation::Tensor => tensor_step(s, dt),
        Formulation::Potential => potential_step(s, dt),
    }
}
