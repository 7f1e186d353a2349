//! Residual of the scalar-curvature evolution `dR/dt = Delta R + |Ric|^2`,
//! with the complex Laplacian `Delta f = g^{i jbar} d_i d_jbar f`.

use rayon::prelude::*;

use crate::chern::{chern_ricci, RicciMethod};
use crate::error::{Error, Result};
use crate::flow::hopf_scalar;
use crate::flow::{grid_geometry, richardson_time_derivative, FlowProblem, GridGeometry, Snapshot, Trajectory};
use crate::linalg::{trace_and_norms, ComplexPoint};
use crate::models::{hopf_exact_flow, HopfModel};

/// Relative tolerance for treating checkpoint spacings as equal.
const UNIFORM_TOL: f64 = 1e-9;

/// Relative spread of `R` over Hopf sample points tolerated before the
/// `Delta R = 0` shortcut is refused (roundoff grows near the singular time).
const SPREAD_TOL: f64 = 1e-6;

/// Fourth-order first-derivative weights (times `1/12h`) at node `j` of
/// five equally spaced nodes.
const FIVE_POINT: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

/// Weights of the time derivative at `times[k]`: fourth order on the five
/// nearest checkpoints when they are equally spaced (centred where
/// possible), otherwise the second-order three-point formula for uneven
/// spacing.
fn time_weights(times: &[f64], k: usize) -> Vec<(usize, f64)> {
    if times.len() >= 5 {
        let start = k.saturating_sub(2).min(times.len() - 5);
        let h = times[start + 1] - times[start];
        let uniform = (start..start + 4).all(|j| ((times[j + 1] - times[j]) - h).abs() <= UNIFORM_TOL * h.abs());
        if uniform {
            let w = &FIVE_POINT[k - start];
            return (0..5).map(|m| (start + m, w[m] / (12.0 * h))).collect();
        }
    }
    let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
    vec![
        (k - 1, -h1 / (h0 * (h0 + h1))),
        (k, (h1 - h0) / (h0 * h1)),
        (k + 1, h0 / (h1 * (h0 + h1))),
    ]
}

fn hopf_point_residual(model: &HopfModel, t: f64, delta: f64, p: &ComplexPoint) -> Result<(f64, f64)> {
    let rate = richardson_time_derivative(|s| hopf_scalar(model, s, p), t, delta)?;
    let field = hopf_exact_flow(model, t)?;
    let g = field.metric(p)?;
    let ric = chern_ricci(&field, p, RicciMethod::LogDet)?;
    let norm = trace_and_norms(&g, &ric)?.1;
    Ok((rate - norm, hopf_scalar(model, t, p)?))
}

/// Sup over the grid of `|dR/dt - Delta R - |Ric|^2|` at each interior checkpoint.
///
/// Grid trajectories take `dR/dt` by finite differences across checkpoints.
/// On the exact Hopf family `R` is spatially constant, so `Delta R = 0`
/// (the spread of `R` over the sample points is checked instead) and
/// `dR/dt` is differentiated in time at the checkpoint itself.
pub fn scalar_evolution_residual(tr: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if tr.checkpoints.len() < 3 {
        return Err(Error::contract(format!(
            "need at least 3 checkpoints, trajectory has {}",
            tr.checkpoints.len()
        )));
    }
    let times: Vec<f64> = tr.checkpoints.iter().map(Snapshot::t).collect();
    match &tr.problem {
        FlowProblem::Grid { .. } => {
            let geos: Vec<(GridGeometry, &crate::flow::FlowState)> = tr
                .checkpoints
                .iter()
                .map(|c| match c {
                    Snapshot::Grid(s) => Ok((grid_geometry(s.grid(), &s.metric_grid(), s.t)?, s)),
                    Snapshot::Hopf { .. } => Err(Error::contract("mixed checkpoint kinds")),
                })
                .collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(times.len() - 2);
            for k in 1..times.len() - 1 {
                let weights = time_weights(&times, k);
                let (geo, state) = &geos[k];
                let grid = state.grid();
                let res = (0..grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let rate: f64 = weights.iter().map(|&(j, w)| w * geos[j].0.scalar[i]).sum();
                        let lap = grid.laplacian(&geo.ginv[i], &geo.scalar, i);
                        (rate - lap - geo.ricci_norm_sq[i]).abs()
                    })
                    .collect::<Vec<f64>>()
                    .into_iter()
                    .fold(0.0, f64::max);
                out.push((times[k], res));
            }
            Ok(out)
        }
        FlowProblem::HopfClosedForm { model, points } => {
            let mut out = Vec::new();
            for &t in times.iter().filter(|&&t| t > 0.0) {
                let delta = crate::flow::hopf_time_step(model, t);
                let per_point: Vec<Result<(f64, f64)>> = points
                    .par_iter()
                    .map(|p| hopf_point_residual(model, t, delta, p))
                    .collect();
                let mut res: f64 = 0.0;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for r in per_point {
                    let (v, s) = r?;
                    res = res.max(v.abs());
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                if hi - lo > SPREAD_TOL * hi.abs().max(1.0) {
                    return Err(Error::contract(format!(
                        "scalar curvature varies over the sample points at t = {t} ({lo} to {hi})"
                    )));
                }
                out.push((t, res));
            }
            Ok(out)
        }
    }
}
