use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::linalg::{cholesky_log_det, CMat, HermitianMatrix};
use crate::models::{torus_metric, TorusModel};

/// Which unknown a grid flow evolves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    /// The metric itself, `d g / dt = -Ric(g)`.
    Tensor,
    /// The potential of the parabolic complex Monge-Ampere equation,
    /// `d phi / dt = log det(alpha_t + d dbar phi) - log det g0`.
    Potential,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Tensor => "tensor",
            Formulation::Potential => "potential",
        }
    }
}

/// Frozen initial data shared by every state of a grid run.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub grid: PeriodicGrid,
    pub g0: Vec<CMat>,
    pub log_det0: Vec<f64>,
    /// `Ric(g0)` on the grid by the log-determinant route.
    pub ric0: Vec<CMat>,
}

impl Reference {
    pub fn new(grid: PeriodicGrid, g0: Vec<CMat>) -> Result<Self> {
        if g0.len() != grid.len() {
            return Err(Error::contract(format!(
                "initial metric has {} samples for a grid of {}",
                g0.len(),
                grid.len()
            )));
        }
        let g0: Vec<CMat> = g0.iter().map(CMat::symmetrized).collect();
        let log_det0 = log_dets(&g0, 0.0)?;
        let ric0 = (0..grid.len())
            .into_par_iter()
            .map(|idx| -grid.ddbar_scalar(&log_det0, idx))
            .collect();
        Ok(Self {
            grid,
            g0,
            log_det0,
            ric0,
        })
    }

    /// Samples a torus model on an `N`-point lattice along every axis the
    /// metric depends on; invariant axes collapse to a single point.
    pub fn from_model(model: &TorusModel, points_per_axis: usize) -> Result<Self> {
        let shape = model
            .invariant_axes()
            .iter()
            .map(|&inv| if inv { 1 } else { points_per_axis })
            .collect();
        let grid = PeriodicGrid::new(model.dim(), shape, model.periods().to_vec())?;
        let field = torus_metric(model);
        let g0 = grid
            .points()
            .iter()
            .map(|p| field.metric(p).map(HermitianMatrix::into_cmat))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, g0)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `alpha_t = g0 - t Ric(g0)` at one grid point.
    pub fn alpha(&self, t: f64, idx: usize) -> CMat {
        self.g0[idx] - self.ric0[idx] * t
    }
}

/// Time plus the evolved fields of a grid flow.
///
/// Both formulations carry the potential `phi` (`d phi / dt = theta`) and
/// `phidot = theta = log det g - log det g0`; the tensor formulation also
/// carries the metric grid, the potential one reconstructs it on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub formulation: Formulation,
    /// Metric samples (tensor formulation); empty for the potential one.
    pub metric: Vec<CMat>,
    pub phi: Vec<f64>,
    pub phidot: Vec<f64>,
    pub reference: Arc<Reference>,
}

impl FlowState {
    pub fn initial(reference: Arc<Reference>, formulation: Formulation) -> Self {
        let len = reference.len();
        let metric = match formulation {
            Formulation::Tensor => reference.g0.clone(),
            Formulation::Potential => Vec::new(),
        };
        Self {
            t: 0.0,
            formulation,
            metric,
            phi: vec![0.0; len],
            phidot: vec![0.0; len],
            reference,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.reference.grid
    }

    /// The metric grid `g(t)`: stored, or `alpha_t + d dbar phi`.
    pub fn metric_grid(&self) -> Vec<CMat> {
        match self.formulation {
            Formulation::Tensor => self.metric.clone(),
            Formulation::Potential => potential_metric(&self.reference, self.t, &self.phi),
        }
    }
}

pub(crate) fn potential_metric(reference: &Reference, t: f64, phi: &[f64]) -> Vec<CMat> {
    let grid = &reference.grid;
    (0..grid.len())
        .into_par_iter()
        .map(|idx| (reference.alpha(t, idx) + grid.ddbar_scalar(phi, idx)).symmetrized())
        .collect()
}

/// `log det` of a metric sample, or the positivity failure it exhibits.
pub(crate) fn checked_log_det(m: &CMat, t: f64, point: usize) -> Result<f64> {
    cholesky_log_det(m).ok_or_else(|| Error::PositivityLoss {
        t,
        point,
        min_eigenvalue: HermitianMatrix::from_symmetrized(m.symmetrized())
            .positivity()
            .min_eigenvalue,
    })
}

/// Pointwise log-determinants; the first failing point (in index order) is reported.
pub(crate) fn log_dets(metric: &[CMat], t: f64) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = metric
        .par_iter()
        .enumerate()
        .map(|(idx, m)| checked_log_det(m, t, idx))
        .collect();
    results.into_iter().collect()
}
