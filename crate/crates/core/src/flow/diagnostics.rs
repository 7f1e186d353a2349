//! Per-step diagnostics rows and the grid geometry behind them.

use std::io::Write;

use rayon::prelude::*;

use crate::chern::{gauduchon_residual_from_jet, kahler_residual_from_jet, ricci_norm_sq, scalar_from};
use crate::error::Result;
use crate::grid::PeriodicGrid;
use crate::linalg::{trace_and_norm_with_inverse, CMat, ComplexPoint, HermitianMatrix};
use crate::metric::MetricField;
use crate::models::{hopf_exact_flow, HopfModel};

use super::state::{log_dets, Reference};

/// Column names of the diagnostics CSV, in order.
pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "sup_R",
    "inf_R",
    "sup_ric_norm_sq",
    "min_eig",
    "sup_abs_phi",
    "sup_abs_phidot",
    "q1_min",
    "q1_max",
    "volume",
    "dbar_residual",
    "gauduchon_residual",
];

/// One row of per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub sup_r: f64,
    pub inf_r: f64,
    pub sup_ric_norm_sq: f64,
    pub min_eig: f64,
    pub sup_abs_phi: f64,
    pub sup_abs_phidot: f64,
    pub q1_min: f64,
    pub q1_max: f64,
    /// `int omega^n / n!`.
    pub volume: f64,
    pub dbar_residual: f64,
    pub gauduchon_residual: f64,
}

impl DiagnosticsRow {
    pub fn values(&self) -> [f64; 12] {
        [
            self.t,
            self.sup_r,
            self.inf_r,
            self.sup_ric_norm_sq,
            self.min_eig,
            self.sup_abs_phi,
            self.sup_abs_phidot,
            self.q1_min,
            self.q1_max,
            self.volume,
            self.dbar_residual,
            self.gauduchon_residual,
        ]
    }

    pub fn from_values(v: &[f64; 12]) -> Self {
        Self {
            t: v[0],
            sup_r: v[1],
            inf_r: v[2],
            sup_ric_norm_sq: v[3],
            min_eig: v[4],
            sup_abs_phi: v[5],
            sup_abs_phidot: v[6],
            q1_min: v[7],
            q1_max: v[8],
            volume: v[9],
            dbar_residual: v[10],
            gauduchon_residual: v[11],
        }
    }

    pub fn sup_abs_r(&self) -> f64 {
        self.sup_r.abs().max(self.inf_r.abs())
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes rows as CSV with the fixed header.
pub fn write_csv<W: Write>(mut out: W, rows: &[DiagnosticsRow]) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.values().iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Pointwise curvature of a metric grid, Ricci by the log-determinant route.
#[derive(Clone, Debug)]
pub struct GridGeometry {
    pub log_det: Vec<f64>,
    pub ginv: Vec<CMat>,
    pub ricci: Vec<CMat>,
    pub scalar: Vec<f64>,
    pub ricci_norm_sq: Vec<f64>,
}

pub fn grid_geometry(grid: &PeriodicGrid, metric: &[CMat], t: f64) -> Result<GridGeometry> {
    let log_det = log_dets(metric, t)?;
    let per_point: Vec<Result<(CMat, CMat, f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let ginv = metric[idx].inverse()?;
            let ric = (-grid.ddbar_scalar(&log_det, idx)).symmetrized();
            let scalar = scalar_from(&ginv, &ric)?;
            let norm = trace_and_norm_with_inverse(&ginv, &ric).1;
            Ok((ginv, ric, scalar, norm))
        })
        .collect();
    let mut geo = GridGeometry {
        log_det,
        ginv: Vec::with_capacity(grid.len()),
        ricci: Vec::with_capacity(grid.len()),
        scalar: Vec::with_capacity(grid.len()),
        ricci_norm_sq: Vec::with_capacity(grid.len()),
    };
    for r in per_point {
        let (ginv, ric, s, norm) = r?;
        geo.ginv.push(ginv);
        geo.ricci.push(ric);
        geo.scalar.push(s);
        geo.ricci_norm_sq.push(norm);
    }
    Ok(geo)
}

/// A diagnostics row with the pointwise data the step controller needs.
#[derive(Clone, Debug)]
pub(crate) struct Evaluation {
    pub row: DiagnosticsRow,
    pub scalar: Vec<f64>,
    /// Per point: smallest metric eigenvalue and its rate of decrease
    /// `v* Ric v` along the corresponding eigenvector.
    pub margins: Vec<(f64, f64)>,
}

fn extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn margin(g: &CMat, ric: &CMat) -> (f64, f64) {
    let (lambda, v) = HermitianMatrix::from_symmetrized(*g).min_eigenpair();
    let rate = HermitianMatrix::from_symmetrized(*ric).quadratic_form(&v);
    (lambda, rate)
}

pub(crate) fn evaluate_grid(reference: &Reference, t: f64, metric: &[CMat], phi: &[f64]) -> Result<Evaluation> {
    let grid = &reference.grid;
    let n = grid.dim();
    let geo = grid_geometry(grid, metric, t)?;
    let jets: Vec<Result<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let jet = grid.metric_jet(metric, idx)?;
            Ok((kahler_residual_from_jet(&jet), gauduchon_residual_from_jet(&jet)))
        })
        .collect();
    let mut dbar_residual: f64 = 0.0;
    let mut gauduchon_residual: f64 = 0.0;
    for r in jets {
        let (a, b) = r?;
        dbar_residual = dbar_residual.max(a);
        gauduchon_residual = gauduchon_residual.max(b);
    }
    let margins: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| margin(&metric[idx], &geo.ricci[idx]))
        .collect();
    let phidot: Vec<f64> = geo
        .log_det
        .iter()
        .zip(&reference.log_det0)
        .map(|(a, b)| a - b)
        .collect();
    let nt = n as f64 * t;
    let (q1_min, q1_max) = extremes(phidot.iter().zip(phi).map(|(pd, p)| t * pd - p - nt));
    let (inf_r, sup_r) = extremes(geo.scalar.iter().copied());
    let volume = 2f64.powi(n as i32) * grid.cell_volume() * geo.log_det.iter().map(|l| l.exp()).sum::<f64>();
    let row = DiagnosticsRow {
        t,
        sup_r,
        inf_r,
        sup_ric_norm_sq: geo.ricci_norm_sq.iter().copied().fold(0.0, f64::max),
        min_eig: margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min),
        sup_abs_phi: sup_abs(phi),
        sup_abs_phidot: sup_abs(&phidot),
        q1_min,
        q1_max,
        volume,
        dbar_residual,
        gauduchon_residual,
    };
    Ok(Evaluation {
        row,
        scalar: geo.scalar,
        margins,
    })
}

/// Closed-form potential along the exact Hopf flow,
/// `phi(t) = -((n-1)/n) ((1 - nt) log(1 - nt) + nt)`, spatially constant.
pub fn hopf_potential(model: &HopfModel, t: f64) -> f64 {
    let n = model.dim() as f64;
    let s = 1.0 - n * t;
    -(n - 1.0) / n * (s * s.ln() + n * t)
}

/// Scalar, `|Ric|^2`, `phidot`, margin, Kahler and Gauduchon residuals at one point.
type HopfPointData = (f64, f64, f64, (f64, f64), f64, f64);

pub(crate) fn evaluate_hopf(model: &HopfModel, t: f64, points: &[ComplexPoint]) -> Result<Evaluation> {
    let n = model.dim() as f64;
    let field: MetricField = hopf_exact_flow(model, t)?;
    let per_point: Vec<Result<HopfPointData>> = points
        .par_iter()
        .map(|p| {
            let jet = field.jet(p)?;
            let ric = crate::chern::chern_ricci(&field, p, crate::chern::RicciMethod::LogDet)?;
            let scalar = scalar_from(&jet.ginv, ric.as_cmat())?;
            let norm = ricci_norm_sq(&jet, &ric);
            let m = margin(jet.g.as_cmat(), ric.as_cmat());
            let phidot = model.log_det(t, p) - model.log_det(0.0, p);
            Ok((
                scalar,
                norm,
                phidot,
                m,
                kahler_residual_from_jet(&jet),
                gauduchon_residual_from_jet(&jet),
            ))
        })
        .collect();
    let mut scalar = Vec::with_capacity(points.len());
    let mut norms = Vec::with_capacity(points.len());
    let mut phidot = Vec::with_capacity(points.len());
    let mut margins = Vec::with_capacity(points.len());
    let mut dbar_residual: f64 = 0.0;
    let mut gauduchon_residual: f64 = 0.0;
    for r in per_point {
        let (s, norm, pd, m, k, g) = r?;
        scalar.push(s);
        norms.push(norm);
        phidot.push(pd);
        margins.push(m);
        dbar_residual = dbar_residual.max(k);
        gauduchon_residual = gauduchon_residual.max(g);
    }
    let phi = hopf_potential(model, t);
    let (q1_min, q1_max) = extremes(phidot.iter().map(|pd| t * pd - phi - n * t));
    let (inf_r, sup_r) = extremes(scalar.iter().copied());
    let row = DiagnosticsRow {
        t,
        sup_r,
        inf_r,
        sup_ric_norm_sq: norms.iter().copied().fold(0.0, f64::max),
        min_eig: margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min),
        sup_abs_phi: phi.abs(),
        sup_abs_phidot: sup_abs(&phidot),
        q1_min,
        q1_max,
        volume: model.volume(t),
        dbar_residual,
        gauduchon_residual,
    };
    Ok(Evaluation { row, scalar, margins })
}
