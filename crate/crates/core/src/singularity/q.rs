//! The auxiliary quantities `Q1 = t phidot - phi - nt` and
//! `Q2 = log tr_{g0} g - phi + 1/(phi + C~) + B Q1`, logged per checkpoint.

use crate::error::{Error, Result};
use crate::flow::{hopf_potential, FlowProblem, Snapshot, Trajectory};
use crate::linalg::trace_and_norms;
use crate::models::hopf_exact_flow;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QSeries {
    pub t: Vec<f64>,
    pub q1_min: Vec<f64>,
    pub q1_max: Vec<f64>,
    pub q2_min: Vec<f64>,
    pub q2_max: Vec<f64>,
}

impl QSeries {
    /// `(min, max)` of `Q1` over the whole run.
    pub fn q1_band(&self) -> (f64, f64) {
        (
            self.q1_min.iter().copied().fold(f64::INFINITY, f64::min),
            self.q1_max.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// Default `C~ = 2 + sup |phi|` projected from the determinant bound:
/// `|phi(t)| <= t sup|phidot(0)| + sup|R| t^2 / 2` over the run.
pub fn default_c_tilde(tr: &Trajectory) -> f64 {
    let t = tr.final_time();
    let phidot0 = tr.rows.first().map_or(0.0, |r| r.sup_abs_phidot);
    2.0 + t * phidot0 + 0.5 * tr.sup_abs_scalar() * t * t
}

struct Extremes {
    q1: (f64, f64),
    q2: (f64, f64),
}

fn fold(samples: impl Iterator<Item = Result<(f64, f64)>>) -> Result<Extremes> {
    let mut e = Extremes {
        q1: (f64::INFINITY, f64::NEG_INFINITY),
        q2: (f64::INFINITY, f64::NEG_INFINITY),
    };
    for s in samples {
        let (q1, q2) = s?;
        e.q1 = (e.q1.0.min(q1), e.q1.1.max(q1));
        e.q2 = (e.q2.0.min(q2), e.q2.1.max(q2));
    }
    Ok(e)
}

fn q_pair(t: f64, n: f64, phi: f64, phidot: f64, trace: f64, c_tilde: f64, b: f64) -> Result<(f64, f64)> {
    if phi + c_tilde < 1.0 {
        return Err(Error::config(
            "q.c_tilde",
            format!("phi + C~ = {} < 1 at t = {t}; increase C~", phi + c_tilde),
        ));
    }
    let q1 = t * phidot - phi - n * t;
    Ok((q1, trace.ln() - phi + 1.0 / (phi + c_tilde) + b * q1))
}

pub fn q_diagnostics(tr: &Trajectory, c_tilde: f64, b: f64) -> Result<QSeries> {
    let n = tr.problem.dim() as f64;
    let mut out = QSeries::default();
    for c in &tr.checkpoints {
        let e = match (c, &tr.problem) {
            (Snapshot::Grid(s), FlowProblem::Grid { .. }) => {
                let g = s.metric_grid();
                let r = &s.reference;
                fold((0..g.len()).map(|i| {
                    let trace = (r.g0[i].inverse()? * g[i]).trace().re;
                    q_pair(s.t, n, s.phi[i], s.phidot[i], trace, c_tilde, b)
                }))?
            }
            (Snapshot::Hopf { t }, FlowProblem::HopfClosedForm { model, points }) => {
                let field = hopf_exact_flow(model, *t)?;
                let base = hopf_exact_flow(model, 0.0)?;
                let phi = hopf_potential(model, *t);
                fold(points.iter().map(|p| {
                    let g0 = base.metric(p)?;
                    let g = field.metric(p)?;
                    let trace = trace_and_norms(&g0, &g)?.0;
                    let phidot = model.log_det(*t, p) - model.log_det(0.0, p);
                    q_pair(*t, n, phi, phidot, trace, c_tilde, b)
                }))?
            }
            _ => return Err(Error::contract("checkpoint kind does not match the problem")),
        };
        out.t.push(c.t());
        out.q1_min.push(e.q1.0);
        out.q1_max.push(e.q1.1);
        out.q2_min.push(e.q2.0);
        out.q2_max.push(e.q2.1);
    }
    Ok(out)
}
