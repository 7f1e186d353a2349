use crate::error::{Error, Result};
use crate::flow::{monotone_tail, Trajectory, BLOWUP_TAIL};

/// Extremes of the scalar curvature along a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    pub t: Vec<f64>,
    pub sup_r: Vec<f64>,
    pub inf_r: Vec<f64>,
    /// `sup R` grew strictly over each of the final rows.
    pub monotone_tail: bool,
}

impl ScalarSeries {
    /// `(t, sup R)` pairs, the input of [`super::fit_blowup`].
    pub fn sup_pairs(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.sup_r.iter().copied()).collect()
    }

    /// How far `inf R` ever dropped below its initial value (zero if never).
    pub fn lower_bound_deficit(&self) -> f64 {
        let r0 = self.inf_r[0];
        self.inf_r.iter().fold(0.0, |d: f64, v| d.max(r0 - v))
    }
}

pub fn sup_scalar_series(tr: &Trajectory) -> Result<ScalarSeries> {
    if tr.rows.len() < 2 {
        return Err(Error::contract("scalar series needs at least 2 rows"));
    }
    Ok(ScalarSeries {
        t: tr.rows.iter().map(|r| r.t).collect(),
        sup_r: tr.rows.iter().map(|r| r.sup_r).collect(),
        inf_r: tr.rows.iter().map(|r| r.inf_r).collect(),
        monotone_tail: monotone_tail(&tr.rows, BLOWUP_TAIL),
    })
}
