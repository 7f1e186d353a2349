use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::{fmt_f64, FlowProblem, Trajectory};

/// Points whose running `max |R|` exceeded a threshold during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct LocusMask {
    pub threshold: f64,
    /// Grid shape, or `[number of sample points]` for meshfree runs.
    pub shape: Vec<usize>,
    pub flags: Vec<bool>,
    /// First exceedance time, linearly interpolated between rows.
    pub first_exceedance: Vec<Option<f64>>,
}

impl LocusMask {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Key/value header, the flattened mask as rows of 64 `0`/`1` characters,
    /// then one `index time` line per flagged point.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "threshold = {}", fmt_f64(self.threshold));
        let shape: Vec<String> = self.shape.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "shape = {}", shape.join(" "));
        let _ = writeln!(s, "points = {}", self.flags.len());
        let _ = writeln!(s, "flagged = {}", self.count());
        let _ = writeln!(s, "[mask]");
        for chunk in self.flags.chunks(64) {
            let line: String = chunk.iter().map(|&f| if f { '1' } else { '0' }).collect();
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "[first_exceedance]");
        for (i, t) in self.first_exceedance.iter().enumerate() {
            if let Some(t) = t {
                let _ = writeln!(s, "{i} {}", fmt_f64(*t));
            }
        }
        s
    }
}

/// The empirical singular set: points where `|R|` rose above `threshold`.
pub fn singular_locus(tr: &Trajectory, threshold: f64) -> Result<LocusMask> {
    let first = tr
        .scalar_fields
        .first()
        .ok_or_else(|| Error::contract("trajectory has no scalar-curvature history"))?;
    let sup0 = first.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !(threshold > sup0) {
        return Err(Error::contract(format!(
            "threshold {threshold} must exceed the initial sup |R| = {sup0}"
        )));
    }
    if tr.scalar_fields.len() != tr.rows.len() {
        return Err(Error::contract("scalar-curvature history does not match the rows"));
    }
    let len = first.len();
    let mut first_exceedance = vec![None; len];
    for k in 1..tr.scalar_fields.len() {
        let (prev, cur) = (&tr.scalar_fields[k - 1], &tr.scalar_fields[k]);
        let (t0, t1) = (tr.rows[k - 1].t, tr.rows[k].t);
        for i in 0..len {
            if first_exceedance[i].is_some() {
                continue;
            }
            let (a, b) = (prev[i].abs(), cur[i].abs());
            if b > threshold {
                let frac = if b > a { (threshold - a) / (b - a) } else { 1.0 };
                first_exceedance[i] = Some(t0 + frac.clamp(0.0, 1.0) * (t1 - t0));
            }
        }
    }
    let shape = match &tr.problem {
        FlowProblem::Grid { reference, .. } => reference.grid.shape().to_vec(),
        FlowProblem::HopfClosedForm { points, .. } => vec![points.len()],
    };
    Ok(LocusMask {
        threshold,
        shape,
        flags: first_exceedance.iter().map(Option::is_some).collect(),
        first_exceedance,
    })
}
