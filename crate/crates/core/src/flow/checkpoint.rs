//! Self-describing text checkpoints of grid flow states.
//!
//! Every float is written with 17 significant digits, which round-trips
//! `f64` exactly, so `read(write(s)) == s` bit for bit.
//!
//! ```text
//! chernflow-checkpoint 1
//! formulation tensor
//! t 1.0000000000000000e-1
//! n 1
//! shape 64 1
//! periods 1.0000000000000000e0 1.0000000000000000e0
//! g0
//! <one line per point: re im of each entry, row-major>
//! ...
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::linalg::CMat;

use super::diagnostics::fmt_f64;
use super::state::{FlowState, Formulation, Reference};

const MAGIC: &str = "chernflow-checkpoint 1";

fn push_matrices(out: &mut String, name: &str, ms: &[CMat]) {
    let _ = writeln!(out, "{name}");
    for m in ms {
        let cells: Vec<String> = m.entries().flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)]).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

fn push_scalars(out: &mut String, name: &str, vs: &[f64]) {
    let _ = writeln!(out, "{name}");
    for v in vs {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
}

pub fn write_checkpoint(s: &FlowState) -> String {
    let r = &s.reference;
    let grid = &r.grid;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "formulation {}", s.formulation.name());
    let _ = writeln!(out, "t {}", fmt_f64(s.t));
    let _ = writeln!(out, "n {}", grid.dim());
    let shape: Vec<String> = grid.shape().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "shape {}", shape.join(" "));
    let periods: Vec<String> = grid.periods().iter().map(|v| fmt_f64(*v)).collect();
    let _ = writeln!(out, "periods {}", periods.join(" "));
    push_matrices(&mut out, "g0", &r.g0);
    push_scalars(&mut out, "log_det0", &r.log_det0);
    push_matrices(&mut out, "ric0", &r.ric0);
    if s.formulation == Formulation::Tensor {
        push_matrices(&mut out, "metric", &s.metric);
    }
    push_scalars(&mut out, "phi", &s.phi);
    push_scalars(&mut out, "phidot", &s.phidot);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::Parse("checkpoint ends early".into()))
    }

    fn header(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ if line == key => Ok(""),
            _ => Err(Error::Parse(format!("line {no}: expected `{key}`, found `{line}`"))),
        }
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next()?;
        let vs = parse_floats(line).map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
        if vs.len() != count {
            return Err(Error::Parse(format!(
                "line {no}: expected {count} values, found {}",
                vs.len()
            )));
        }
        Ok(vs)
    }

    fn matrices(&mut self, name: &str, n: usize, len: usize) -> Result<Vec<CMat>> {
        self.header(name)?;
        (0..len)
            .map(|_| {
                let v = self.floats(2 * n * n)?;
                Ok(CMat::from_fn(n, |i, j| {
                    let k = 2 * (i * n + j);
                    Complex64::new(v[k], v[k + 1])
                }))
            })
            .collect()
    }

    fn scalars(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        self.header(name)?;
        (0..len).map(|_| Ok(self.floats(1)?[0])).collect()
    }
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|e| format!("bad number `{v}`: {e}")))
        .collect()
}

pub fn read_checkpoint(text: &str) -> Result<FlowState> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(Error::Parse(format!("not a checkpoint (header `{magic}`)")));
    }
    let formulation = match lines.header("formulation")? {
        "tensor" => Formulation::Tensor,
        "potential" => Formulation::Potential,
        other => return Err(Error::Parse(format!("unknown formulation `{other}`"))),
    };
    let t = parse_floats(lines.header("t")?).map_err(Error::Parse)?;
    let n: usize = lines
        .header("n")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
    let shape = lines
        .header("shape")?
        .split_whitespace()
        .map(|v| v.parse::<usize>().map_err(|e| Error::Parse(format!("bad shape: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let periods = parse_floats(lines.header("periods")?).map_err(Error::Parse)?;
    if t.len() != 1 {
        return Err(Error::Parse("expected a single time".into()));
    }
    let grid = PeriodicGrid::new(n, shape, periods)?;
    let len = grid.len();
    let g0 = lines.matrices("g0", n, len)?;
    let log_det0 = lines.scalars("log_det0", len)?;
    let ric0 = lines.matrices("ric0", n, len)?;
    let metric = match formulation {
        Formulation::Tensor => lines.matrices("metric", n, len)?,
        Formulation::Potential => Vec::new(),
    };
    let phi = lines.scalars("phi", len)?;
    let phidot = lines.scalars("phidot", len)?;
    Ok(FlowState {
        t: t[0],
        formulation,
        metric,
        phi,
        phidot,
        reference: Arc::new(Reference {
            grid,
            g0,
            log_det0,
            ric0,
        }),
    })
}
