//! Run configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! # n = 1 torus with one Fourier mode
//! model = torus
//! formulation = both
//! torus.n = 1
//! torus.N = 64
//! torus.epsilon = 0.1
//! torus.mode.a = 0 0 1.0 0.0 0.0 1 0
//! dt = 1e-3
//! dt_min = 1e-7
//! t_end = 0.2
//! ```
//!
//! A mode line reads `row col amp_re amp_im phase k_1 .. k_2n`, adding
//! `eps * amp * cos(2 pi sum_a k_a x_a / L_a + phase)` to entry `(row, col)`
//! and its conjugate to `(col, row)`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, FlowProblem, Formulation, Reference, StepPolicy};
use crate::models::{HopfModel, PerturbationMode, TorusModel};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Hopf {
        n: usize,
        alpha: f64,
        samples: usize,
    },
    Torus {
        n: usize,
        points_per_axis: usize,
        periods: Vec<f64>,
        epsilon: f64,
        modes: Vec<PerturbationMode>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulationSpec {
    Tensor,
    Potential,
    /// Both grid formulations, cross-validated against each other.
    Both,
    /// Analytic stepping of the exact Hopf family.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub formulation: FormulationSpec,
    pub policy: StepPolicy,
    pub checkpoint_every: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// `C~` of the `Q2` diagnostic; derived from the run when absent.
    pub q_c_tilde: Option<f64>,
    pub q_b: f64,
    /// `|R|` threshold of the singular locus; derived from the run when absent.
    pub locus_threshold: Option<f64>,
    /// Blow-up fit window; the second half of the run when absent.
    pub fit_window: Option<(f64, f64)>,
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "formulation",
    "hopf.n",
    "hopf.alpha",
    "hopf.samples",
    "torus.n",
    "torus.N",
    "torus.period",
    "torus.epsilon",
    "dt",
    "dt_min",
    "t_end",
    "cfl",
    "tol.margin_factor",
    "checkpoint_every",
    "seed",
    "output.dir",
    "q.c_tilde",
    "q.b",
    "locus.threshold",
    "fit.window",
];

struct Entries {
    map: BTreeMap<String, String>,
    modes: Vec<(String, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut modes = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", no + 1), "expected `key = value`"))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if let Some(label) = key.strip_prefix("torus.mode.") {
                if label.is_empty() || modes.iter().any(|(l, _)| l == label) {
                    return Err(Error::config(key, "mode labels must be nonempty and unique"));
                }
                modes.push((label.to_string(), value));
                continue;
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(Self { map, modes })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::config(key, "missing"))
    }
}

fn parse_mode(label: &str, value: &str, n: usize) -> Result<PerturbationMode> {
    let field = format!("torus.mode.{label}");
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 5 + 2 * n {
        return Err(Error::config(
            field,
            format!("expected `row col amp_re amp_im phase` and {} wave numbers", 2 * n),
        ));
    }
    let bad = |what: &str, v: &str| Error::config(format!("torus.mode.{label}"), format!("bad {what} `{v}`"));
    let idx = |v: &str| v.parse::<usize>().map_err(|_| bad("index", v));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad("number", v));
    let wave = parts[5..]
        .iter()
        .map(|v| v.parse::<i32>().map_err(|_| bad("wave number", v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationMode {
        row: idx(parts[0])?,
        col: idx(parts[1])?,
        amplitude: Complex64::new(num(parts[2])?, num(parts[3])?),
        phase: num(parts[4])?,
        wave,
    })
}

fn parse_window(key: &str, v: &str) -> Result<(f64, f64)> {
    let (a, b) = v
        .split_once(':')
        .ok_or_else(|| Error::config(key, format!("expected `t_lo:t_hi`, got `{v}`")))?;
    let lo = a.trim().parse::<f64>().map_err(|e| Error::config(key, e.to_string()))?;
    let hi = b.trim().parse::<f64>().map_err(|e| Error::config(key, e.to_string()))?;
    if !(lo < hi) {
        return Err(Error::config(key, "need t_lo < t_hi"));
    }
    Ok((lo, hi))
}

/// Parses a `t_lo:t_hi` window.
pub fn parse_time_window(v: &str) -> Result<(f64, f64)> {
    parse_window("window", v)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let model_kind: String = e.required("model")?;
        let model = match model_kind.as_str() {
            "hopf" => {
                if !e.modes.is_empty() {
                    return Err(Error::config("torus.mode", "perturbation modes need model = torus"));
                }
                ModelSpec::Hopf {
                    n: e.required("hopf.n")?,
                    alpha: e.get("hopf.alpha")?.unwrap_or(2.0),
                    samples: e.get("hopf.samples")?.unwrap_or(64),
                }
            }
            "torus" => {
                let n: usize = e.get("torus.n")?.unwrap_or(1);
                if n == 0 {
                    return Err(Error::config("torus.n", "must be at least 1"));
                }
                let periods = match e.raw("torus.period") {
                    None => vec![1.0; 2 * n],
                    Some(v) => {
                        let ps = v
                            .split_whitespace()
                            .map(|x| {
                                x.parse::<f64>()
                                    .map_err(|err| Error::config("torus.period", err.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        match ps.len() {
                            1 => vec![ps[0]; 2 * n],
                            l if l == 2 * n => ps,
                            l => {
                                return Err(Error::config(
                                    "torus.period",
                                    format!("expected 1 or {} values, got {l}", 2 * n),
                                ))
                            }
                        }
                    }
                };
                let modes = e
                    .modes
                    .iter()
                    .map(|(l, v)| parse_mode(l, v, n))
                    .collect::<Result<Vec<_>>>()?;
                ModelSpec::Torus {
                    n,
                    points_per_axis: e.get("torus.N")?.unwrap_or(64),
                    periods,
                    epsilon: e.get("torus.epsilon")?.unwrap_or(0.0),
                    modes,
                }
            }
            other => {
                return Err(Error::config(
                    "model",
                    format!("expected `hopf` or `torus`, got `{other}`"),
                ))
            }
        };
        let formulation = match e.raw("formulation") {
            None => match model {
                ModelSpec::Hopf { .. } => FormulationSpec::ClosedForm,
                ModelSpec::Torus { .. } => FormulationSpec::Tensor,
            },
            Some("tensor") => FormulationSpec::Tensor,
            Some("potential") => FormulationSpec::Potential,
            Some("both") => FormulationSpec::Both,
            Some("closed_form") => FormulationSpec::ClosedForm,
            Some(other) => return Err(Error::config("formulation", format!("unknown formulation `{other}`"))),
        };
        let mut policy = StepPolicy::new(e.required("dt")?, e.required("dt_min")?, e.required("t_end")?);
        if let Some(cfl) = e.get("cfl")? {
            policy.cfl = cfl;
        }
        if let Some(m) = e.get("tol.margin_factor")? {
            policy.margin_factor = m;
        }
        let cfg = Self {
            model,
            formulation,
            policy,
            checkpoint_every: e.get("checkpoint_every")?.unwrap_or(0),
            seed: e.get("seed")?.unwrap_or(0),
            output_dir: e
                .get::<String>("output.dir")?
                .map_or_else(|| PathBuf::from("out"), PathBuf::from),
            q_c_tilde: e.get("q.c_tilde")?,
            q_b: e.get("q.b")?.unwrap_or(1.0),
            locus_threshold: e.get("locus.threshold")?,
            fit_window: e.raw("fit.window").map(|v| parse_window("fit.window", v)).transpose()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.model, self.formulation) {
            (ModelSpec::Torus { .. }, FormulationSpec::ClosedForm) => {
                return Err(Error::config("formulation", "closed_form requires model = hopf"))
            }
            (ModelSpec::Hopf { .. }, FormulationSpec::Tensor | FormulationSpec::Potential) => {
                return Err(Error::config(
                    "formulation",
                    "Hopf manifolds are only integrated in closed_form mode",
                ))
            }
            (ModelSpec::Hopf { .. }, FormulationSpec::Both) => {
                return Err(Error::config("formulation", "both requires model = torus"))
            }
            _ => {}
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.policy.dt0) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !positive(self.policy.dt_min) {
            return Err(Error::config("dt_min", "must be positive"));
        }
        if self.policy.dt_min >= self.policy.dt0 {
            return Err(Error::config(
                "dt_min",
                format!(
                    "must be smaller than dt ({} >= {})",
                    self.policy.dt_min, self.policy.dt0
                ),
            ));
        }
        if !positive(self.policy.t_end) {
            return Err(Error::config("t_end", "must be positive"));
        }
        if !positive(self.policy.cfl) {
            return Err(Error::config("cfl", "must be positive"));
        }
        if !positive(self.policy.margin_factor) {
            return Err(Error::config("tol.margin_factor", "must be positive"));
        }
        match &self.model {
            ModelSpec::Hopf { n, alpha, samples } => {
                if *samples == 0 {
                    return Err(Error::config("hopf.samples", "must be at least 1"));
                }
                HopfModel::new(*n, *alpha)?;
            }
            ModelSpec::Torus {
                n,
                points_per_axis,
                periods,
                epsilon,
                modes,
            } => {
                if *points_per_axis < 5 {
                    return Err(Error::config("torus.N", "need at least 5 points per axis"));
                }
                TorusModel::new(*n, periods.clone(), *epsilon, modes.clone())?;
            }
        }
        if let Some(c) = self.q_c_tilde {
            if !c.is_finite() {
                return Err(Error::config("q.c_tilde", "must be finite"));
            }
        }
        if let Some(th) = self.locus_threshold {
            if !positive(th) {
                return Err(Error::config("locus.threshold", "must be positive"));
            }
        }
        Ok(())
    }

    /// The flow runs this configuration asks for, labelled by formulation.
    pub fn flow_configs(&self) -> Result<Vec<(&'static str, FlowConfig)>> {
        let make = |problem| FlowConfig {
            problem,
            policy: self.policy,
            checkpoint_every: self.checkpoint_every,
        };
        match &self.model {
            ModelSpec::Hopf { n, alpha, samples } => {
                let model = HopfModel::new(*n, *alpha)?;
                let points = model.sample_points(self.seed, *samples);
                Ok(vec![(
                    "closed_form",
                    make(FlowProblem::HopfClosedForm { model, points }),
                )])
            }
            ModelSpec::Torus {
                n,
                points_per_axis,
                periods,
                epsilon,
                modes,
            } => {
                let model = TorusModel::new(*n, periods.clone(), *epsilon, modes.clone())?;
                let reference = Arc::new(Reference::from_model(&model, *points_per_axis)?);
                let grid = |formulation| FlowProblem::Grid {
                    reference: reference.clone(),
                    formulation,
                };
                Ok(match self.formulation {
                    FormulationSpec::Tensor => vec![("tensor", make(grid(Formulation::Tensor)))],
                    FormulationSpec::Potential => vec![("potential", make(grid(Formulation::Potential)))],
                    FormulationSpec::Both => vec![
                        ("tensor", make(grid(Formulation::Tensor))),
                        ("potential", make(grid(Formulation::Potential))),
                    ],
                    FormulationSpec::ClosedForm => unreachable!("rejected by validate"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = "model = torus\nformulation = both\ntorus.N = 16\ntorus.epsilon = 0.1\n\
                         torus.mode.a = 0 0 1 0 0 1 0\ndt = 1e-3\ndt_min = 1e-6\nt_end = 0.01\n";

    fn field_of(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_a_torus_run() {
        let c = RunConfig::parse(TORUS).unwrap();
        assert_eq!(c.formulation, FormulationSpec::Both);
        let ModelSpec::Torus { modes, periods, .. } = &c.model else {
            panic!()
        };
        assert_eq!(modes[0].wave, vec![1, 0]);
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert_eq!(periods, &vec![1.0, 1.0]);
        assert_eq!(c.flow_configs().unwrap().len(), 2);
    }

    #[test]
    fn validation_names_the_offending_field() {
        assert_eq!(
            field_of(RunConfig::parse(&TORUS.replace("dt_min = 1e-6", "dt_min = 1e-2"))),
            "dt_min"
        );
        assert_eq!(
            field_of(RunConfig::parse(&TORUS.replace("t_end = 0.01", "t_end = 0"))),
            "t_end"
        );
        assert_eq!(
            field_of(RunConfig::parse(
                &TORUS.replace("formulation = both", "formulation = closed_form")
            )),
            "formulation"
        );
        assert_eq!(field_of(RunConfig::parse(&format!("{TORUS}bogus = 1\n"))), "bogus");
        assert_eq!(
            field_of(RunConfig::parse(&TORUS.replace("dt = 1e-3", "dt = fast"))),
            "dt"
        );
        let hopf_both = "model = hopf\nhopf.n = 2\nformulation = both\ndt = 1e-3\ndt_min = 1e-6\nt_end = 1\n";
        assert_eq!(field_of(RunConfig::parse(hopf_both)), "formulation");
    }

    #[test]
    fn non_positive_perturbation_is_a_config_error() {
        let text = TORUS.replace("torus.epsilon = 0.1", "torus.epsilon = 1.5");
        assert_eq!(field_of(RunConfig::parse(&text)), "torus.perturbation");
    }
}
