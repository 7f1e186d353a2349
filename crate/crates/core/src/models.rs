//! Closed-form model geometries: Hopf manifolds with their exact
//! Chern-Ricci flow line, and flat or perturbed complex tori.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ComplexPoint, HermitianMatrix, MAX_DIM};
use crate::metric::{Domain, MetricEvaluator, MetricField, MetricJet};

/// Hopf manifold `(C^n \ {0}) / (z ~ alpha z)` with `|alpha_1| = .. = |alpha_n|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopfModel {
    n: usize,
    alpha_modulus: f64,
}

impl HopfModel {
    pub fn new(n: usize, alpha_modulus: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::config("hopf.n", format!("must be in 2..={MAX_DIM}, got {n}")));
        }
        if !(alpha_modulus > 0.0 && alpha_modulus.is_finite()) || alpha_modulus == 1.0 {
            return Err(Error::config(
                "hopf.alpha",
                format!("|alpha| must be positive and different from 1, got {alpha_modulus}"),
            ));
        }
        Ok(Self { n, alpha_modulus })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha_modulus(&self) -> f64 {
        self.alpha_modulus
    }

    pub fn domain(&self) -> Domain {
        Domain::HopfAnnulus {
            n: self.n,
            alpha_modulus: self.alpha_modulus,
        }
    }

    /// Radii of the fundamental annulus, smaller first.
    pub fn annulus(&self) -> (f64, f64) {
        if self.alpha_modulus > 1.0 {
            (1.0, self.alpha_modulus)
        } else {
            (self.alpha_modulus, 1.0)
        }
    }

    /// Draws points with `r` uniform in the fundamental annulus and a
    /// direction uniform on the unit sphere.
    pub fn sample_points(&self, seed: u64, count: usize) -> Vec<ComplexPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r_lo, r_hi) = self.annulus();
        (0..count)
            .map(|_| {
                let r = rng.gen_range(r_lo..r_hi);
                let v: Vec<f64> = (0..2 * self.n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let real: Vec<f64> = v.iter().map(|x| r * x / norm).collect();
                ComplexPoint::from_real(&real).expect("dimension checked at construction")
            })
            .collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let singular_time = hopf_singular_time(self);
        if !(t >= 0.0) {
            return Err(Error::contract(format!("flow time must be nonnegative, got {t}")));
        }
        if t >= singular_time {
            return Err(Error::SingularTime { t, singular_time });
        }
        Ok(())
    }

    /// Exact `Ric^C(omega_H) = (n / r^2)(delta_{ij} - zbar_i z_j / r^2)`.
    pub fn ricci_form(&self, p: &ComplexPoint) -> HermitianMatrix {
        let r2 = p.r2();
        let n = self.n as f64;
        HermitianMatrix::from_symmetrized(CMat::from_fn(self.n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            (Complex64::new(delta, 0.0) - p.z(i).conj() * p.z(j) / r2) * (n / r2)
        }))
    }

    /// `d g(t) / dt`, which is `-Ric^C(omega_H)` for every `t`.
    pub fn time_derivative(&self, p: &ComplexPoint) -> HermitianMatrix {
        self.ricci_form(p) * -1.0
    }

    /// `log det g(t)` in closed form: `(n-1) log(1 - nt) - n log r^2`.
    pub fn log_det(&self, t: f64, p: &ComplexPoint) -> f64 {
        let n = self.n as f64;
        (n - 1.0) * (1.0 - n * t).ln() - n * p.r2().ln()
    }

    /// `Vol(g(t))` on the fundamental annulus with volume form `omega^n / n!`.
    pub fn volume(&self, t: f64) -> f64 {
        let n = self.n as f64;
        let sphere = 2.0 * PI.powi(self.n as i32) / factorial(self.n - 1);
        2f64.powi(self.n as i32) * (1.0 - n * t).powf(n - 1.0) * sphere * self.alpha_modulus.ln().abs()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Metric of the exact flow `omega(t) = omega_H - t Ric^C(omega_H)`,
/// `g_{i jbar} = (1 - nt) delta_{ij} / r^2 + nt zbar_i z_j / r^4`.
#[derive(Clone, Debug)]
pub struct HopfFlowMetric {
    model: HopfModel,
    domain: Domain,
    t: f64,
}

impl HopfFlowMetric {
    pub fn time(&self) -> f64 {
        self.t
    }

    fn coefficients(&self) -> (f64, f64) {
        let nt = self.model.n as f64 * self.t;
        (1.0 - nt, nt)
    }
}

impl MetricEvaluator for HopfFlowMetric {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric(&self, p: &ComplexPoint) -> Result<HermitianMatrix> {
        let (c, s) = self.coefficients();
        let r2 = p.r2();
        let r4 = r2 * r2;
        Ok(HermitianMatrix::from_symmetrized(CMat::from_fn(
            self.model.n,
            |a, b| {
                let delta = if a == b { c / r2 } else { 0.0 };
                Complex64::new(delta, 0.0) + p.z(a).conj() * p.z(b) * (s / r4)
            },
        )))
    }

    fn closed_form_jet(&self, p: &ComplexPoint) -> Option<Result<MetricJet>> {
        let n = self.model.n;
        let (c, s) = self.coefficients();
        let r2 = p.r2();
        let (rm4, rm6, rm8) = (r2.powi(-2), r2.powi(-3), r2.powi(-4));
        let z = |k: usize| p.z(k);
        let zb = |k: usize| p.z(k).conj();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let g = match self.metric(p) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let d: Vec<CMat> = (0..n)
            .map(|i| {
                CMat::from_fn(n, |a, b| {
                    zb(i) * (-c * delta(a, b) * rm4)
                        + s * (zb(a) * delta(i, b) * rm4 - zb(a) * z(b) * zb(i) * (2.0 * rm6))
                })
            })
            .collect();
        let ddbar: Vec<Vec<CMat>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        CMat::from_fn(n, |a, b| {
                            let flat = (Complex64::new(delta(i, j) * rm4, 0.0) - zb(i) * z(j) * (2.0 * rm6))
                                * (-c * delta(a, b));
                            let cross = Complex64::new(delta(a, j) * delta(i, b) * rm4, 0.0)
                                - zb(a) * z(j) * (2.0 * delta(i, b) * rm6)
                                - (z(b) * zb(i) * delta(a, j) + zb(a) * z(b) * delta(i, j)) * (2.0 * rm6)
                                + zb(a) * z(b) * zb(i) * z(j) * (6.0 * rm8);
                            flat + cross * s
                        })
                    })
                    .collect()
            })
            .collect();
        Some(MetricJet::new(g, d, ddbar))
    }

    fn closed_form_log_det_hessian(&self, p: &ComplexPoint) -> Option<Result<CMat>> {
        Some(Ok(self.model.ricci_form(p).into_cmat() * -1.0))
    }
}

/// The standard Hopf metric `omega_H = (delta_{ij} / r^2) sqrt(-1) dz^i ^ dzbar^j`.
pub fn hopf_metric(m: &HopfModel) -> MetricField {
    MetricField::closed_form(Arc::new(HopfFlowMetric {
        model: *m,
        domain: m.domain(),
        t: 0.0,
    }))
}

/// The exact flow line `omega_H - t Ric^C(omega_H)`, defined for `0 <= t < 1/n`.
pub fn hopf_exact_flow(m: &HopfModel, t: f64) -> Result<MetricField> {
    m.check_time(t)?;
    Ok(MetricField::closed_form(Arc::new(HopfFlowMetric {
        model: *m,
        domain: m.domain(),
        t,
    })))
}

/// Chern scalar curvature along the exact flow, `(n - 1) / (1/n - t)`.
pub fn hopf_exact_scalar(m: &HopfModel, t: f64) -> Result<f64> {
    m.check_time(t)?;
    let n = m.n as f64;
    Ok((n - 1.0) / (1.0 / n - t))
}

/// The singular time `1/n` of the exact flow.
pub fn hopf_singular_time(m: &HopfModel) -> f64 {
    1.0 / m.n as f64
}

/// `max |alpha_i conj(alpha_j) g_{i jbar}(alpha z) - g_{i jbar}(z)|`: how far
/// the metric is from descending through `z ~ alpha z`.
pub fn pullback_residual(g: &MetricField, alpha: &[Complex64], p: &ComplexPoint) -> Result<f64> {
    let n = g.dim();
    if alpha.len() != n {
        return Err(Error::contract("alpha must have one entry per coordinate"));
    }
    let coords: Vec<Complex64> = p.coords().iter().zip(alpha).map(|(z, a)| z * a).collect();
    let scaled = ComplexPoint::new(&coords)?;
    let g0 = g.metric(p)?;
    let g1 = g.metric(&scaled)?;
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pulled = alpha[i] * alpha[j].conj() * g1.get(i, j);
            r = r.max((pulled - g0.get(i, j)).norm());
        }
    }
    Ok(r)
}

/// One Fourier term `amplitude * cos(2 pi sum_m wave_m x_m / L_m + phase)`
/// added to entry `(row, col)` and, conjugated, to `(col, row)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationMode {
    pub row: usize,
    pub col: usize,
    pub amplitude: Complex64,
    pub phase: f64,
    /// Integer wave numbers, one per real axis `(x_1, y_1, x_2, y_2, ..)`.
    pub wave: Vec<i32>,
}

/// Flat torus `C^n / lattice` with metric `delta + eps A(z)`.
#[derive(Clone, Debug)]
pub struct TorusModel {
    n: usize,
    periods: Vec<f64>,
    epsilon: f64,
    modes: Vec<PerturbationMode>,
}

/// Upper bound on the lattice size used for the construction-time positivity check.
const POSITIVITY_CHECK_POINTS: usize = 1 << 16;

impl TorusModel {
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(n, vec![1.0; 2 * n], 0.0, Vec::new())
    }

    pub fn new(n: usize, periods: Vec<f64>, epsilon: f64, modes: Vec<PerturbationMode>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::config("torus.n", format!("must be in 1..={MAX_DIM}, got {n}")));
        }
        if periods.len() != 2 * n || periods.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::config("torus.period", "need one positive period per real axis"));
        }
        for (k, m) in modes.iter().enumerate() {
            if m.row >= n || m.col >= n {
                return Err(Error::config(format!("torus.mode.{k}"), "entry index out of range"));
            }
            if m.wave.len() != 2 * n {
                return Err(Error::config(
                    format!("torus.mode.{k}"),
                    format!("expected {} wave numbers", 2 * n),
                ));
            }
            if m.row == m.col && m.amplitude.im != 0.0 {
                return Err(Error::config(
                    format!("torus.mode.{k}"),
                    "diagonal amplitude must be real",
                ));
            }
        }
        let model = Self {
            n,
            periods,
            epsilon,
            modes,
        };
        model.check_positivity()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn modes(&self) -> &[PerturbationMode] {
        &self.modes
    }

    pub fn is_flat(&self) -> bool {
        self.epsilon == 0.0 || self.modes.is_empty()
    }

    pub fn domain(&self) -> Domain {
        Domain::Torus {
            n: self.n,
            periods: self.periods.clone(),
        }
    }

    /// Real axes along which the metric is invariant.
    pub fn invariant_axes(&self) -> Vec<bool> {
        (0..2 * self.n)
            .map(|a| self.is_flat() || self.modes.iter().all(|m| m.wave[a] == 0))
            .collect()
    }

    fn max_wave(&self, axis: usize) -> i32 {
        self.modes.iter().map(|m| m.wave[axis].abs()).max().unwrap_or(0)
    }

    fn check_positivity(&self) -> Result<()> {
        if self.is_flat() {
            return Ok(());
        }
        let invariant = self.invariant_axes();
        let active = invariant.iter().filter(|&&v| !v).count().max(1);
        let cap = (POSITIVITY_CHECK_POINTS as f64).powf(1.0 / active as f64).floor() as usize;
        let shape: Vec<usize> = (0..2 * self.n)
            .map(|a| {
                if invariant[a] {
                    1
                } else {
                    (8 * self.max_wave(a) as usize).max(16).min(cap.max(4))
                }
            })
            .collect();
        let total: usize = shape.iter().product();
        let mut coords = vec![0usize; shape.len()];
        for _ in 0..total {
            let real: Vec<f64> = coords
                .iter()
                .zip(&shape)
                .zip(&self.periods)
                .map(|((&c, &s), &l)| c as f64 * l / s as f64)
                .collect();
            let p = ComplexPoint::from_real(&real)?;
            let pos = self.metric_at(&p).positivity();
            if !pos.is_positive {
                return Err(Error::config(
                    "torus.perturbation",
                    format!(
                        "delta + eps A is not positive at {:?} (min eigenvalue {:e})",
                        p, pos.min_eigenvalue
                    ),
                ));
            }
            for (c, &s) in coords.iter_mut().zip(&shape) {
                *c += 1;
                if *c < s {
                    break;
                }
                *c = 0;
            }
        }
        Ok(())
    }

    fn phase_and_gradient(&self, m: &PerturbationMode, p: &ComplexPoint) -> (f64, Vec<Complex64>) {
        let mut theta = m.phase;
        let mut grad = vec![0.0; 2 * self.n];
        for a in 0..2 * self.n {
            let k = 2.0 * PI * m.wave[a] as f64 / self.periods[a];
            let x = if a % 2 == 0 { p.z(a / 2).re } else { p.z(a / 2).im };
            theta += k * x;
            grad[a] = k;
        }
        // kappa_i = d theta / d z_i = (theta_x - i theta_y) / 2
        let kappa = (0..self.n)
            .map(|i| Complex64::new(0.5 * grad[2 * i], -0.5 * grad[2 * i + 1]))
            .collect();
        (theta, kappa)
    }

    fn add_mode(&self, out: &mut CMat, m: &PerturbationMode, value: Complex64) {
        out[(m.row, m.col)] += m.amplitude * value * self.epsilon;
        if m.row != m.col {
            out[(m.col, m.row)] += m.amplitude.conj() * value.conj() * self.epsilon;
        }
    }

    fn metric_at(&self, p: &ComplexPoint) -> HermitianMatrix {
        let mut g = CMat::identity(self.n);
        for m in &self.modes {
            let (theta, _) = self.phase_and_gradient(m, p);
            self.add_mode(&mut g, m, Complex64::new(theta.cos(), 0.0));
        }
        HermitianMatrix::from_symmetrized(g)
    }
}

/// [`TorusModel`] packaged as a metric evaluator.
#[derive(Clone, Debug)]
pub struct TorusMetric {
    model: TorusModel,
    domain: Domain,
}

impl TorusMetric {
    pub fn model(&self) -> &TorusModel {
        &self.model
    }
}

impl MetricEvaluator for TorusMetric {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric(&self, p: &ComplexPoint) -> Result<HermitianMatrix> {
        Ok(self.model.metric_at(p))
    }

    fn closed_form_jet(&self, p: &ComplexPoint) -> Option<Result<MetricJet>> {
        let n = self.model.n;
        let g = self.model.metric_at(p);
        let mut d = vec![CMat::zeros(n); n];
        let mut ddbar = vec![vec![CMat::zeros(n); n]; n];
        for m in &self.model.modes {
            let (theta, kappa) = self.model.phase_and_gradient(m, p);
            let (s, c) = theta.sin_cos();
            for i in 0..n {
                // d_i cos(theta) = -sin(theta) kappa_i
                let di = -s * kappa[i];
                let mut block = CMat::zeros(n);
                block[(m.row, m.col)] += m.amplitude * di * self.model.epsilon;
                if m.row != m.col {
                    // d_i of conj(a) cos(theta): the cosine is real, so only the amplitude conjugates.
                    block[(m.col, m.row)] += m.amplitude.conj() * di * self.model.epsilon;
                }
                d[i] += block;
                for j in 0..n {
                    // d_i d_jbar cos(theta) = -cos(theta) kappa_i conj(kappa_j)
                    let dij = -c * kappa[i] * kappa[j].conj();
                    let mut block = CMat::zeros(n);
                    block[(m.row, m.col)] += m.amplitude * dij * self.model.epsilon;
                    if m.row != m.col {
                        block[(m.col, m.row)] += m.amplitude.conj() * dij * self.model.epsilon;
                    }
                    ddbar[i][j] += block;
                }
            }
        }
        Some(MetricJet::new(g, d, ddbar))
    }
}

/// Torus metric with closed-form derivatives.
pub fn torus_metric(m: &TorusModel) -> MetricField {
    MetricField::closed_form(torus_evaluator(m))
}

pub(crate) fn torus_evaluator(m: &TorusModel) -> Arc<TorusMetric> {
    Arc::new(TorusMetric {
        domain: m.domain(),
        model: m.clone(),
    })
}
