//! Metric fields: a Hermitian metric as a callable on a coordinate domain,
//! together with the derivative backend used to differentiate it.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ComplexPoint, HermitianMatrix};
use crate::stencil::{self, DerivativeOrder, Stencil};

/// Coordinate domain of a metric.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// `C^n` modulo a real lattice; `periods` holds one period per real axis.
    Torus { n: usize, periods: Vec<f64> },
    /// `(C^n \ {0}) / (z ~ alpha z)` with fundamental annulus `1 <= r < |alpha|`.
    HopfAnnulus { n: usize, alpha_modulus: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus { n, .. } | Domain::HopfAnnulus { n, .. } => *n,
        }
    }

    pub(crate) fn check_point(&self, p: &ComplexPoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::contract(format!(
                "point has dimension {} but the domain has dimension {}",
                p.dim(),
                self.dim()
            )));
        }
        if let Domain::HopfAnnulus { .. } = self {
            if !(p.r2() > 0.0) {
                return Err(Error::Domain("the origin is not part of a Hopf manifold".into()));
            }
        }
        Ok(())
    }

    /// A stencil of the given Euclidean radius must not approach the origin
    /// of a Hopf domain: the scaling identification only covers `C^n \ {0}`.
    pub(crate) fn check_stencil(&self, p: &ComplexPoint, radius: f64) -> Result<()> {
        match self {
            Domain::Torus { .. } => Ok(()),
            Domain::HopfAnnulus { .. } => {
                let r = p.r2().sqrt();
                if radius < 0.5 * r {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "stencil of radius {radius:e} at r = {r:e} reaches the excluded origin"
                    )))
                }
            }
        }
    }
}

/// Metric value with its first and mixed second Wirtinger derivatives.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g: HermitianMatrix,
    pub ginv: CMat,
    /// `d_i g`, one matrix per holomorphic direction.
    pub d: Vec<CMat>,
    /// `d_i d_{jbar} g`, indexed `[i][j]`.
    pub ddbar: Vec<Vec<CMat>>,
}

impl MetricJet {
    pub fn new(g: HermitianMatrix, d: Vec<CMat>, ddbar: Vec<Vec<CMat>>) -> Result<Self> {
        let n = g.dim();
        if d.len() != n || ddbar.len() != n || ddbar.iter().any(|row| row.len() != n) {
            return Err(Error::contract("metric jet has inconsistent dimensions"));
        }
        let ginv = g.inverse()?;
        Ok(Self { g, ginv, d, ddbar })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `d_{ibar} g`, which for a Hermitian field is the adjoint of `d_i g`.
    pub fn dbar(&self, i: usize) -> CMat {
        self.d[i].adjoint()
    }
}

/// A metric given pointwise on a domain.
pub trait MetricEvaluator: Send + Sync {
    fn domain(&self) -> &Domain;

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn metric(&self, p: &ComplexPoint) -> Result<HermitianMatrix>;

    /// Exact derivatives, when the model has them in closed form.
    fn closed_form_jet(&self, _p: &ComplexPoint) -> Option<Result<MetricJet>> {
        None
    }

    /// Exact `d_i d_{jbar} log det g`, when available.
    fn closed_form_log_det_hessian(&self, _p: &ComplexPoint) -> Option<Result<CMat>> {
        None
    }
}

/// How a [`MetricField`] obtains derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    ClosedForm,
    Stencil(Stencil),
}

/// Step used for the log-determinant route when a closed-form model has no
/// exact log-determinant Hessian, as a fraction of the smallest period.
const LOGDET_FALLBACK_STEP: f64 = 2e-3;

/// A metric together with a derivative backend.
#[derive(Clone)]
pub struct MetricField {
    evaluator: Arc<dyn MetricEvaluator>,
    mode: DerivativeMode,
}

impl MetricField {
    pub fn new(evaluator: Arc<dyn MetricEvaluator>, mode: DerivativeMode) -> Self {
        Self { evaluator, mode }
    }

    pub fn closed_form(evaluator: Arc<dyn MetricEvaluator>) -> Self {
        Self::new(evaluator, DerivativeMode::ClosedForm)
    }

    pub fn stencil(evaluator: Arc<dyn MetricEvaluator>, stencil: Stencil) -> Self {
        Self::new(evaluator, DerivativeMode::Stencil(stencil))
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> Self {
        Self {
            evaluator: Arc::clone(&self.evaluator),
            mode,
        }
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn domain(&self) -> &Domain {
        self.evaluator.domain()
    }

    pub fn dim(&self) -> usize {
        self.evaluator.dim()
    }

    pub fn evaluator(&self) -> &Arc<dyn MetricEvaluator> {
        &self.evaluator
    }

    pub fn metric(&self, p: &ComplexPoint) -> Result<HermitianMatrix> {
        self.domain().check_point(p)?;
        self.evaluator.metric(p)
    }

    pub fn jet(&self, p: &ComplexPoint) -> Result<MetricJet> {
        self.domain().check_point(p)?;
        match self.mode {
            DerivativeMode::ClosedForm => self.evaluator.closed_form_jet(p).unwrap_or_else(|| {
                Err(Error::contract(
                    "closed-form derivatives requested from a metric without them",
                ))
            }),
            DerivativeMode::Stencil(st) => {
                let eval = |q: &ComplexPoint| self.evaluator.metric(q).map(HermitianMatrix::into_cmat);
                let jet = stencil::wirtinger_derivatives(eval, p, DerivativeOrder::Second, st, self.domain())?;
                let g = HermitianMatrix::new(jet.value)?;
                let ddbar = jet.ddbar.expect("second-order jet");
                MetricJet::new(g, jet.d, ddbar)
            }
        }
    }

    /// `d_i d_{jbar} log det g`.
    pub fn log_det_hessian(&self, p: &ComplexPoint) -> Result<CMat> {
        self.domain().check_point(p)?;
        let st = match self.mode {
            DerivativeMode::ClosedForm => {
                if let Some(h) = self.evaluator.closed_form_log_det_hessian(p) {
                    return h;
                }
                Stencil::with_richardson(LOGDET_FALLBACK_STEP * self.length_scale())
            }
            DerivativeMode::Stencil(st) => st,
        };
        let n = self.dim();
        let log_det =
            |q: &ComplexPoint| -> Result<Complex64> { Ok(Complex64::new(self.evaluator.metric(q)?.log_det()?, 0.0)) };
        let jet = stencil::wirtinger_derivatives(log_det, p, DerivativeOrder::Second, st, self.domain())?;
        let dd = jet.ddbar.expect("second-order jet");
        Ok(CMat::from_fn(n, |i, j| dd[i][j]))
    }

    fn length_scale(&self) -> f64 {
        match self.domain() {
            Domain::Torus { periods, .. } => periods.iter().copied().fold(f64::INFINITY, f64::min),
            Domain::HopfAnnulus { .. } => 1.0,
        }
    }
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("domain", self.domain())
            .field("mode", &self.mode)
            .finish()
    }
}

type MetricFn = dyn Fn(&ComplexPoint) -> Result<HermitianMatrix> + Send + Sync;

/// A metric given only by a closure; differentiable by stencils.
pub struct ClosureMetric {
    domain: Domain,
    f: Box<MetricFn>,
}

impl ClosureMetric {
    pub fn new(domain: Domain, f: impl Fn(&ComplexPoint) -> Result<HermitianMatrix> + Send + Sync + 'static) -> Self {
        Self { domain, f: Box::new(f) }
    }
}

impl MetricEvaluator for ClosureMetric {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric(&self, p: &ComplexPoint) -> Result<HermitianMatrix> {
        (self.f)(p)
    }
}
