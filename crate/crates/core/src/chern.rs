//! Chern connection, curvature, Ricci form, scalar curvature and torsion.
//!
//! All quantities are computed from a [`MetricJet`], so the closed-form and
//! stencil backends share one code path. In local holomorphic coordinates
//!
//! ```text
//! Gamma^k_{ij}   = g^{k lbar} d_i g_{j lbar}
//! R_{i jbar k}^l = -d_{jbar} Gamma^l_{ik}
//! Ric_{i jbar}   = R_{i jbar k}^k = -d_i d_{jbar} log det g
//! R              = g^{i jbar} Ric_{i jbar}
//! T^k_{ij}       = Gamma^k_{ij} - Gamma^k_{ji}
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{trace_and_norm_with_inverse, CMat, ComplexPoint, HermitianMatrix};
use crate::metric::{MetricField, MetricJet};

/// Relative Hermitian-symmetry tolerance applied before symmetrizing a Ricci form.
pub const RICCI_SYMMETRY_TOL: f64 = 1e-6;

/// Relative tolerance on the imaginary part of the scalar curvature.
pub const SCALAR_REALITY_TOL: f64 = 1e-8;

/// Which algebraic route produces the Chern-Ricci form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RicciMethod {
    /// Contract the full curvature tensor over its last two slots.
    Trace,
    /// Differentiate `log det g` twice.
    LogDet,
}

/// Connection coefficients `Gamma^k_{ij}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl Connection {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Gamma^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.coeffs[(i * self.n + j) * self.n + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Curvature `R_{i jbar k}^l`, stored as one matrix in `(k, l)` per `(i, j)`.
#[derive(Clone, Debug)]
pub struct Curvature {
    n: usize,
    blocks: Vec<CMat>,
    g: CMat,
}

impl Curvature {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `R_{i jbar k}^l`.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.blocks[i * self.n + j][(k, l)]
    }

    /// `R_{i jbar k lbar} = g_{m lbar} R_{i jbar k}^m`.
    pub fn lowered(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        (0..self.n)
            .map(|m| self.blocks[i * self.n + j][(k, m)] * self.g[(m, l)])
            .sum()
    }

    /// `max |R_{i jbar k lbar} - conj(R_{j ibar l kbar})|`.
    pub fn conjugate_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = self.lowered(i, j, k, l);
                        let b = self.lowered(j, i, l, k).conj();
                        r = r.max((a - b).norm());
                    }
                }
            }
        }
        r
    }

    /// Trace over the last two slots, `R_{i jbar k}^k`.
    pub fn ricci_trace(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self.blocks[i * self.n + j].trace())
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.max_abs()))
    }
}

/// Torsion `T^k_{ij}` with its trace `T^p_{kp}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Torsion {
    n: usize,
    coeffs: Vec<Complex64>,
    trace: Vec<Complex64>,
}

impl Torsion {
    /// `T^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.coeffs[(i * self.n + j) * self.n + k]
    }

    /// `T^p_{kp}`, one entry per `k`.
    pub fn trace(&self) -> &[Complex64] {
        &self.trace
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |T^k_{ij} + T^k_{ji}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut r: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    r = r.max((self.get(k, i, j) + self.get(k, j, i)).norm());
                }
            }
        }
        r
    }
}

/// Every Chern quantity at one point.
#[derive(Clone, Debug)]
pub struct ChernPackage {
    pub gamma: Connection,
    pub curvature: Curvature,
    pub ricci: HermitianMatrix,
    pub scalar: f64,
    pub torsion: Torsion,
}

impl ChernPackage {
    pub fn torsion_trace(&self) -> &[Complex64] {
        self.torsion.trace()
    }
}

pub fn connection_from_jet(jet: &MetricJet) -> Connection {
    let n = jet.dim();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        let m = jet.d[i] * jet.ginv;
        for j in 0..n {
            for k in 0..n {
                coeffs[(i * n + j) * n + k] = m[(j, k)];
            }
        }
    }
    Connection { n, coeffs }
}

pub fn curvature_from_jet(jet: &MetricJet) -> Curvature {
    let n = jet.dim();
    let ginv = jet.ginv;
    let mut blocks = Vec::with_capacity(n * n);
    for i in 0..n {
        let di_ginv = jet.d[i] * ginv;
        for j in 0..n {
            // -d_{jbar}(d_i g g^{-1}) = -(d_i d_jbar g) g^{-1} + d_i g g^{-1} d_jbar g g^{-1}
            let block = di_ginv * jet.dbar(j) * ginv - jet.ddbar[i][j] * ginv;
            blocks.push(block);
        }
    }
    Curvature {
        n,
        blocks,
        g: *jet.g.as_cmat(),
    }
}

/// Chern-Ricci by contracting the curvature, before symmetrization.
pub(crate) fn ricci_trace_raw(jet: &MetricJet) -> CMat {
    let n = jet.dim();
    let ginv = jet.ginv;
    CMat::from_fn(n, |i, j| {
        let block = jet.d[i] * ginv * jet.dbar(j) * ginv - jet.ddbar[i][j] * ginv;
        block.trace()
    })
}

/// Chern-Ricci from a log-determinant Hessian, before symmetrization.
pub(crate) fn ricci_from_log_det_hessian(h: &CMat) -> CMat {
    -*h
}

fn symmetrize_ricci(m: CMat) -> Result<HermitianMatrix> {
    HermitianMatrix::checked(m, RICCI_SYMMETRY_TOL)
}

pub fn ricci_from_jet(jet: &MetricJet) -> Result<HermitianMatrix> {
    symmetrize_ricci(ricci_trace_raw(jet))
}

/// `R = g^{i jbar} Ric_{i jbar}`, checking that the imaginary part vanishes.
pub fn scalar_from(ginv: &CMat, ricci: &CMat) -> Result<f64> {
    let s = (*ginv * *ricci).trace();
    if s.im.abs() > SCALAR_REALITY_TOL * s.re.abs().max(1.0) {
        return Err(Error::contract(format!(
            "scalar curvature has imaginary residue {:e}",
            s.im
        )));
    }
    Ok(s.re)
}

pub fn torsion_from_connection(gamma: &Connection) -> Torsion {
    let n = gamma.n;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                coeffs[(i * n + j) * n + k] = gamma.get(k, i, j) - gamma.get(k, j, i);
            }
        }
    }
    let trace = (0..n)
        .map(|k| (0..n).map(|p| coeffs[(k * n + p) * n + p]).sum())
        .collect();
    Torsion { n, coeffs, trace }
}

/// `max |d_k g_{i jbar} - d_i g_{k jbar}|`, the size of `d omega`.
pub fn kahler_residual_from_jet(jet: &MetricJet) -> f64 {
    let n = jet.dim();
    let mut r: f64 = 0.0;
    for k in 0..n {
        for i in k + 1..n {
            for j in 0..n {
                r = r.max((jet.d[k][(i, j)] - jet.d[i][(k, j)]).norm());
            }
        }
    }
    r
}

/// Size of `d dbar omega`: the component antisymmetrized in `(k, i)` and `(l, j)`.
pub fn gauduchon_residual_from_jet(jet: &MetricJet) -> f64 {
    let n = jet.dim();
    let dd = &jet.ddbar;
    let mut r: f64 = 0.0;
    for k in 0..n {
        for i in k + 1..n {
            for l in 0..n {
                for j in l + 1..n {
                    let c = dd[k][l][(i, j)] - dd[i][l][(k, j)] - dd[k][j][(i, l)] + dd[i][j][(k, l)];
                    r = r.max(c.norm());
                }
            }
        }
    }
    r
}

pub fn chern_connection(g: &MetricField, p: &ComplexPoint) -> Result<Connection> {
    Ok(connection_from_jet(&g.jet(p)?))
}

pub fn chern_curvature(g: &MetricField, p: &ComplexPoint) -> Result<Curvature> {
    Ok(curvature_from_jet(&g.jet(p)?))
}

pub fn chern_ricci(g: &MetricField, p: &ComplexPoint, method: RicciMethod) -> Result<HermitianMatrix> {
    match method {
        RicciMethod::Trace => ricci_from_jet(&g.jet(p)?),
        RicciMethod::LogDet => {
            let gp = g.metric(p)?;
            gp.log_det()?;
            symmetrize_ricci(ricci_from_log_det_hessian(&g.log_det_hessian(p)?))
        }
    }
}

pub fn chern_scalar(g: &MetricField, p: &ComplexPoint) -> Result<f64> {
    let jet = g.jet(p)?;
    let ricci = ricci_trace_raw(&jet);
    scalar_from(&jet.ginv, &ricci)
}

pub fn torsion(g: &MetricField, p: &ComplexPoint) -> Result<Torsion> {
    Ok(torsion_from_connection(&chern_connection(g, p)?))
}

pub fn chern_package(g: &MetricField, p: &ComplexPoint) -> Result<ChernPackage> {
    let jet = g.jet(p)?;
    let gamma = connection_from_jet(&jet);
    let curvature = curvature_from_jet(&jet);
    let raw = curvature.ricci_trace();
    let scalar = scalar_from(&jet.ginv, &raw)?;
    let ricci = symmetrize_ricci(raw)?;
    let torsion = torsion_from_connection(&gamma);
    Ok(ChernPackage {
        gamma,
        curvature,
        ricci,
        scalar,
        torsion,
    })
}

/// `|Ric|^2_g` at a point from a jet.
pub fn ricci_norm_sq(jet: &MetricJet, ricci: &HermitianMatrix) -> f64 {
    trace_and_norm_with_inverse(&jet.ginv, ricci.as_cmat()).1
}

/// `(sup |d omega|, sup |d dbar omega|)` over a set of sample points.
pub fn kahler_gauduchon_residuals(g: &MetricField, points: &[ComplexPoint]) -> Result<(f64, f64)> {
    let mut kahler: f64 = 0.0;
    let mut gauduchon: f64 = 0.0;
    for p in points {
        let jet = g.jet(p)?;
        kahler = kahler.max(kahler_residual_from_jet(&jet));
        gauduchon = gauduchon.max(gauduchon_residual_from_jet(&jet));
    }
    Ok((kahler, gauduchon))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric::{ClosureMetric, Domain};
    use crate::stencil::Stencil;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flat(n: usize) -> MetricField {
        let dom = Domain::Torus {
            n,
            periods: vec![1.0; 2 * n],
        };
        MetricField::stencil(
            Arc::new(ClosureMetric::new(dom, move |_| Ok(HermitianMatrix::identity(n)))),
            Stencil::new(1e-2),
        )
    }

    #[test]
    fn flat_metric_has_vanishing_package() {
        for n in 1..=3 {
            let g = flat(n);
            let p = ComplexPoint::new(&vec![c(0.3, 0.7); n]).unwrap();
            let pkg = chern_package(&g, &p).unwrap();
            assert_eq!(pkg.gamma.max_abs(), 0.0);
            assert_eq!(pkg.curvature.max_abs(), 0.0);
            assert_eq!(pkg.ricci.as_cmat().max_abs(), 0.0);
            assert_eq!(pkg.scalar, 0.0);
            assert_eq!(pkg.torsion.max_abs(), 0.0);
            let logdet = chern_ricci(&g, &p, RicciMethod::LogDet).unwrap();
            assert_eq!(logdet.as_cmat().max_abs(), 0.0);
            assert_eq!(kahler_gauduchon_residuals(&g, &[p]).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn one_dimensional_torsion_vanishes() {
        let dom = Domain::Torus {
            n: 1,
            periods: vec![1.0, 1.0],
        };
        let g = MetricField::stencil(
            Arc::new(ClosureMetric::new(dom, |p| {
                let x = p.z(0).re;
                Ok(HermitianMatrix::from_real_diagonal(&[1.0 + 0.3 * (6.0 * x).sin()]))
            })),
            Stencil::new(1e-3),
        );
        let t = torsion(&g, &ComplexPoint::new(&[c(0.2, 0.4)]).unwrap()).unwrap();
        assert_eq!(t.max_abs(), 0.0);
    }

    #[test]
    fn conformal_flat_surface_is_not_kahler() {
        // e^u delta with nonconstant u in n = 2 has d omega = du ^ omega != 0.
        let dom = Domain::Torus {
            n: 2,
            periods: vec![1.0; 4],
        };
        let g = MetricField::stencil(
            Arc::new(ClosureMetric::new(dom, |p| {
                let u = 0.2 * (2.0 * std::f64::consts::PI * p.z(1).re).cos();
                Ok(HermitianMatrix::from_real_diagonal(&[u.exp(), u.exp()]))
            })),
            Stencil::with_richardson(1e-3),
        );
        let p = ComplexPoint::new(&[c(0.1, 0.2), c(0.13, 0.4)]).unwrap();
        let (kahler, _) = kahler_gauduchon_residuals(&g, &[p]).unwrap();
        // oracle: |d_2 g_{11bar}| = |e^u u_x / 2|
        let x = 0.13;
        let u = 0.2 * (2.0 * std::f64::consts::PI * x).cos();
        let ux = -0.2 * 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).sin();
        assert!((kahler - (u.exp() * ux / 2.0).abs()).abs() < 1e-8);
        assert!(kahler > 0.1);
    }

    #[test]
    fn non_hermitian_ricci_is_rejected() {
        let m = CMat::from_fn(2, |i, j| c(i as f64, j as f64 + 1.0));
        assert!(symmetrize_ricci(m).is_err());
    }
}
