//! Fourth-order central Wirtinger stencils.
//!
//! Holomorphic derivatives are realized in the underlying real coordinates,
//! `d/dz = (d/dx - i d/dy) / 2` and `d/dzbar = (d/dx + i d/dy) / 2`, with real
//! axis `2k` carrying `Re z_k` and axis `2k + 1` carrying `Im z_k`. The same
//! kernels drive both the meshfree evaluation around an arbitrary point and
//! the periodic grid operators: callers supply a sampler mapping a list of
//! `(axis, offset)` lattice steps to a value.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ComplexPoint};
use crate::metric::Domain;

/// Fourth-order central differences, written as differences of symmetric
/// pairs so that constant fields differentiate to exactly zero:
///
/// ```text
/// f'  ~ (8 (f(1) - f(-1)) - (f(2) - f(-2))) / 12h
/// f'' ~ (16 (f(1) + f(-1) - 2 f(0)) - (f(2) + f(-2) - 2 f(0))) / 12h^2
/// ```
const PAIR_WEIGHTS: [(i32, f64); 2] = [(1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const SECOND_WEIGHTS: [(i32, f64); 2] = [(1, 16.0 / 12.0), (2, -1.0 / 12.0)];

/// Values a stencil can combine: real-linear with multiplication by `i`.
pub trait Linear: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn mul_i(self) -> Self;
}

impl Linear for Complex64 {
    #[inline]
    fn mul_i(self) -> Self {
        Complex64::new(-self.im, self.re)
    }
}

impl Linear for CMat {
    #[inline]
    fn mul_i(self) -> Self {
        CMat::mul_i(&self)
    }
}

/// Derivative along one real axis. An inverse spacing of zero marks an axis
/// along which the sampled field is invariant.
#[inline]
pub(crate) fn real_first<T, F>(sample: &mut F, axis: usize, inv_h: f64) -> Result<T>
where
    T: Linear,
    F: FnMut(&[(usize, i32)]) -> Result<T>,
{
    let zero = sample(&[])? * 0.0;
    if inv_h == 0.0 {
        return Ok(zero);
    }
    let mut acc = zero;
    for &(off, w) in PAIR_WEIGHTS.iter() {
        acc = acc + (sample(&[(axis, off)])? - sample(&[(axis, -off)])?) * w;
    }
    Ok(acc * inv_h)
}

/// Second derivative along axes `a` and `b` (pure when `a == b`).
#[inline]
pub(crate) fn real_second<T, F>(sample: &mut F, a: usize, b: usize, inv_h: &[f64]) -> Result<T>
where
    T: Linear,
    F: FnMut(&[(usize, i32)]) -> Result<T>,
{
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let center = sample(&[])?;
    let zero = center * 0.0;
    if inv_h[a] == 0.0 || inv_h[b] == 0.0 {
        return Ok(zero);
    }
    if a == b {
        let mut acc = zero;
        for &(off, w) in SECOND_WEIGHTS.iter() {
            let pair = sample(&[(a, off)])? + sample(&[(a, -off)])?;
            acc = acc + (pair - center * 2.0) * w;
        }
        return Ok(acc * (inv_h[a] * inv_h[a]));
    }
    let mut acc = zero;
    for &(oa, wa) in PAIR_WEIGHTS.iter() {
        let mut inner = zero;
        for &(ob, wb) in PAIR_WEIGHTS.iter() {
            let plus = sample(&[(a, oa), (b, ob)])? - sample(&[(a, oa), (b, -ob)])?;
            let minus = sample(&[(a, -oa), (b, ob)])? - sample(&[(a, -oa), (b, -ob)])?;
            inner = inner + (plus - minus) * wb;
        }
        acc = acc + inner * wa;
    }
    Ok(acc * (inv_h[a] * inv_h[b]))
}

/// `d f / d z_i`.
#[inline]
pub(crate) fn wirtinger_d<T, F>(sample: &mut F, i: usize, inv_h: &[f64]) -> Result<T>
where
    T: Linear,
    F: FnMut(&[(usize, i32)]) -> Result<T>,
{
    let fx = real_first(sample, 2 * i, inv_h[2 * i])?;
    let fy = real_first(sample, 2 * i + 1, inv_h[2 * i + 1])?;
    Ok((fx - fy.mul_i()) * 0.5)
}

/// `d f / d zbar_i`.
#[inline]
pub(crate) fn wirtinger_dbar<T, F>(sample: &mut F, i: usize, inv_h: &[f64]) -> Result<T>
where
    T: Linear,
    F: FnMut(&[(usize, i32)]) -> Result<T>,
{
    let fx = real_first(sample, 2 * i, inv_h[2 * i])?;
    let fy = real_first(sample, 2 * i + 1, inv_h[2 * i + 1])?;
    Ok((fx + fy.mul_i()) * 0.5)
}

/// `d^2 f / d z_i d zbar_j`.
#[inline]
pub(crate) fn wirtinger_ddbar<T, F>(sample: &mut F, i: usize, j: usize, inv_h: &[f64]) -> Result<T>
where
    T: Linear,
    F: FnMut(&[(usize, i32)]) -> Result<T>,
{
    let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
    let xx = real_second(sample, xi, xj, inv_h)?;
    let yy = real_second(sample, yi, yj, inv_h)?;
    let xy = real_second(sample, xi, yj, inv_h)?;
    let yx = real_second(sample, yi, xj, inv_h)?;
    Ok((xx + yy + (xy - yx).mul_i()) * 0.25)
}

/// Step configuration for meshfree stencils.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    /// Real-coordinate step `h > 0`.
    pub h: f64,
    /// Combine steps `h` and `h/2` as `(16 D(h/2) - D(h)) / 15`.
    pub richardson: bool,
}

impl Stencil {
    pub fn new(h: f64) -> Self {
        Self { h, richardson: false }
    }

    pub fn with_richardson(h: f64) -> Self {
        Self { h, richardson: true }
    }

    pub(crate) fn validate(&self, domain: &Domain, p: &ComplexPoint) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::contract(format!(
                "stencil step must be positive, got {}",
                self.h
            )));
        }
        domain.check_stencil(p, 2.0 * std::f64::consts::SQRT_2 * self.h)
    }
}

/// Requested derivative order for [`wirtinger_derivatives`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Holomorphic and antiholomorphic partials of a field at one point.
#[derive(Clone, Debug)]
pub struct WirtingerJet<T> {
    pub value: T,
    /// `d_i f`.
    pub d: Vec<T>,
    /// `d_{ibar} f`.
    pub dbar: Vec<T>,
    /// `d_i d_{jbar} f`, indexed `[i][j]`; present for second order.
    pub ddbar: Option<Vec<Vec<T>>>,
}

fn jet_at_step<T, F>(f: &F, p: &ComplexPoint, h: f64, order: DerivativeOrder) -> Result<WirtingerJet<T>>
where
    T: Linear,
    F: Fn(&ComplexPoint) -> Result<T>,
{
    let n = p.dim();
    let inv_h = vec![1.0 / h; 2 * n];
    let mut sample = |steps: &[(usize, i32)]| {
        let mut q = *p;
        for &(axis, off) in steps {
            q = q.shifted(axis, off as f64 * h);
        }
        f(&q)
    };
    let value = sample(&[])?;
    let mut d = Vec::with_capacity(n);
    let mut dbar = Vec::with_capacity(n);
    for i in 0..n {
        d.push(wirtinger_d(&mut sample, i, &inv_h)?);
        dbar.push(wirtinger_dbar(&mut sample, i, &inv_h)?);
    }
    let ddbar = match order {
        DerivativeOrder::First => None,
        DerivativeOrder::Second => {
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    row.push(wirtinger_ddbar(&mut sample, i, j, &inv_h)?);
                }
                rows.push(row);
            }
            Some(rows)
        }
    };
    Ok(WirtingerJet { value, d, dbar, ddbar })
}

fn richardson<T: Linear>(coarse: T, fine: T) -> T {
    (fine * 16.0 - coarse) * (1.0 / 15.0)
}

/// Meshfree Wirtinger partials of `f` at `p` with fourth-order stencils,
/// optionally Richardson-extrapolated to sixth order.
pub fn wirtinger_derivatives<T, F>(
    f: F,
    p: &ComplexPoint,
    order: DerivativeOrder,
    stencil: Stencil,
    domain: &Domain,
) -> Result<WirtingerJet<T>>
where
    T: Linear,
    F: Fn(&ComplexPoint) -> Result<T>,
{
    domain.check_point(p)?;
    stencil.validate(domain, p)?;
    let coarse = jet_at_step(&f, p, stencil.h, order)?;
    if !stencil.richardson {
        return Ok(coarse);
    }
    let fine = jet_at_step(&f, p, 0.5 * stencil.h, order)?;
    let combine = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&c, &f)| richardson(c, f)).collect() };
    Ok(WirtingerJet {
        value: fine.value,
        d: combine(&coarse.d, &fine.d),
        dbar: combine(&coarse.dbar, &fine.dbar),
        ddbar: match (coarse.ddbar, fine.ddbar) {
            (Some(c), Some(f)) => Some(c.iter().zip(&f).map(|(a, b)| combine(a, b)).collect()),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn torus(n: usize) -> Domain {
        Domain::Torus {
            n,
            periods: vec![1.0; 2 * n],
        }
    }

    #[test]
    fn modulus_squared_first_partials() {
        let p = ComplexPoint::new(&[c(0.3, 0.1), c(-0.2, 0.4)]).unwrap();
        let f = |q: &ComplexPoint| Ok(Complex64::new(q.z(0).norm_sqr(), 0.0));
        let jet = wirtinger_derivatives(f, &p, DerivativeOrder::Second, Stencil::new(1e-2), &torus(2)).unwrap();
        // d_1 |z_1|^2 = zbar_1, dbar_1 |z_1|^2 = z_1, d_1 dbar_1 = 1
        assert!((jet.d[0] - c(0.3, -0.1)).norm() < 1e-13);
        assert!((jet.dbar[0] - c(0.3, 0.1)).norm() < 1e-13);
        assert!(jet.d[1].norm() < 1e-13);
        let dd = jet.ddbar.unwrap();
        assert!((dd[0][0] - c(1.0, 0.0)).norm() < 1e-10);
        assert!(dd[0][1].norm() < 1e-10);
    }

    #[test]
    fn constant_field_has_zero_partials() {
        let p = ComplexPoint::new(&[c(0.5, 0.5)]).unwrap();
        let jet = wirtinger_derivatives(
            |_| Ok(c(2.5, -1.0)),
            &p,
            DerivativeOrder::Second,
            Stencil::with_richardson(1e-2),
            &torus(1),
        )
        .unwrap();
        assert_eq!(jet.d[0], c(0.0, 0.0));
        assert_eq!(jet.dbar[0], c(0.0, 0.0));
        assert!(jet.ddbar.unwrap()[0][0].norm() < 1e-12);
    }

    #[test]
    fn log_r2_mixed_partial_matches_hand_oracle() {
        // -2 log r^2 has d_i dbar_j = -2 (delta_ij / r^2 - zbar_i z_j / r^4).
        let hopf = Domain::HopfAnnulus {
            n: 2,
            alpha_modulus: 2.0,
        };
        let f = |q: &ComplexPoint| Ok(c(-2.0 * q.r2().ln(), 0.0));
        let oracle = |p: &ComplexPoint, i: usize, j: usize| {
            let r2 = p.r2();
            let delta = if i == j { 1.0 } else { 0.0 };
            (c(delta / r2, 0.0) - p.z(i).conj() * p.z(j) / (r2 * r2)) * -2.0
        };
        for p in [
            ComplexPoint::new(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap(),
            ComplexPoint::new(&[c(0.7, -0.4), c(0.3, 1.1)]).unwrap(),
        ] {
            let jet =
                wirtinger_derivatives(f, &p, DerivativeOrder::Second, Stencil::with_richardson(1e-2), &hopf).unwrap();
            let dd = jet.ddbar.unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((dd[i][j] - oracle(&p, i, j)).norm() < 1e-9, "{i}{j}: {:?}", dd[i][j]);
                }
            }
        }
        // At z = (1, 0) the (1,1) entry vanishes exactly in the oracle.
        let p = ComplexPoint::new(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let dd = wirtinger_derivatives(f, &p, DerivativeOrder::Second, Stencil::with_richardson(1e-2), &hopf)
            .unwrap()
            .ddbar
            .unwrap();
        assert!(dd[0][0].norm() < 1e-9);
    }

    #[test]
    fn richardson_improves_accuracy() {
        let p = ComplexPoint::new(&[c(0.2, 0.1)]).unwrap();
        let f = |q: &ComplexPoint| {
            let x = q.z(0).re;
            Ok(c((2.0 * std::f64::consts::PI * x).cos(), 0.0))
        };
        let exact = -(std::f64::consts::PI.powi(2)) * (2.0 * std::f64::consts::PI * 0.2).cos();
        let plain = wirtinger_derivatives(f, &p, DerivativeOrder::Second, Stencil::new(2e-2), &torus(1)).unwrap();
        let rich = wirtinger_derivatives(
            f,
            &p,
            DerivativeOrder::Second,
            Stencil::with_richardson(2e-2),
            &torus(1),
        )
        .unwrap();
        let e_plain = (plain.ddbar.unwrap()[0][0].re - exact).abs();
        let e_rich = (rich.ddbar.unwrap()[0][0].re - exact).abs();
        assert!(e_rich < e_plain / 50.0, "{e_rich:e} vs {e_plain:e}");
    }

    #[test]
    fn hopf_stencil_near_origin_is_a_domain_error() {
        let hopf = Domain::HopfAnnulus {
            n: 2,
            alpha_modulus: 2.0,
        };
        let p = ComplexPoint::new(&[c(0.01, 0.0), c(0.0, 0.0)]).unwrap();
        let res = wirtinger_derivatives(
            |q: &ComplexPoint| Ok(c(q.r2(), 0.0)),
            &p,
            DerivativeOrder::First,
            Stencil::new(0.1),
            &hopf,
        );
        assert!(matches!(res, Err(Error::Domain(_))));
    }
}
