//! Uniform periodic grids on a complex torus and the grid form of the
//! Wirtinger stencils.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ComplexPoint, HermitianMatrix, MAX_DIM};
use crate::metric::MetricJet;
use crate::stencil;

/// A periodic lattice with one axis per real coordinate.
///
/// An axis of size 1 represents a direction along which every field on the
/// grid is invariant: derivatives along it vanish identically.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    shape: Vec<usize>,
    periods: Vec<f64>,
    strides: Vec<usize>,
    inv_h: Vec<f64>,
    len: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize, shape: Vec<usize>, periods: Vec<f64>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::contract(format!("grid dimension {n} outside 1..={MAX_DIM}")));
        }
        if shape.len() != 2 * n || periods.len() != 2 * n {
            return Err(Error::contract("grid needs one size and one period per real axis"));
        }
        if let Some(&s) = shape.iter().find(|&&s| s != 1 && s < 5) {
            return Err(Error::config(
                "torus.N",
                format!("grid axes need at least 5 points for the stencils (or exactly 1), got {s}"),
            ));
        }
        let mut strides = vec![1; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let inv_h = shape
            .iter()
            .zip(&periods)
            .map(|(&s, &l)| if s == 1 { 0.0 } else { s as f64 / l })
            .collect();
        let len = shape.iter().product();
        Ok(Self {
            n,
            shape,
            periods,
            strides,
            inv_h,
            len,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Smallest spacing over the resolved axes.
    pub fn min_spacing(&self) -> f64 {
        self.inv_h
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|v| 1.0 / v)
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_a 1 / h_a^2` over resolved axes.
    pub fn inv_spacing_sq_sum(&self) -> f64 {
        self.inv_h.iter().map(|v| v * v).sum()
    }

    /// Coordinate volume of one cell (unresolved axes contribute their period).
    pub fn cell_volume(&self) -> f64 {
        self.shape
            .iter()
            .zip(&self.periods)
            .map(|(&s, &l)| l / s as f64)
            .product()
    }

    fn unravel(&self, mut idx: usize) -> [usize; 2 * MAX_DIM] {
        let mut c = [0usize; 2 * MAX_DIM];
        for a in 0..self.shape.len() {
            c[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        c
    }

    pub fn point(&self, idx: usize) -> ComplexPoint {
        let c = self.unravel(idx);
        let real: Vec<f64> = (0..self.shape.len())
            .map(|a| c[a] as f64 * self.periods[a] / self.shape[a] as f64)
            .collect();
        ComplexPoint::from_real(&real).expect("grid dimension validated")
    }

    pub fn points(&self) -> Vec<ComplexPoint> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    #[inline]
    fn neighbor(&self, idx: usize, coords: &[usize], steps: &[(usize, i32)]) -> usize {
        let mut out = idx as isize;
        for &(axis, off) in steps {
            let s = self.shape[axis] as isize;
            let c = coords[axis] as isize;
            let moved = (c + off as isize).rem_euclid(s);
            out += (moved - c) * self.strides[axis] as isize;
        }
        out as usize
    }

    /// `d_i d_{jbar} f` of a real grid function at `idx`, as a Hermitian matrix.
    pub fn ddbar_scalar(&self, f: &[f64], idx: usize) -> CMat {
        let coords = self.unravel(idx);
        let mut sample = |steps: &[(usize, i32)]| -> Result<Complex64> {
            Ok(Complex64::new(f[self.neighbor(idx, &coords, steps)], 0.0))
        };
        let mut out = CMat::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = stencil::wirtinger_ddbar(&mut sample, i, j, &self.inv_h).expect("infallible sampler");
                out[(i, j)] = v;
                if i != j {
                    out[(j, i)] = v.conj();
                } else {
                    out[(i, i)] = Complex64::new(v.re, 0.0);
                }
            }
        }
        out
    }

    /// Complex Laplacian `g^{i jbar} d_i d_{jbar} f` at `idx`.
    pub fn laplacian(&self, ginv: &CMat, f: &[f64], idx: usize) -> f64 {
        (*ginv * self.ddbar_scalar(f, idx)).trace().re
    }

    /// Metric jet at `idx` from a grid of metric matrices.
    pub fn metric_jet(&self, g: &[CMat], idx: usize) -> Result<MetricJet> {
        let n = self.n;
        let coords = self.unravel(idx);
        let mut sample = |steps: &[(usize, i32)]| -> Result<CMat> { Ok(g[self.neighbor(idx, &coords, steps)]) };
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            d.push(stencil::wirtinger_d(&mut sample, i, &self.inv_h)?);
        }
        let mut ddbar = vec![vec![CMat::zeros(n); n]; n];
        for i in 0..n {
            for j in i..n {
                let v: CMat = stencil::wirtinger_ddbar(&mut sample, i, j, &self.inv_h)?;
                if i == j {
                    ddbar[i][i] = v.symmetrized();
                } else {
                    ddbar[j][i] = v.adjoint();
                    ddbar[i][j] = v;
                }
            }
        }
        MetricJet::new(HermitianMatrix::from_symmetrized(g[idx]), d, ddbar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_indexing_round_trips_through_points() {
        let g = PeriodicGrid::new(2, vec![8, 1, 6, 5], vec![1.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!(g.len(), 240);
        let p = g.point(g.len() - 1);
        assert!((p.z(0).re - 7.0 / 8.0).abs() < 1e-15);
        assert_eq!(p.z(0).im, 0.0);
        assert!((p.z(1).re - 2.5).abs() < 1e-15);
        assert!((p.z(1).im - 0.8).abs() < 1e-15);
        assert!((g.cell_volume() - (1.0 / 8.0) * 2.0 * 0.5 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_grids_too_small_for_stencils() {
        assert!(PeriodicGrid::new(1, vec![4, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn laplacian_of_cosine_is_fourth_order() {
        // d dbar cos(2 pi x) = -pi^2 cos(2 pi x); error should drop ~16x per halving.
        let err = |n: usize| {
            let grid = PeriodicGrid::new(1, vec![n, 1], vec![1.0, 1.0]).unwrap();
            let f: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
            (0..n)
                .map(|i| {
                    let exact = -PI * PI * f[i];
                    (grid.laplacian(&CMat::identity(1), &f, i) - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 > 14.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn invariant_axes_have_zero_derivatives() {
        let grid = PeriodicGrid::new(1, vec![1, 1], vec![1.0, 1.0]).unwrap();
        let dd = grid.ddbar_scalar(&[3.0], 0);
        assert_eq!(dd[(0, 0)], Complex64::new(0.0, 0.0));
    }
}
