//! Small dense complex matrices for pointwise Hermitian geometry.
//!
//! Every quantity the engine manipulates at a point is an `n x n` complex
//! matrix with `n <= MAX_DIM`, so matrices live inline on the stack. Entry
//! `(i, j)` of a metric matrix stores `g_{i jbar}`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 4;

/// Eigenvalues at or below this value do not count as positive.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Relative tolerance for accepting a closed-form matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point in local holomorphic coordinates `z_1 .. z_n`.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    n: usize,
    z: [Complex64; MAX_DIM],
}

impl ComplexPoint {
    pub fn new(coords: &[Complex64]) -> Result<Self> {
        let n = coords.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::contract(format!(
                "complex dimension must be in 1..={MAX_DIM}, got {n}"
            )));
        }
        let mut z = [ZERO; MAX_DIM];
        z[..n].copy_from_slice(coords);
        Ok(Self { n, z })
    }

    /// Builds a point from interleaved real coordinates `(x_1, y_1, x_2, y_2, ...)`.
    pub fn from_real(real: &[f64]) -> Result<Self> {
        if !real.len().is_multiple_of(2) {
            return Err(Error::contract("real coordinate count must be even"));
        }
        let coords: Vec<Complex64> = real.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Self::new(&coords)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.z[..self.n]
    }

    pub fn z(&self, i: usize) -> Complex64 {
        self.z[i]
    }

    /// `r^2 = sum |z_k|^2`.
    pub fn r2(&self) -> f64 {
        self.coords().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Shifts real axis `axis` (`2k` is `Re z_k`, `2k+1` is `Im z_k`) by `h`.
    pub fn shifted(&self, axis: usize, h: f64) -> Self {
        let mut out = *self;
        let k = axis / 2;
        if axis.is_multiple_of(2) {
            out.z[k].re += h;
        } else {
            out.z[k].im += h;
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = *self;
        for z in out.z[..self.n].iter_mut() {
            *z *= factor;
        }
        out
    }
}

impl fmt::Debug for ComplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords()).finish()
    }
}

/// Inline `n x n` complex matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct CMat {
    n: usize,
    a: [Complex64; MAX_DIM * MAX_DIM],
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "matrix dimension {n} outside 1..={MAX_DIM}");
        Self {
            n,
            a: [ZERO; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn entries(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).map(move |j| self[(i, j)]))
    }

    /// `max |M - M^*|` entrywise.
    pub fn hermitian_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// `(M + M^*) / 2`.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()))
    }

    pub fn mul_i(&self) -> Self {
        *self * Complex64::i()
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = *self;
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .unwrap_or(col);
            let p = a[(pivot, col)];
            if !(p.norm() > 1e-14 * scale) || !p.is_finite() {
                return Err(Error::SingularMetric(format!(
                    "pivot {:e} in column {col} of a {n}x{n} matrix",
                    p.norm()
                )));
            }
            if pivot != col {
                for j in 0..n {
                    a.a.swap(pivot * MAX_DIM + j, col * MAX_DIM + j);
                    inv.a.swap(pivot * MAX_DIM + j, col * MAX_DIM + j);
                }
            }
            let pinv = p.inv();
            for j in 0..n {
                a[(col, j)] *= pinv;
                inv[(col, j)] *= pinv;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[(row, col)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (acj, icj) = (a[(col, j)], inv[(col, j)]);
                    a[(row, j)] -= f * acj;
                    inv[(row, j)] -= f * icj;
                }
            }
        }
        Ok(inv)
    }

    /// Determinant by LU elimination with partial pivoting.
    pub fn det(&self) -> Complex64 {
        let n = self.n;
        let mut a = *self;
        let mut det = ONE;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .unwrap_or(col);
            let p = a[(pivot, col)];
            if p == ZERO {
                return ZERO;
            }
            if pivot != col {
                for j in 0..n {
                    a.a.swap(pivot * MAX_DIM + j, col * MAX_DIM + j);
                }
                det = -det;
            }
            det *= p;
            for row in col + 1..n {
                let f = a[(row, col)] / p;
                for j in col..n {
                    let acj = a[(col, j)];
                    a[(row, j)] -= f * acj;
                }
            }
        }
        det
    }

    fn to_nalgebra(self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.n && j < self.n);
        &self.a[i * MAX_DIM + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.a[i * MAX_DIM + j]
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(mut self, rhs: CMat) -> CMat {
        self += rhs;
        self
    }
}

impl AddAssign for CMat {
    fn add_assign(&mut self, rhs: CMat) {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.a.iter_mut().zip(rhs.a.iter()) {
            *a += b;
        }
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(mut self, rhs: CMat) -> CMat {
        self -= rhs;
        self
    }
}

impl SubAssign for CMat {
    fn sub_assign(&mut self, rhs: CMat) {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.a.iter_mut().zip(rhs.a.iter()) {
            *a -= b;
        }
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(mut self) -> CMat {
        for a in self.a.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul<f64> for CMat {
    type Output = CMat;
    fn mul(mut self, s: f64) -> CMat {
        for a in self.a.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Mul<Complex64> for CMat {
    type Output = CMat;
    fn mul(mut self, s: Complex64) -> CMat {
        for a in self.a.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<Complex64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)]).collect())
            .collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Result of a pointwise positivity test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Positivity {
    pub is_positive: bool,
    pub min_eigenvalue: f64,
}

/// A conjugate-symmetric matrix: entry `(i, j)` equals `conj` of entry `(j, i)`.
#[derive(Clone, Copy, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian to closed-form precision.
    pub fn new(m: CMat) -> Result<Self> {
        Self::checked(m, HERMITIAN_TOL)
    }

    /// Asserts `|M - M^*| <= rel_tol * max(1, |M|)`, then symmetrizes.
    pub fn checked(m: CMat, rel_tol: f64) -> Result<Self> {
        let res = m.hermitian_residual();
        if !(res <= rel_tol * m.max_abs().max(1.0)) {
            return Err(Error::contract(format!(
                "matrix is not Hermitian (residual {res:e}, tolerance {rel_tol:e})"
            )));
        }
        Ok(Self(m.symmetrized()))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        Self(CMat::from_diagonal(d))
    }

    pub(crate) fn from_symmetrized(m: CMat) -> Self {
        Self(m.symmetrized())
    }

    pub fn as_cmat(&self) -> &CMat {
        &self.0
    }

    pub fn into_cmat(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.0.inverse()
    }

    /// Real determinant; the imaginary part vanishes for Hermitian input.
    pub fn det(&self) -> f64 {
        self.0.det().re
    }

    /// `log det g`, failing unless the determinant is positive.
    pub fn log_det(&self) -> Result<f64> {
        let d = self.det();
        if d > 0.0 && d.is_finite() {
            Ok(d.ln())
        } else {
            Err(Error::SingularMetric(format!("det(g) = {d:e}")))
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let mut ev = match n {
            1 => vec![self.0[(0, 0)].re],
            2 => {
                let a = self.0[(0, 0)].re;
                let d = self.0[(1, 1)].re;
                let b = self.0[(0, 1)].norm();
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ => self.0.to_nalgebra().symmetric_eigenvalues().iter().copied().collect(),
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue with a unit eigenvector.
    pub fn min_eigenpair(&self) -> (f64, Vec<Complex64>) {
        let n = self.dim();
        if n == 1 {
            return (self.0[(0, 0)].re, vec![ONE]);
        }
        let eig = self.0.to_nalgebra().symmetric_eigen();
        let (k, &lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty spectrum");
        let v = eig.eigenvectors.column(k).iter().copied().collect();
        (lambda, v)
    }

    pub fn positivity(&self) -> Positivity {
        let min_eigenvalue = self.eigenvalues()[0];
        Positivity {
            is_positive: min_eigenvalue > POSITIVITY_TOL,
            min_eigenvalue,
        }
    }

    /// `v^* M v` for a vector `v`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += v[i].conj() * self.0[(i, j)] * v[j];
            }
        }
        acc.re
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Add for HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul<f64> for HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

/// `(tr_g h, |h|^2_g)` with `tr_g h = g^{i jbar} h_{i jbar}` and
/// `|h|^2_g = g^{k jbar} g^{i pbar} h_{k pbar} h_{i jbar}`.
pub fn trace_and_norms(g: &HermitianMatrix, h: &HermitianMatrix) -> Result<(f64, f64)> {
    if g.dim() != h.dim() {
        return Err(Error::contract("dimension mismatch in trace_and_norms"));
    }
    let ginv = g.inverse()?;
    Ok(trace_and_norm_with_inverse(&ginv, h.as_cmat()))
}

/// Same contraction as [`trace_and_norms`] given a precomputed `g^{-1}`.
pub(crate) fn trace_and_norm_with_inverse(ginv: &CMat, h: &CMat) -> (f64, f64) {
    let a = *ginv * *h;
    let tr = a.trace().re;
    let norm = (a * a).trace().re;
    (tr, norm.max(0.0))
}

/// `log det` through a Cholesky factorization; `None` unless positive definite.
pub(crate) fn cholesky_log_det(m: &CMat) -> Option<f64> {
    let n = m.dim();
    let mut l = CMat::zeros(n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        log_det += 2.0 * ljj.ln();
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(log_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_round_trip() {
        let m = CMat::from_fn(3, |i, j| {
            if i == j {
                c(3.0 + i as f64, 0.0)
            } else {
                c(0.3 * (i + j) as f64, 0.1 * (i as f64 - j as f64))
            }
        });
        let inv = m.inverse().unwrap();
        let id = m * inv;
        assert!((id - CMat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = CMat::from_fn(2, |_, _| c(1.0, 0.0));
        assert!(matches!(m.inverse(), Err(Error::SingularMetric(_))));
    }

    #[test]
    fn trace_and_norm_hand_example() {
        let g = HermitianMatrix::from_real_diagonal(&[2.0, 1.0]);
        let h = HermitianMatrix::from_real_diagonal(&[4.0, 3.0]);
        let (tr, norm) = trace_and_norms(&g, &h).unwrap();
        assert_relative_eq!(tr, 5.0, epsilon = 1e-15);
        assert_relative_eq!(norm, 13.0, epsilon = 1e-15);
    }

    #[test]
    fn trace_of_self_is_dimension() {
        let g = HermitianMatrix::new(CMat::from_fn(3, |i, j| {
            if i == j {
                c(2.0, 0.0)
            } else if i < j {
                c(0.1, 0.2)
            } else {
                c(0.1, -0.2)
            }
        }))
        .unwrap();
        let (tr, _) = trace_and_norms(&g, &g).unwrap();
        assert_relative_eq!(tr, 3.0, epsilon = 1e-14);
        let (tr0, n0) = trace_and_norms(&g, &HermitianMatrix::zeros(3)).unwrap();
        assert_eq!((tr0, n0), (0.0, 0.0));
    }

    #[test]
    fn positivity_examples() {
        let p = HermitianMatrix::identity(2).positivity();
        assert!(p.is_positive);
        assert_eq!(p.min_eigenvalue, 1.0);
        let q = HermitianMatrix::from_real_diagonal(&[1.0, -0.1]).positivity();
        assert!(!q.is_positive);
        assert_relative_eq!(q.min_eigenvalue, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_fn(2, |i, j| c((i + 2 * j) as f64, 0.0));
        assert!(matches!(HermitianMatrix::new(m), Err(Error::Contract(_))));
    }

    #[test]
    fn eigen_paths_agree() {
        let m = CMat::from_fn(2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(1.0, 0.0),
            (0, 1) => c(0.3, 0.4),
            _ => c(0.3, -0.4),
        });
        let h = HermitianMatrix::new(m).unwrap();
        let closed = h.eigenvalues();
        let mut general: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        general.sort_by(f64::total_cmp);
        for (a, b) in closed.iter().zip(&general) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        let (lambda, v) = h.min_eigenpair();
        assert_relative_eq!(lambda, closed[0], epsilon = 1e-14);
        assert_relative_eq!(h.quadratic_form(&v), lambda, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_log_det_matches_det() {
        let m = CMat::from_fn(3, |i, j| {
            if i == j {
                c(2.0 + i as f64, 0.0)
            } else if i < j {
                c(0.2, 0.1)
            } else {
                c(0.2, -0.1)
            }
        });
        let ld = cholesky_log_det(&m).unwrap();
        assert_relative_eq!(ld, m.det().re.ln(), epsilon = 1e-13);
        assert!(cholesky_log_det(&CMat::from_diagonal(&[1.0, -1.0])).is_none());
    }
}
