use crate::error::{Error, Result};
use crate::linalg::{cholesky_log_det, CMat, HermitianMatrix, POSITIVITY_TOL};

/// Bisection resolution of [`maximal_time_proxy`]: the largest power of two
/// not above `1e-10`, so the result always lies on one fixed dyadic lattice.
const RESOLUTION: f64 = 5.820766091346741e-11; // 2^-34
const _: () = assert!(RESOLUTION <= 1e-10 && 2.0 * RESOLUTION > 1e-10);

fn positive_at(g0: &[CMat], ric0: &[CMat], t: f64) -> bool {
    g0.iter().zip(ric0).all(|(g, r)| {
        let a = *g - *r * t;
        cholesky_log_det(&a).is_some()
            && HermitianMatrix::from_symmetrized(a.symmetrized())
                .positivity()
                .min_eigenvalue
                > POSITIVITY_TOL
    })
}

/// Largest `t` with `alpha_t = g0 - t Ric0` positive at every sample,
/// found by bisection. This fixes the potential to zero and is therefore a
/// lower bound for the maximal existence time. Returns `+inf` when
/// `Ric0 <= 0` everywhere.
pub fn maximal_time_proxy(g0: &[CMat], ric0: &[CMat]) -> Result<f64> {
    if g0.len() != ric0.len() || g0.is_empty() {
        return Err(Error::contract("need matching, nonempty metric and Ricci samples"));
    }
    for (i, g) in g0.iter().enumerate() {
        let pos = HermitianMatrix::checked(*g, 1e-10)?.positivity();
        if !pos.is_positive {
            return Err(Error::PositivityLoss {
                t: 0.0,
                point: i,
                min_eigenvalue: pos.min_eigenvalue,
            });
        }
    }
    let ric_max: Vec<f64> = ric0
        .iter()
        .map(|r| {
            let ev = HermitianMatrix::checked(*r, 1e-10).map(|h| h.eigenvalues());
            ev.map(|e| e.into_iter().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    if ric_max.iter().all(|&m| m <= 0.0) {
        return Ok(f64::INFINITY);
    }
    let mut hi = 1.0;
    while positive_at(g0, ric0, hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if positive_at(g0, ric0, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_against_diagonal_ricci() {
        let t = maximal_time_proxy(&[CMat::identity(2)], &[CMat::from_diagonal(&[2.0, 1.0])]).unwrap();
        assert!((t - 0.5).abs() < 1e-10, "{t}");
        assert!(t <= 0.5);
    }

    #[test]
    fn nonpositive_ricci_gives_infinity() {
        let t = maximal_time_proxy(&[CMat::identity(2)], &[CMat::from_diagonal(&[0.0, -1.0])]).unwrap();
        assert_eq!(t, f64::INFINITY);
    }

    #[test]
    fn resolution_is_a_power_of_two_below_tolerance() {
        assert_eq!(RESOLUTION, 2f64.powi(-34));
    }
}
