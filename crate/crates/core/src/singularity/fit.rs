//! Least-squares fit of `sup R ~ C (T - t)^(-k)`.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::flow::fmt_f64;

/// Minimum number of samples in a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

/// RMS log-residual above which a fit is flagged as low confidence.
pub const LOW_CONFIDENCE_RMS: f64 = 1e-2;

/// Exponents in this band are classified as Type I.
pub const TYPE_I_BAND: (f64, f64) = (0.8, 1.2);

const MAX_ITERATIONS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupFit {
    pub t_fit: f64,
    pub k: f64,
    pub c: f64,
    /// RMS of `log(sup R) - log C + k log(T - t)` over the window.
    pub rms: f64,
    /// Sample times actually used, `[t_lo, t_hi]`.
    pub window: (f64, f64),
    pub samples: usize,
    pub converged: bool,
    pub low_confidence: bool,
}

impl BlowupFit {
    pub fn is_type_i(&self) -> bool {
        (TYPE_I_BAND.0..=TYPE_I_BAND.1).contains(&self.k)
    }

    pub fn classification(&self) -> &'static str {
        if self.is_type_i() {
            "type_i"
        } else {
            "undetermined"
        }
    }

    /// Key/value report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t_fit = {}", fmt_f64(self.t_fit));
        let _ = writeln!(s, "k = {}", fmt_f64(self.k));
        let _ = writeln!(s, "c = {}", fmt_f64(self.c));
        let _ = writeln!(s, "rms = {}", fmt_f64(self.rms));
        let _ = writeln!(s, "t_lo = {}", fmt_f64(self.window.0));
        let _ = writeln!(s, "t_hi = {}", fmt_f64(self.window.1));
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "low_confidence = {}", self.low_confidence);
        let _ = writeln!(s, "classification = {}", self.classification());
        s
    }
}

/// Residuals and Jacobian for parameters `(log C, k, s)` with `T = t_hi + e^s`.
fn residuals(p: &Vector3<f64>, t: &[f64], y: &[f64], t_hi: f64) -> (Vec<f64>, Vec<[f64; 3]>) {
    let big_t = t_hi + p[2].exp();
    let mut r = Vec::with_capacity(t.len());
    let mut jac = Vec::with_capacity(t.len());
    for (&ti, &yi) in t.iter().zip(y) {
        let gap = big_t - ti;
        r.push(p[0] - p[1] * gap.ln() - yi);
        jac.push([1.0, -gap.ln(), -p[1] / gap * p[2].exp()]);
    }
    (r, jac)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `(log C, k)` by linear least squares for a fixed `T`.
fn linear_fit(t: &[f64], y: &[f64], big_t: f64) -> (f64, f64) {
    let x: Vec<f64> = t.iter().map(|ti| -(big_t - ti).ln()).collect();
    let m = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let k = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    ((sy - k * sx) / m, k)
}

/// Fits `log(sup R) = log C - k log(T - t)` over samples with `t` in `window`.
///
/// `T` is initialized by extrapolating the reciprocal `1 / sup R` from the
/// last two samples to zero, `(log C, k)` by linear least squares at that
/// `T`, and all three are then refined by Levenberg-Marquardt.
pub fn fit_blowup(series: &[(f64, f64)], window: (f64, f64)) -> Result<BlowupFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::contract(format!(
            "fit window [{}, {}] holds {} samples, need at least {MIN_FIT_SAMPLES}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if pts.iter().any(|(t, v)| !(v.is_finite() && *v > 0.0 && t.is_finite())) {
        return Err(Error::contract(
            "series must be finite and strictly positive on the window",
        ));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
        return Err(Error::contract(
            "series must be strictly increasing in time and value on the window",
        ));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = pts.len();
    let (t_lo, t_hi) = (t[0], t[m - 1]);

    // 1/R ~ (T - t) / C near a Type I singularity: extrapolate to its root.
    let (ta, ra) = (t[m - 2], 1.0 / pts[m - 2].1);
    let (tb, rb) = (t_hi, 1.0 / pts[m - 1].1);
    let slope = (rb - ra) / (tb - ta);
    let mut gap0 = if slope < 0.0 { -rb / slope } else { 0.0 };
    if !(gap0.is_finite() && gap0 > 0.0) {
        gap0 = 0.1 * (t_hi - t_lo);
    }
    let (a0, k0) = linear_fit(&t, &y, t_hi + gap0);
    let mut p = Vector3::new(a0, k0, gap0.ln());
    let (mut r, mut jac) = residuals(&p, &t, &y, t_hi);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            let jv = Vector3::new(row[0], row[1], row[2]);
            jtj += jv * jv.transpose();
            jtr += jv * *ri;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let (tr, tj) = residuals(&trial, &t, &y, t_hi);
            let tc = sum_sq(&tr);
            if tc.is_finite() && tc <= cost {
                let small_step = delta.norm() <= 1e-12 * (1.0 + p.norm());
                let small_gain = cost - tc <= 1e-15 * cost.max(1e-300);
                p = trial;
                r = tr;
                jac = tj;
                cost = tc;
                lambda = (lambda * 0.1).max(1e-15);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: at a (numerical) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let rms = (cost / m as f64).sqrt();
    let k = p[1];
    Ok(BlowupFit {
        t_fit: t_hi + p[2].exp(),
        k,
        c: p[0].exp(),
        rms,
        window: (t_lo, t_hi),
        samples: m,
        converged,
        low_confidence: !converged || rms > LOW_CONFIDENCE_RMS || !(k > 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(c: f64, k: f64, big_t: f64, lo: f64, hi: f64, m: usize) -> Vec<(f64, f64)> {
        (0..m)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (m - 1) as f64;
                (t, c * (big_t - t).powf(-k))
            })
            .collect()
    }

    #[test]
    fn recovers_type_i_series() {
        let fit = fit_blowup(&synth(1.0, 1.0, 0.5, 0.3, 0.45, 31), (0.3, 0.45)).unwrap();
        assert!((fit.t_fit - 0.5).abs() < 1e-4, "{fit:?}");
        assert!((fit.k - 1.0).abs() < 1e-3);
        assert!((fit.c - 1.0).abs() < 1e-3);
        assert!(!fit.low_confidence && fit.is_type_i());
    }

    #[test]
    fn recovers_faster_rate() {
        let fit = fit_blowup(&synth(2.0, 2.0, 0.5, 0.3, 0.45, 31), (0.3, 0.45)).unwrap();
        assert!((fit.k - 2.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.c - 2.0).abs() < 1e-2);
        assert_eq!(fit.classification(), "undetermined");
    }

    #[test]
    fn constant_series_is_rejected() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.01, 3.0)).collect();
        assert!(matches!(fit_blowup(&s, (0.0, 1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn short_window_is_rejected() {
        let s = synth(1.0, 1.0, 0.5, 0.3, 0.45, 31);
        assert!(fit_blowup(&s, (0.3, 0.32)).is_err());
    }
}
