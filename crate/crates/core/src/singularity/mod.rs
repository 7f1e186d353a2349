//! Blow-up detection and characterization: the sup-R series and its rate
//! fit, the scalar-curvature evolution residual, the `Q1`/`Q2` diagnostics,
//! a maximal-time proxy and the empirical singular locus.

mod fit;
mod lemma;
mod locus;
mod proxy;
mod q;
mod series;

pub use fit::{fit_blowup, BlowupFit, LOW_CONFIDENCE_RMS, MIN_FIT_SAMPLES, TYPE_I_BAND};
pub use lemma::scalar_evolution_residual;
pub use locus::{singular_locus, LocusMask};
pub use proxy::maximal_time_proxy;
pub use q::{default_c_tilde, q_diagnostics, QSeries};
pub use series::{sup_scalar_series, ScalarSeries};
