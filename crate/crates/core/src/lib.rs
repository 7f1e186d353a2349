//! Numerical engine for the Chern-Ricci flow on Hermitian model manifolds.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`], [`stencil`], [`metric`] and [`chern`] evaluate Chern
//!   connection, curvature, Ricci form, scalar curvature and torsion from a
//!   Hermitian metric, by closed form or fourth-order Wirtinger stencils.
//! * [`models`] provides Hopf manifolds with their exact flow line and
//!   flat or perturbed complex tori.
//! * [`flow`] integrates the flow on periodic torus grids in tensor form and
//!   in scalar-potential (parabolic complex Monge-Ampere) form, and steps the
//!   exact Hopf family analytically.
//! * [`singularity`] fits blow-up rates, checks the evolution identities and
//!   maps where the scalar curvature blows up.
//! * [`config`] and [`verify`] back the command-line driver.

// `!(a < b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tensor index loops read closer to the formulas than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod chern;
pub mod config;
pub mod error;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod singularity;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
