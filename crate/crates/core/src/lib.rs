//! Numerical laboratory for a degenerate parabolic-elliptic chemotaxis system
//! with porous-medium diffusion on R^n, n >= 3.
//!
//! The crate computes the closed-form constants that split initial data into
//! a global-existence regime and a finite-time blow-up regime, classifies
//! radial initial data by quadrature, integrates the (optionally
//! epsilon-regularized) radial dynamics with a conservative positivity-aware
//! finite-volume scheme, and monitors the free-energy and second-moment
//! mechanisms that drive the dichotomy.

// guards of the form `!(x > 0.0)` are deliberate: they reject NaN along
// with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod criterion;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod potential;
pub mod radial;
pub mod scenarios;
pub mod special;

pub use criterion::{
    classify_initial_data, compute_constants, critical_exponents, f_eval, hls_constant,
    unit_ball_volume, Classification, CriterionConstants, ProblemParams, Regime,
};
pub use error::{Error, Result};
pub use radial::{DensityField, RadialGrid, Spacing};
