//! Likelihood inference for dispersion-model regression.
//!
//! A dispersion model has density `exp{φ t(y, θ) + c(y, φ)}` with a position
//! parameter θ linked to a (possibly nonlinear) predictor `η = f(x; β)` and a
//! common precision φ. This crate fits such models by maximum likelihood,
//! computes the likelihood-ratio, Wald, score and gradient statistics for
//! hypotheses on a subset of β or on φ, and evaluates the `O(n^{-1/2})`
//! expansions of their local power.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod design;
pub mod error;
pub mod expansion;
pub mod family;
pub mod fit;
pub mod link;
mod linalg;
pub mod specfun;
pub mod statistics;

pub use design::{CustomPredictor, DesignEval, Predictor, RegressionSpec};
pub use error::{Error, Result};
pub use expansion::{
    local_power, power_differences, precision_coefficients, precision_power_differences,
    subset_coefficients, subset_inputs, CoefficientTable, ExpansionInputs, LocalPower,
    PowerComparison, Verdict,
};
pub use family::{fge_weights, Family, Pdm};
pub use fit::{fit_beta, fit_full, fit_phi, fit_restricted, FitOptions, FitResult, IrlsStep};
pub use link::{Link, LinkScale, ModelLink};
pub use specfun::{chisq_quantile, ChiSquare};
pub use statistics::{precision_tests, subset_tests, TestQuartet};

pub use nalgebra::{DMatrix, DVector};
