//! Numerical verification laboratory for space-time decay of solutions of
//! □u + V(x)u = 0 in three space dimensions.
//!
//! The crate builds the solution two independent ways — a retarded-integral
//! fixed-point iteration on light cones, and a spherically symmetric
//! finite-difference evolution — certifies the sphere and cone integral
//! inequalities the decay estimates rest on, evaluates every explicit
//! constant, and cross-checks energy conservation and late-time tails.
//!
//! Modules map onto the pipeline:
//! * [`weights`] — bracket weight, weighted sup norms, explicit constants;
//! * [`quad`] — deterministic adaptive quadrature, sphere and cone integrals;
//! * [`lemmas`] — grid certification of the integral inequalities;
//! * [`profiles`] — built-in radial profiles for data, potentials, sources;
//! * [`grid`] — tensor sample grids and monotone-cubic interpolation;
//! * [`duhamel`] — retarded-integral solver and the contraction iteration;
//! * [`fd`] — finite-difference oracle, energy and tail diagnostics;
//! * [`config`], [`report`], [`runner`] — config-driven orchestration.

pub mod config;
pub mod duhamel;
pub mod error;
pub mod fd;
pub mod grid;
pub mod lemmas;
pub mod profiles;
pub mod quad;
pub mod real;
pub mod report;
pub mod runner;
pub mod weights;

pub use error::{Error, Result};
pub use real::Real;

/// Scalar used by the shipped binaries, configs and reports.
pub type Scalar = f64;

/// Weight-exponent pair at the default scalar.
pub type NormParams = weights::WeightedNormParams<Scalar>;

/// Sample set at the default scalar.
pub type SampleSet = weights::SpacetimeSampleSet<Scalar>;
