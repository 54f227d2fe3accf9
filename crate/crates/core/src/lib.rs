//! Simulation of multiview attenuated Poisson measurements (Beer-Lambert
//! forward model) and joint recovery of the attenuation and density maps.
//!
//! The estimation pipeline minimizes a Poisson negative log-likelihood with
//! total-variation priors via an SDMM splitting scheme. The per-pixel proximal
//! subproblems reduce to two scalar kernels: a Newton solve for the prox of
//! logsumexp in dimension 2 and an overflow-safe Lambert W evaluation.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`fields`]: raster container, binary field IO, PGM export, SNR metric
//! - [`operators`]: cumulative-sum path operators, gradient/divergence, power iteration
//! - [`kernels`]: scalar proximal kernels (Lambert W, logsumexp prox, shrinkage)
//! - [`sdmm`]: generic SDMM solver with a matrix-free conjugate-gradient inner solve
//! - [`simulate`]: forward model, reproducible Poisson sampling, synthetic phantoms
//! - [`estimators`]: MAP objective, warm start, alternating minimization, baselines
//!
//! With the default `parallel` feature, per-pixel sweeps and line sweeps run on
//! rayon; disabling it yields a sequential build with bit-identical results.

pub mod error;
pub mod estimators;
pub mod fields;
pub mod kernels;
pub mod operators;
pub(crate) mod parallel;
pub mod sdmm;
pub mod simulate;

pub use error::{Error, Result};
pub use fields::{ScalarField, VectorField};
