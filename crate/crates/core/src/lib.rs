// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection of an abrupt change in the intensity of a Poisson process on `[0, 1]`.
//!
//! The observed process has intensity `λ(t) = λ₀ + δ·1_{(τ, τ+ℓ]}(t)` with respect to
//! the measure `L·dt`. A *bump* is a transitory change on `(τ, τ+ℓ]`; a *jump* is the
//! persistent case `ℓ = 1 − τ`. The crate provides:
//!
//! - [`process`]: event samples, exact simulation, exact window counts and window extrema.
//! - [`statistics`]: linear, shifted and quadratic window statistics for a known baseline
//!   `λ₀` and their conditional (`N₁`-based) counterparts for an unknown baseline, exact
//!   suprema over continuous window parameters, and closed-form moments.
//! - [`calibration`]: exact Poisson/binomial laws, Monte Carlo quantiles, Bonferroni and
//!   min-p levels, theoretical quantile bounds and a persistent critical-value store.
//! - [`detectors`]: the catalogue of scan, aggregated and randomized tests plus the
//!   Laplace and Z reference tests.
//! - [`bench`]: size and power estimation and reproduction of the reference tables.
//!
//! Statistics and event samples are generic over the floating-point type through
//! [`Scalar`]; calibration, detection and benchmarking run in `f64`.

#![forbid(unsafe_code)]

pub mod bench;
pub mod calibration;
pub mod detectors;
pub mod error;
pub mod process;
pub mod rng;
pub mod scalar;
pub mod statistics;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Event sample in double precision.
pub type EventSample = process::EventSample<f64>;
/// Event sample in single precision.
pub type EventSample32 = process::EventSample<f32>;
/// Piecewise-constant intensity in double precision.
pub type PiecewiseIntensity = process::PiecewiseIntensity<f64>;
/// Piecewise-constant intensity in single precision.
pub type PiecewiseIntensity32 = process::PiecewiseIntensity<f32>;
/// Window statistic descriptor in double precision.
pub type WindowStatKind = statistics::WindowStatKind<f64>;
