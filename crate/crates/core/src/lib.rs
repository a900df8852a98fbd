//! Adaptive nonparametric tests of homogeneity for a Poisson process on `[0,1]`.
//!
//! A point process with intensity `s` (with respect to `L·dx`) is observed on the
//! unit interval; the null hypothesis is that `s` is constant equal to 1. The
//! library provides two adaptive multiscale tests built from Haar-coefficient
//! U-statistics — a model-selection form that aggregates squared coefficients over
//! dyadic approximation spaces, and a level-by-level thresholding form — together
//! with their combination and three classical comparators (Kolmogorov–Smirnov,
//! Laplace, and a chi-square/Z test). Critical values are calibrated by Monte
//! Carlo, conditionally on the observed number of points, which makes every test
//! exactly distribution-free under the null.
//!
//! Module layout:
//!
//! * [`intensity`] — the benchmark intensity shapes, exact/quadrature Haar
//!   coefficients, spike alternatives, Besov-ball diagnostics;
//! * [`poisson`] — simulation of the process and the conditional uniform model,
//!   plus point-pattern I/O;
//! * [`haar`] — Haar indices and the U-statistics `T_λ`, `T'_J`, `T''_Λ`;
//! * [`dist`] — the classical distribution functions the comparators need;
//! * [`calibration`] — conditional Monte-Carlo quantile tables;
//! * [`testing`] — the test procedures themselves, producing [`testing::TestVerdict`]s;
//! * [`harness`] — power-study and rate-probe drivers with CSV reports.
//!
//! The numerical kernels are generic over the floating scalar via [`real::Real`];
//! the calibration/testing pipeline and its serialized artifacts are pinned to
//! `f64` through the crate-root aliases below.

pub mod calibration;
pub mod dist;
pub mod haar;
pub mod harness;
pub mod intensity;
pub mod numeric;
pub mod poisson;
pub mod real;
pub mod stream;
pub mod testing;

/// Scalar type used by the calibrated pipeline and all serialized artifacts.
pub type Scalar = f64;

/// Intensity specification over the pipeline scalar.
pub type Intensity = intensity::IntensitySpec<Scalar>;

/// Point pattern over the pipeline scalar.
pub type Pattern = poisson::PointPattern<Scalar>;

pub use calibration::{CalibrationConfig, Procedure, QuantileTable};
pub use haar::{HaarIndex, IndexSet};
pub use testing::{ProcedureKind, TestVerdict};
