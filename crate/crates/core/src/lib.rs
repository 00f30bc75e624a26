//! Numerical core for continuous-variable holographic teleportation of
//! images between two optical carriers.
//!
//! Everything here is a pure function of its inputs and builds without
//! `std` (an allocator is required for the adaptive quadrature and the
//! covariance tables).
//!
//! * [`opa`] — non-degenerate travelling-wave OPA: phase mismatch,
//!   Bogoliubov coefficients, squeezing ellipses.
//! * [`kernel`] — added-noise covariance of the coarse-grained teleported
//!   field, evaluated by nested adaptive quadrature.
//! * [`compensation`] — dispersive phase compensation of the ellipse
//!   orientation and its simplex optimizer.
//! * [`fidelity`] — single-pixel coherent-state fidelity.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod compensation;
pub mod error;
pub mod fidelity;
pub mod kernel;
pub mod opa;
pub mod quad;

mod fingerprint;
mod simplex;

pub use compensation::{apply_compensation, optimize_compensation, CompensationProfile, Optimized};
pub use error::{Error, Result};
pub use fidelity::{coherent_fidelity, fidelity_map};
pub use kernel::{
    added_noise_covariance, classical_covariance, covariance_at_offset, diagonal_scan, green,
    window_spatial, window_temporal, Cell, CellPair, CovEntry, CovarianceTable, GridSpec, Method,
    Offset, QuadConfig, ScanRow,
};
pub use opa::{
    bogoliubov, ellipse, ellipse_dispersion_scan, noise_commutator, pair_mismatch, EllipseParams,
    EllipseRow, Field, OpaParams, PairCoeffs, SpectralPoint,
};
