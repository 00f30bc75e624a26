//! Dispersive phase compensation of the squeezing-ellipse orientation.
//!
//! A linear medium multiplies the field amplitudes by `e^{iφ(Ω)}`; since
//! `ψ = ½ arg{U·V}` the ellipse turns by `φ(Ω)/2` while `r` is untouched.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::kernel::{added_noise_covariance, Cell, CellPair, GridSpec, QuadConfig};
use crate::opa::{EllipseParams, OpaParams};
use crate::simplex::{self, SimplexOptions};

/// Highest polynomial degree accepted for a profile.
pub const MAX_DEGREE: usize = 4;

/// Polynomial phase `φ(Ω) = Σ_{m=1..k} c_m Ω^m`.
///
/// The constant term is left out: a global phase is absorbed by the pump
/// phase.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompensationProfile {
    coeffs: Vec<f64>,
}

impl CompensationProfile {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() > MAX_DEGREE {
            return Err(invalid("compensation.coeffs", "degree above 4"));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(invalid(
                "compensation.coeffs",
                "coefficients must be finite",
            ));
        }
        Ok(CompensationProfile { coeffs })
    }

    pub fn zero(degree: usize) -> Self {
        CompensationProfile {
            coeffs: vec![0.0; degree.min(MAX_DEGREE)],
        }
    }

    /// `c₁..c_k`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `φ(Ω)` by Horner's rule.
    pub fn phase(&self, omega: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| (acc + c) * omega)
    }
}

/// Rotates the ellipse by half the compensating phase at `omega`.
pub fn apply_compensation(
    e: EllipseParams,
    profile: &CompensationProfile,
    omega: f64,
) -> EllipseParams {
    EllipseParams::new(e.psi + 0.5 * profile.phase(omega), e.r)
}

/// Result of [`optimize_compensation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub profile: CompensationProfile,
    /// Diagonal covariance with `profile` applied.
    pub objective: f64,
    /// Diagonal covariance without compensation.
    pub uncompensated: f64,
    pub evaluations: usize,
    /// Best objective after each simplex iteration.
    pub history: Vec<f64>,
    /// `false` when the evaluation budget ran out before the simplex
    /// collapsed; the result is then the best point seen.
    pub converged: bool,
    /// Profiles whose covariance could not be brought to tolerance; the
    /// search treats them as infinitely bad.
    pub rejected: usize,
}

impl Optimized {
    /// [`Error`]-style view of a budget-limited run.
    pub fn budget_exhausted(&self) -> bool {
        !self.converged
    }
}

/// Minimizes the diagonal added-noise covariance over polynomial profiles
/// of the given degree.
///
/// Deterministic Nelder–Mead search started from the zero profile with a
/// unit step of 0.1 per coefficient; stops after `budget` objective
/// evaluations or when the simplex diameter drops below 1e-6. The zero
/// profile is always a candidate, so the returned objective never exceeds
/// the uncompensated covariance. Profiles whose quadrature does not
/// converge are skipped; any other error aborts the search.
pub fn optimize_compensation(
    params: &OpaParams,
    grid: &GridSpec,
    degree: usize,
    budget: usize,
    cfg: &QuadConfig,
) -> Result<Optimized> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(invalid("compensation.degree", "must be in 1..=4"));
    }
    if budget == 0 {
        return Err(invalid("compensation.budget", "must be at least 1"));
    }
    let diag = CellPair::new(Cell::new(0, 0), Cell::new(0, 0));
    let mut failure: Option<Error> = None;
    let mut rejected = 0;
    let mut first = true;
    let mut objective = |x: &[f64]| -> f64 {
        if failure.is_some() {
            return f64::INFINITY;
        }
        let start = core::mem::replace(&mut first, false);
        let profile = CompensationProfile { coeffs: x.to_vec() };
        match added_noise_covariance(params, grid, &[diag], Some(&profile), cfg) {
            Ok(t) => t.entries[0].value,
            Err(Error::QuadratureNotConverged { .. }) if !start => {
                rejected += 1;
                f64::INFINITY
            }
            Err(e) => {
                failure = Some(e);
                f64::INFINITY
            }
        }
    };
    let opts = SimplexOptions {
        step: 0.1,
        max_evaluations: budget,
        min_diameter: 1e-6,
    };
    let start = vec![0.0; degree];
    let run = simplex::minimize(&mut objective, &start, &opts);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Optimized {
        profile: CompensationProfile { coeffs: run.x },
        objective: run.value,
        uncompensated: run.initial_value,
        evaluations: run.evaluations,
        history: run.history,
        converged: run.converged,
        rejected,
    })
}
