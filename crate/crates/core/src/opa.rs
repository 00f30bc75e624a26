//! Non-degenerate travelling-wave OPA in dimensionless units.
//!
//! Transverse wave vectors are measured in units of `1/l_c` and temporal
//! frequencies in units of `1/T_c`. The pair label convention used
//! throughout the crate: the mismatch evaluated at `(q, Ω)` governs the
//! coupled pair `{a₁(q, Ω), a₂(−q, −Ω)}`, and every other module obtains
//! its coefficients through [`bogoliubov`].

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Dimensionless OPA model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaParams {
    /// Pump gain σ; `r(0, 0) = σ` when the collinear mismatch vanishes.
    pub sigma: f64,
    /// Collinear mismatch δ₀.
    pub delta0: f64,
    /// Group-velocity mismatch τ, linear in Ω.
    pub gvm: f64,
    /// Quadratic dispersion β.
    pub gvd: f64,
    /// Diffraction coefficient η, multiplies `|q|²`.
    pub diffraction: f64,
    /// Pump phase θ_p (radians).
    pub pump_phase: f64,
    /// Signal carrier (input image).
    pub omega1: f64,
    /// Idler carrier (teleported image).
    pub omega2: f64,
    /// Pump carrier.
    pub omega_p: f64,
}

impl Default for OpaParams {
    fn default() -> Self {
        OpaParams {
            sigma: 3.0,
            delta0: 0.0,
            gvm: 1.0,
            gvd: 0.0,
            diffraction: 1.0,
            pump_phase: PI,
            omega1: 1.0,
            omega2: 1.5,
            omega_p: 2.5,
        }
    }
}

impl OpaParams {
    /// Default model with a different pump gain.
    pub fn with_sigma(sigma: f64) -> Self {
        OpaParams {
            sigma,
            ..Self::default()
        }
    }

    /// Checks the model invariants.
    ///
    /// `sigma = 0` is accepted: it is the unpumped crystal, i.e. the
    /// classical teleportation limit.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sigma,
            self.delta0,
            self.gvm,
            self.gvd,
            self.diffraction,
            self.pump_phase,
            self.omega1,
            self.omega2,
            self.omega_p,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("opa", "all parameters must be finite"));
        }
        if self.sigma < 0.0 {
            return Err(invalid("opa.sigma", "must be non-negative"));
        }
        if self.diffraction <= 0.0 {
            return Err(invalid("opa.diffraction", "must be positive"));
        }
        let scale = self.omega_p.abs().max(1.0);
        if (self.omega1 + self.omega2 - self.omega_p).abs() > 1e-9 * scale {
            return Err(invalid("opa.omega_p", "must equal omega1 + omega2"));
        }
        Ok(())
    }
}

/// A point `(q, Ω)` of the Fourier domain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralPoint {
    pub qx: f64,
    pub qy: f64,
    pub omega: f64,
}

impl SpectralPoint {
    pub const ORIGIN: SpectralPoint = SpectralPoint {
        qx: 0.0,
        qy: 0.0,
        omega: 0.0,
    };

    pub fn new(qx: f64, qy: f64, omega: f64) -> Self {
        SpectralPoint { qx, qy, omega }
    }

    /// Point on the temporal axis, `q = 0`.
    pub fn temporal(omega: f64) -> Self {
        SpectralPoint::new(0.0, 0.0, omega)
    }

    #[inline]
    pub fn neg(self) -> Self {
        SpectralPoint::new(-self.qx, -self.qy, -self.omega)
    }

    #[inline]
    pub fn q_squared(&self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }
}

/// Bogoliubov coefficients of one coupled pair `{a₁(q, Ω), a₂(−q, −Ω)}`.
///
/// `e₁(q, Ω) = u1·a₁(q, Ω) + v1·a₂†(−q, −Ω)` and
/// `e₂(−q, −Ω) = u2m·a₂(−q, −Ω) + v2m·a₁†(q, Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoeffs {
    pub u1: Complex64,
    pub v1: Complex64,
    pub u2m: Complex64,
    pub v2m: Complex64,
}

/// Orientation and degree of a squeezing ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    /// Major-axis orientation, reduced to `[0, π)`.
    pub psi: f64,
    /// Squeezing degree, `r ≥ 0`.
    pub r: f64,
}

impl EllipseParams {
    pub fn new(psi: f64, r: f64) -> Self {
        EllipseParams {
            psi: reduce_angle(psi),
            r,
        }
    }

    /// Semi-axis lengths `(e^{r}, e^{−r})`.
    pub fn axes(&self) -> (f64, f64) {
        (libm::exp(self.r), libm::exp(-self.r))
    }
}

/// Which EPR beam an ellipse refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// Beam at ω₁, mixed with the input image.
    One,
    /// Beam at ω₂, carries the teleported image.
    Two,
}

impl TryFrom<u8> for Field {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Field::One),
            2 => Ok(Field::Two),
            _ => Err(invalid("n", "field index must be 1 or 2")),
        }
    }
}

/// Reduces an angle to `[0, π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let mut p = libm::fmod(x, PI);
    if p < 0.0 {
        p += PI;
    }
    if p >= PI {
        p -= PI;
    }
    p
}

/// Phase mismatch `D(q, Ω) = δ₀ + τΩ + βΩ² − η|q|²`.
#[inline]
pub fn pair_mismatch(params: &OpaParams, pt: SpectralPoint) -> f64 {
    let w = pt.omega;
    params.delta0 + params.gvm * w + params.gvd * w * w - params.diffraction * pt.q_squared()
}

// Returns (cosh Γ, sinh Γ / Γ) for Γ² = x, continued to cos/sin for x < 0.
#[inline]
pub(crate) fn gain_functions(x: f64) -> (f64, f64) {
    if x.abs() < 1e-8 {
        (1.0 + 0.5 * x, 1.0 + x / 6.0)
    } else if x > 0.0 {
        let g = libm::sqrt(x);
        (libm::cosh(g), libm::sinh(g) / g)
    } else {
        let g = libm::sqrt(-x);
        (libm::cos(g), libm::sin(g) / g)
    }
}

/// Coefficients `(u, v)` of the pair with mismatch `d`.
#[inline]
pub(crate) fn pair_uv(sigma: f64, pump_phase: f64, d: f64) -> (Complex64, Complex64) {
    let half = 0.5 * d;
    let (c, s) = gain_functions(sigma * sigma - half * half);
    let u = Complex64::from_polar(1.0, half) * Complex64::new(c, -half * s);
    let v = Complex64::from_polar(sigma * s, pump_phase + half);
    (u, v)
}

/// Bogoliubov coefficients of the pair labelled by `pt`.
///
/// Coefficients of `e₂` at `(q, Ω)` are the `u2m`, `v2m` of the pair
/// labelled by `(−q, −Ω)`.
pub fn bogoliubov(params: &OpaParams, pt: SpectralPoint) -> PairCoeffs {
    let (u, v) = pair_uv(params.sigma, params.pump_phase, pair_mismatch(params, pt));
    PairCoeffs {
        u1: u,
        v1: v,
        u2m: u,
        v2m: v,
    }
}

/// Commutator `[F, F†]` of the added-noise operator `F = e₂(q, Ω) + e₁†(−q, −Ω)`
/// in units of the vacuum commutator.
///
/// `F = (u2m + v̄1)·a₂ + (v2m + ū1)·a₁†`, so the value is
/// `|u2m + v̄1|² − |v2m + ū1|²`; zero means `F` is classical.
pub fn noise_commutator(params: &OpaParams, pt: SpectralPoint) -> f64 {
    let c = bogoliubov(params, pt.neg());
    (c.u2m + c.v1.conj()).norm_sqr() - (c.v2m + c.u1.conj()).norm_sqr()
}

#[inline]
fn ellipse_of_pair(u: Complex64, v: Complex64) -> EllipseParams {
    let vn = v.norm();
    let phase = if vn == 0.0 { 0.0 } else { (u * v).arg() };
    EllipseParams::new(0.5 * phase, libm::asinh(vn))
}

/// Squeezing ellipse of field `n` at `pt`.
///
/// `ψ_n(q, Ω) = ½ arg{U_n(q, Ω)·V_n'(−q, −Ω)}` and
/// `e^{±r_n} = |U_n(q, Ω)| ± |V_n'(−q, −Ω)|`. Both factors belong to the
/// same pair, so `e^{r}·e^{−r} = 1` holds exactly; `r` is computed as
/// `asinh|V|`.
pub fn ellipse(params: &OpaParams, n: Field, pt: SpectralPoint) -> EllipseParams {
    let label = match n {
        Field::One => pt,
        Field::Two => pt.neg(),
    };
    let c = bogoliubov(params, label);
    match n {
        Field::One => ellipse_of_pair(c.u1, c.v2m),
        Field::Two => ellipse_of_pair(c.u2m, c.v1),
    }
}

/// One row of a dispersion scan of the field-2 ellipse along `q = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseRow {
    pub omega: f64,
    pub psi: f64,
    pub r: f64,
    pub major: f64,
    pub minor: f64,
}

/// Samples ψ₂, r₂ uniformly over `[omega_min, omega_max]` at `q = 0`.
pub fn ellipse_dispersion_scan(
    params: &OpaParams,
    omega_min: f64,
    omega_max: f64,
    count: usize,
) -> Result<Vec<EllipseRow>> {
    params.validate()?;
    if count < 2 {
        return Err(invalid("count", "need at least two samples"));
    }
    if !(omega_min < omega_max) || !omega_min.is_finite() || !omega_max.is_finite() {
        return Err(invalid("omega_min", "must be finite and below omega_max"));
    }
    let step = (omega_max - omega_min) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            let omega = if k + 1 == count {
                omega_max
            } else {
                omega_min + step * k as f64
            };
            let e = ellipse(params, Field::Two, SpectralPoint::temporal(omega));
            let (major, minor) = e.axes();
            EllipseRow {
                omega,
                psi: e.psi,
                r: e.r,
                major,
                minor,
            }
        })
        .collect())
}
