//! Added-noise covariance of the coarse-grained teleported image.
//!
//! For cells `a = (j, i)` and `b = (j′, i′)`
//!
//! ```text
//! C(a, b) = 2 ∫d²q ∫dΩ B_Δ(q) B_T(Ω) cos[q·(ρ_j − ρ_j′) − Ω(t_i − t_i′)] G(q, Ω)
//! ```
//!
//! The integral is split as `C = C_cl + 2∫…(G − 1)`. The classical part
//! has a closed form (a product of triangle functions) and the remainder
//! is confined to the squeezing band, where `G − 1` is large, plus
//! algebraically decaying tails.
//!
//! `G` depends on `q` only through `|q|²`, so the remainder is evaluated
//! in polar wave-vector coordinates as three nested adaptive 1-D
//! integrals:
//!
//! ```text
//! 2 ∫_0^∞ k dk Φ(k) H(k²)
//! Φ(k) = ∫_0^{2π} dθ B_Δ(k cosθ, k sinθ) cos(k cosθ Δx) cos(k sinθ Δy)
//! H(s) = ∫ dΩ B_T(Ω) cos(Ω Δt) [G(s, Ω) − 1]
//! ```

use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell as Slot;
use core::f64::consts::PI;

use crate::compensation::{apply_compensation, CompensationProfile};
use crate::error::{invalid, Error, Result};
use crate::fingerprint::Fnv;
use crate::opa::{ellipse, gain_functions, EllipseParams, Field, OpaParams, SpectralPoint};
use crate::quad::{integrate, integrate_tail, Estimate, Tolerance};

/// Pixel/time-bin layout of the coarse-grained image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Pixel edge Δ, in units of `l_c`.
    pub delta: f64,
    /// Bin duration T, in units of `T_c`.
    pub t_window: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Lower corner `(x, y, t)` of cell `(0, 0)`.
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn new(delta: f64, t_window: f64, nx: usize, ny: usize, nt: usize) -> Self {
        GridSpec {
            delta,
            t_window,
            nx,
            ny,
            nt,
            origin: [0.0; 3],
        }
    }

    /// A single pixel observed over a single bin.
    pub fn single(delta: f64, t_window: f64) -> Self {
        Self::new(delta, t_window, 1, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid("grid.delta", "must be positive and finite"));
        }
        if !(self.t_window > 0.0) || !self.t_window.is_finite() {
            return Err(invalid("grid.t_window", "must be positive and finite"));
        }
        if self.nx == 0 || self.ny == 0 || self.nt == 0 {
            return Err(invalid("grid", "pixel and bin counts must be at least 1"));
        }
        if !self.origin.iter().all(|x| x.is_finite()) {
            return Err(invalid("grid.origin", "must be finite"));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.nx * self.ny
    }

    /// `(column, row)` of a row-major pixel index.
    pub fn pixel_xy(&self, pixel: usize) -> (usize, usize) {
        (pixel % self.nx, pixel / self.nx)
    }

    pub fn pixel_index(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }

    /// Center `ρ_j` of pixel `j`.
    pub fn pixel_center(&self, pixel: usize) -> (f64, f64) {
        let (x, y) = self.pixel_xy(pixel);
        (
            self.origin[0] + (x as f64 + 0.5) * self.delta,
            self.origin[1] + (y as f64 + 0.5) * self.delta,
        )
    }

    /// Center `t_i` of bin `i`.
    pub fn bin_center(&self, bin: usize) -> f64 {
        self.origin[2] + (bin as f64 + 0.5) * self.t_window
    }

    fn check(&self, c: Cell) -> Result<()> {
        if c.pixel >= self.pixels() || c.bin >= self.nt {
            let (x, y) = self.pixel_xy(c.pixel);
            return Err(Error::CellOutOfRange {
                pixel_x: x,
                pixel_y: y,
                bin: c.bin,
            });
        }
        Ok(())
    }

    /// Center separation `(Δx, Δy, Δt)` from `b` to `a`.
    ///
    /// Taken from integer cell differences, so equal offsets compare equal
    /// bit for bit wherever they occur on the grid.
    pub fn offset(&self, a: Cell, b: Cell) -> Offset {
        let (xa, ya) = self.pixel_xy(a.pixel);
        let (xb, yb) = self.pixel_xy(b.pixel);
        let steps = |p: usize, q: usize| p as f64 - q as f64;
        Offset {
            dx: steps(xa, xb) * self.delta,
            dy: steps(ya, yb) * self.delta,
            dt: steps(a.bin, b.bin) * self.t_window,
        }
    }
}

/// One pixel `j` during one time bin `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub pixel: usize,
    pub bin: usize,
}

impl Cell {
    pub fn new(pixel: usize, bin: usize) -> Self {
        Cell { pixel, bin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellPair {
    pub a: Cell,
    pub b: Cell,
}

impl CellPair {
    pub fn new(a: Cell, b: Cell) -> Self {
        CellPair { a, b }
    }

    pub fn diagonal(c: Cell) -> Self {
        CellPair { a: c, b: c }
    }

    pub fn swapped(&self) -> Self {
        CellPair {
            a: self.b,
            b: self.a,
        }
    }
}

/// Separation between two cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Offset {
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
}

impl Offset {
    pub fn new(dx: f64, dy: f64, dt: f64) -> Self {
        Offset { dx, dy, dt }
    }

    // The integrand is even in each component.
    fn canonical(&self) -> Offset {
        Offset::new(self.dx.abs(), self.dy.abs(), self.dt.abs())
    }
}

/// How a covariance table was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovEntry {
    pub pair: CellPair,
    pub value: f64,
    /// Standard error; Monte Carlo tables only.
    pub stderr: Option<f64>,
}

/// Added-noise covariance over a list of cell pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub method: Method,
    pub entries: Vec<CovEntry>,
    /// Hash of the model, grid and compensation the table was computed for.
    pub fingerprint: u64,
}

impl CovarianceTable {
    pub fn get(&self, pair: CellPair) -> Option<&CovEntry> {
        self.entries.iter().find(|e| e.pair == pair)
    }

    pub fn value(&self, pair: CellPair) -> Option<f64> {
        self.get(pair).map(|e| e.value)
    }

    /// Largest `|C(a, b) − C(b, a)|` over pairs present in both orders.
    pub fn max_asymmetry(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| {
                self.get(e.pair.swapped())
                    .map(|s| (e.value - s.value).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Parameter hash identifying a table's inputs.
pub fn fingerprint(params: &OpaParams, grid: &GridSpec, comp: Option<&CompensationProfile>) -> u64 {
    let mut h = Fnv::new();
    for x in [
        params.sigma,
        params.delta0,
        params.gvm,
        params.gvd,
        params.diffraction,
        params.pump_phase,
        params.omega1,
        params.omega2,
        params.omega_p,
        grid.delta,
        grid.t_window,
        grid.origin[0],
        grid.origin[1],
        grid.origin[2],
    ] {
        h.f64(x);
    }
    for n in [grid.nx, grid.ny, grid.nt] {
        h.u64(n as u64);
    }
    match comp {
        Some(c) => {
            h.u64(c.degree() as u64);
            for &x in c.coeffs() {
                h.f64(x);
            }
        }
        None => {
            h.u64(u64::MAX);
        }
    }
    h.finish()
}

/// Tolerance and budget of the nested quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Relative tolerance on each covariance entry; off-diagonal entries
    /// are measured against the diagonal of the same grid.
    pub tol: f64,
    /// Bisection limit per integration axis.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tol: 1e-4,
            max_subdivisions: 1 << 14,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        QuadConfig {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid("quadrature.tol", "must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(invalid("quadrature.max_subdivisions", "must be at least 1"));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

#[inline]
fn tri(u: f64) -> f64 {
    (1.0 - u.abs()).max(0.0)
}

// One-dimensional factor of the pixel window; integrates to 1 over the line.
#[inline]
fn pixel_window_1d(delta: f64, q: f64) -> f64 {
    let s = sinc(0.5 * q * delta);
    delta / (2.0 * PI) * s * s
}

/// Green function `G = e^{2r} cos²ψ + e^{−2r} sin²ψ`.
pub fn green(e: EllipseParams) -> f64 {
    let c = libm::cos(e.psi);
    let s = libm::sin(e.psi);
    libm::exp(2.0 * e.r) * c * c + libm::exp(-2.0 * e.r) * s * s
}

/// Spatial coarse-graining window `B_Δ(q)`.
pub fn window_spatial(delta: f64, qx: f64, qy: f64) -> f64 {
    pixel_window_1d(delta, qx) * pixel_window_1d(delta, qy)
}

/// Temporal coarse-graining window `B_T(Ω)`.
pub fn window_temporal(t_window: f64, omega: f64) -> f64 {
    pixel_window_1d(t_window, omega)
}

/// Covariance with no EPR correlations (`G ≡ 1`) between cells whose
/// centers are separated by `off`: `2·tri(Δx/Δ)·tri(Δy/Δ)·tri(Δt/T)`.
///
/// Offsets need not be multiples of the pitch.
pub fn classical_covariance(grid: &GridSpec, off: Offset) -> f64 {
    2.0 * tri(off.dx / grid.delta) * tri(off.dy / grid.delta) * tri(off.dt / grid.t_window)
}

// Real-space blur of a triangle: E[tri((d + s·Z)/w)] for a standard normal Z.
fn smoothed_tri(w: f64, d: f64, s: f64) -> f64 {
    let ramp = |m: f64| {
        let z = m / s;
        m * 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
            + s * libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
    };
    (ramp(d + w) - 2.0 * ramp(d) + ramp(d - w)) / w
}

// ∫_ℝ f with an adaptive core around the breakpoints and marched tails,
// all at absolute tolerance `abs`.
fn line_integral<F: Fn(f64) -> f64>(
    f: F,
    bp: &mut Vec<f64>,
    lobe: f64,
    abs: f64,
    max_subdivisions: usize,
) -> Result<Estimate> {
    bp.retain(|x| x.is_finite());
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    let lo = bp[0] - 2.0 * lobe;
    let hi = bp[bp.len() - 1] + 2.0 * lobe;
    let mut points = Vec::with_capacity(3 * bp.len() + 2);
    points.push(lo);
    for &x in bp.iter() {
        for y in [x - lobe, x, x + lobe] {
            if y > lo && y < hi {
                points.push(y);
            }
        }
    }
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let core = integrate(
        &f,
        &points,
        &Tolerance::new(0.0, 0.6 * abs, max_subdivisions),
    )?;
    let width = (hi - lo).max(2.0 * lobe);
    let tail_tol = Tolerance::new(0.0, 0.05 * abs, max_subdivisions);
    let right = integrate_tail(&f, hi, width, true, 0.1 * abs, 60, &tail_tol)?;
    let left = integrate_tail(&f, lo, width, false, 0.1 * abs, 60, &tail_tol)?;
    Ok(core + right + left)
}

/// Nested-quadrature evaluation of `2∫ B_Δ B_T cos(…) (G − 1)` for one offset.
///
/// A Gaussian reference `(G₀ − 1)·ρ(q, Ω)` with `G₀ = G(0, 0)` is taken out
/// of the integrand and added back in closed form, so the numerical part
/// vanishes where the windows peak.
struct Remainder<'a> {
    params: &'a OpaParams,
    comp: Option<&'a CompensationProfile>,
    delta: f64,
    t_window: f64,
    off: Offset,
    max_subdivisions: usize,
    failure: Slot<Option<Error>>,
    g0: f64,
    // Spectral variances of the reference in |q|² and Ω.
    var_q: f64,
    var_t: f64,
    // Bound on |G − 1| over the spectrum.
    bound: f64,
    // ∫B_T cos(ΩΔt) (cos φ, sin φ) for a non-dispersive crystal.
    rotation: (f64, f64),
}

// Cap on the oscillations resolved by the rotation integrals.
const ROTATION_MAX_TURNS: f64 = (1u32 << 17) as f64;

// Smallest |θ′| over |Ω| ≥ l for the phases θ = φ + aΩ, assuming l lies
// beyond every real root of θ′ and θ″.
fn phase_gap(derivative: &[f64], offsets: &[f64], l: f64) -> f64 {
    let eval = |x: f64, a: f64| derivative.iter().rev().fold(0.0, |acc, &d| acc * x + d) + a;
    offsets
        .iter()
        .flat_map(|&a| [eval(l, a).abs(), eval(-l, a).abs()])
        .fold(f64::INFINITY, f64::min)
}

// Cauchy bound on the real roots of a polynomial given low order first.
fn root_bound(coeffs: &[f64]) -> f64 {
    let lead = coeffs[coeffs.len() - 1];
    1.0 + coeffs[..coeffs.len() - 1]
        .iter()
        .map(|c| (c / lead).abs())
        .fold(0.0, f64::max)
}

impl<'a> Remainder<'a> {
    fn new(
        params: &'a OpaParams,
        grid: &GridSpec,
        off: Offset,
        comp: Option<&'a CompensationProfile>,
        cfg: &QuadConfig,
    ) -> Self {
        let scale_t = params.gvm.abs().max(libm::sqrt(params.gvd.abs()));
        let mut rem = Remainder {
            params,
            comp,
            delta: grid.delta,
            t_window: grid.t_window,
            off,
            max_subdivisions: cfg.max_subdivisions,
            failure: Slot::new(None),
            g0: 0.0,
            var_q: 1.0 / params.diffraction,
            var_t: if scale_t > 0.0 {
                1.0 / (scale_t * scale_t)
            } else {
                f64::INFINITY
            },
            bound: libm::exp(2.0 * params.sigma) + 1.0,
            rotation: (tri(off.dt / grid.t_window), 0.0),
        };
        rem.g0 = 1.0 + rem.excess_at(0.0, 0.0);
        rem
    }

    fn fail(&self, e: Error) -> f64 {
        let prev = self.failure.take();
        self.failure.set(prev.or(Some(e)));
        f64::NAN
    }

    fn check(&self) -> Result<()> {
        match self.failure.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    // G − 1 at |q|² = s straight from the pair coefficients:
    // 2|v|² + 2 Re(u v e^{iφ}).
    fn excess_at(&self, s: f64, omega: f64) -> f64 {
        let p = self.params;
        let d = p.delta0 - p.gvm * omega + p.gvd * omega * omega - p.diffraction * s;
        let half = 0.5 * d;
        let (c, sh) = gain_functions(p.sigma * p.sigma - half * half);
        let phase = self.comp.map_or(0.0, |c| c.phase(omega));
        let (sa, ca) = libm::sincos(p.pump_phase + d + phase);
        let v = p.sigma * sh;
        2.0 * v * (v + c * ca + half * sh * sa)
    }

    fn ellipse_at(&self, s: f64, omega: f64) -> EllipseParams {
        let pt = SpectralPoint::new(libm::sqrt(s), 0.0, omega);
        let e = ellipse(self.params, Field::Two, pt);
        match self.comp {
            Some(c) => apply_compensation(e, c, omega),
            None => e,
        }
    }

    fn dispersive(&self) -> bool {
        self.params.gvm != 0.0 || self.params.gvd != 0.0
    }

    fn reference_q(&self, s: f64) -> f64 {
        libm::exp(-0.5 * s / self.var_q)
    }

    fn reference_t(&self, omega: f64) -> f64 {
        if self.dispersive() {
            libm::exp(-0.5 * omega * omega / self.var_t)
        } else {
            1.0
        }
    }

    /// Closed-form value of the subtracted reference.
    fn reference(&self) -> f64 {
        let sq = libm::sqrt(self.params.diffraction);
        let spatial =
            smoothed_tri(self.delta, self.off.dx, sq) * smoothed_tri(self.delta, self.off.dy, sq);
        let temporal = if self.dispersive() {
            smoothed_tri(self.t_window, self.off.dt, libm::sqrt(1.0 / self.var_t))
        } else {
            self.rotation.0
        };
        2.0 * (self.g0 - 1.0) * spatial * temporal
    }

    // For a non-dispersive crystal the ellipse depends on Ω only through
    // the compensating phase; its window average is taken once.
    fn prepare_rotation(&mut self, abs: f64) -> Result<()> {
        let Some(c) = self.comp.filter(|c| !c.is_zero()) else {
            return Ok(());
        };
        if self.dispersive() {
            return Ok(());
        }
        let (t, dt) = (self.t_window, self.off.dt);
        let coeffs = c.coeffs();
        let degree = coeffs.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
        if degree == 1 {
            // A linear phase is a pure delay.
            let c1 = coeffs[0];
            self.rotation = (0.5 * (tri((dt + c1) / t) + tri((dt - c1) / t)), 0.0);
            return Ok(());
        }
        // φ′ and its own derivative, low order first.
        let derivative: Vec<f64> = (1..=degree).map(|m| m as f64 * coeffs[m - 1]).collect();
        let second: Vec<f64> = (1..degree).map(|m| m as f64 * derivative[m]).collect();
        let offsets = [dt, -dt, dt + t, dt - t, -dt + t, -dt - t];
        // Beyond `l` every phase of B_T cos(ΩΔt) e^{iφ} is monotone, so
        // the dropped tails are bounded by the envelope over |θ′|.
        let lobe = 2.0 * PI / t;
        let mut l = 8.0 * lobe;
        for &a in &offsets {
            let mut p = derivative.clone();
            p[0] += a;
            l = l.max(root_bound(&p));
        }
        if second.len() > 1 {
            l = l.max(root_bound(&second));
        }
        let turns = |l: f64| {
            let swing = c.phase(l).abs().max(c.phase(-l).abs());
            (l * (t + dt) + swing) / PI
        };
        loop {
            let envelope = 1.0 / (PI * t * l * l);
            let gap = phase_gap(&derivative, &offsets, l);
            if 12.0 * envelope < abs * gap {
                break;
            }
            if turns(l) > ROTATION_MAX_TURNS {
                return Err(Error::QuadratureNotConverged {
                    error_estimate: 12.0 * envelope / gap,
                    target: abs,
                });
            }
            l *= 2.0;
        }
        let panels = libm::ceil(2.0 * l / lobe).min(4096.0) as usize;
        let points: Vec<f64> = (0..=panels)
            .map(|i| -l + 2.0 * l * i as f64 / panels as f64)
            .collect();
        let tol = Tolerance::new(0.0, abs, self.max_subdivisions.max(1 << 20));
        let w = |x: f64| window_temporal(t, x) * libm::cos(x * dt);
        let cos = integrate(|x| w(x) * libm::cos(c.phase(x)), &points, &tol)?;
        let sin = integrate(|x| w(x) * libm::sin(c.phase(x)), &points, &tol)?;
        self.rotation = (cos.value, sin.value);
        Ok(())
    }

    // Ω at which the field-2 ellipse reads mismatch `d` for |q|² = s.
    fn omega_roots(&self, s: f64, d: f64, out: &mut Vec<f64>) {
        // D(−q, −Ω) = δ₀ − τΩ + βΩ² − ηs
        let p = self.params;
        let c = p.delta0 - p.diffraction * s - d;
        if p.gvd == 0.0 {
            if p.gvm != 0.0 {
                out.push(c / p.gvm);
            }
            return;
        }
        let disc = p.gvm * p.gvm - 4.0 * p.gvd * c;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            out.push((p.gvm + sq) / (2.0 * p.gvd));
            out.push((p.gvm - sq) / (2.0 * p.gvd));
        }
    }

    /// `∫dΩ B_T cos(ΩΔt) [G − 1 − (G₀ − 1) ρ]` at |q|² = s, to absolute `abs`.
    fn temporal(&self, s: f64, abs: f64) -> f64 {
        let t = self.t_window;
        let dt = self.off.dt;
        let sub = (self.g0 - 1.0) * self.reference_q(s);
        if !self.dispersive() {
            let e = self.ellipse_at(s, 0.0);
            let sh = libm::sinh(e.r);
            let (a, b) = (2.0 * sh * sh, libm::sinh(2.0 * e.r));
            let (c, sn) = self.rotation;
            let turn = libm::cos(2.0 * e.psi) * c - libm::sin(2.0 * e.psi) * sn;
            return a * tri(dt / t) + b * turn - sub * self.rotation.0;
        }
        let f = |w: f64| {
            window_temporal(t, w)
                * libm::cos(w * dt)
                * (self.excess_at(s, w) - sub * self.reference_t(w))
        };
        let mut bp = vec![0.0];
        let sigma = self.params.sigma;
        for d in [-2.0 * sigma, 0.0, 2.0 * sigma] {
            self.omega_roots(s, d, &mut bp);
        }
        match line_integral(f, &mut bp, 2.0 * PI / t, abs, self.max_subdivisions) {
            Ok(v) => v.value,
            Err(e) => self.fail(e),
        }
    }

    /// `Φ(k)`, to absolute `abs`.
    fn angular(&self, k: f64, abs: f64) -> Estimate {
        let (d, dx, dy) = (self.delta, self.off.dx, self.off.dy);
        let f = |th: f64| {
            let (s, c) = (libm::sin(th), libm::cos(th));
            pixel_window_1d(d, k * c)
                * pixel_window_1d(d, k * s)
                * libm::cos(k * c * dx)
                * libm::cos(k * s * dy)
        };
        // One panel per side lobe of the sinc², up to a cap.
        let osc = k * (d + dx.abs().max(dy.abs())) / PI;
        let panels = (libm::ceil(osc) as usize).clamp(1, 512);
        let points: Vec<f64> = (0..=panels)
            .map(|i| 0.5 * PI * i as f64 / panels as f64)
            .collect();
        let t = Tolerance::new(0.0, 0.25 * abs, self.max_subdivisions);
        match integrate(f, &points, &t) {
            Ok(v) => Estimate {
                value: 4.0 * v.value,
                error: 4.0 * v.error,
                ..v
            },
            Err(e) => Estimate {
                value: self.fail(e),
                ..Estimate::default()
            },
        }
    }

    /// `2∫k dk Φ(k) H(k²)` to absolute `abs`.
    fn radial(&self, abs: f64) -> Result<Estimate> {
        let p = self.params;
        let sigma = p.sigma;
        let lobe = 2.0 * PI / self.delta;
        let mut bp = vec![0.0, lobe, 2.0 * lobe, libm::sqrt(2.0 * self.var_q)];
        for d in [-2.0 * sigma, 0.0, 2.0 * sigma] {
            let s = (p.delta0 - d) / p.diffraction;
            if s > 0.0 {
                bp.push(libm::sqrt(s));
            }
        }
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let k_core = 1.5 * bp[bp.len() - 1];
        bp.push(k_core);

        // Error allowance per unit k for the inner integrals; sums to abs/4.
        let allowance = |k: f64| 0.25 * abs * k_core / ((k_core + k) * (k_core + k));
        let f = |k: f64| {
            if k == 0.0 {
                return 0.0;
            }
            let eps = allowance(k);
            // A single panel pass bounds Φ; refine only if H turns out
            // large enough for the remaining error to matter.
            let mut phi = self.angular(k, f64::INFINITY);
            let weight = 2.0 * k * (phi.value.abs() + phi.error);
            if weight * self.bound < 0.1 * eps {
                return 0.0;
            }
            let h = self.temporal(k * k, 0.5 * eps / weight);
            let reach = 2.0 * k * h.abs();
            if phi.error * reach > 0.25 * eps {
                phi = self.angular(k, 0.25 * eps / reach);
            }
            2.0 * k * phi.value * h
        };
        let core = integrate(
            &f,
            &bp,
            &Tolerance::new(0.0, 0.5 * abs, self.max_subdivisions),
        )
        .map_err(|e| self.failure.take().unwrap_or(e))?;
        self.check()?;
        let tail_tol = Tolerance::new(0.0, 0.05 * abs, self.max_subdivisions);
        let tail = integrate_tail(&f, k_core, k_core, true, 0.05 * abs, 60, &tail_tol)
            .map_err(|e| self.failure.take().unwrap_or(e))?;
        self.check()?;
        Ok(core + tail)
    }
}

/// Value of one covariance entry by quadrature.
fn entry(
    params: &OpaParams,
    grid: &GridSpec,
    off: Offset,
    comp: Option<&CompensationProfile>,
    cfg: &QuadConfig,
    diagonal: f64,
) -> Result<f64> {
    let classical = classical_covariance(grid, off);
    if params.sigma == 0.0 {
        return Ok(classical);
    }
    let mut rem = Remainder::new(params, grid, off, comp, cfg);
    // Tolerance is relative to max(|C|, C_diag), floored at 10⁻³ of the
    // classical diagonal. The first pass assumes the diagonal scale and is
    // repeated once |C| is known.
    let floor = diagonal.abs().max(2e-3);
    let mut scale = floor.max(2.0);
    loop {
        rem.prepare_rotation(0.1 * cfg.tol * scale / rem.bound)?;
        let known = classical + rem.reference();
        let value = known + rem.radial(cfg.tol * scale)?.value;
        let next = floor.max(value.abs());
        if next >= 0.5 * scale {
            return Ok(value);
        }
        scale = next;
    }
}

// Diagonal entry, then the requested offset scaled against it.
fn entry_scaled(
    params: &OpaParams,
    grid: &GridSpec,
    off: Offset,
    comp: Option<&CompensationProfile>,
    cfg: &QuadConfig,
    cache: &mut Vec<(Offset, f64)>,
) -> Result<f64> {
    let mut lookup = |off: Offset, diagonal: f64| -> Result<f64> {
        if let Some(&(_, v)) = cache.iter().find(|(o, _)| *o == off) {
            return Ok(v);
        }
        let v = entry(params, grid, off, comp, cfg, diagonal)?;
        cache.push((off, v));
        Ok(v)
    };
    let diagonal = lookup(Offset::default(), 0.0)?;
    if off == Offset::default() {
        return Ok(diagonal);
    }
    lookup(off, diagonal)
}

/// Added-noise covariance for each requested cell pair, by nested
/// adaptive quadrature at relative tolerance `cfg.tol`.
///
/// The error of an entry is held below `tol·max(|C|, C_diag)`, with
/// `C_diag` the diagonal entry of the same grid.
///
/// Entries depend only on the center separation; equal separations are
/// computed once and reused, so the table is bit-identical for any pair
/// order.
pub fn added_noise_covariance(
    params: &OpaParams,
    grid: &GridSpec,
    pairs: &[CellPair],
    comp: Option<&CompensationProfile>,
    cfg: &QuadConfig,
) -> Result<CovarianceTable> {
    params.validate()?;
    grid.validate()?;
    cfg.validate()?;
    let mut cache: Vec<(Offset, f64)> = Vec::new();
    let mut entries = Vec::with_capacity(pairs.len());
    for &pair in pairs {
        grid.check(pair.a)?;
        grid.check(pair.b)?;
        let off = grid.offset(pair.a, pair.b).canonical();
        let value = entry_scaled(params, grid, off, comp, cfg, &mut cache)?;
        entries.push(CovEntry {
            pair,
            value,
            stderr: None,
        });
    }
    Ok(CovarianceTable {
        method: Method::Quadrature,
        entries,
        fingerprint: fingerprint(params, grid, comp),
    })
}

/// Covariance for an arbitrary center separation (not necessarily on the grid).
pub fn covariance_at_offset(
    params: &OpaParams,
    grid: &GridSpec,
    off: Offset,
    comp: Option<&CompensationProfile>,
    cfg: &QuadConfig,
) -> Result<f64> {
    params.validate()?;
    grid.validate()?;
    cfg.validate()?;
    entry_scaled(params, grid, off.canonical(), comp, cfg, &mut Vec::new())
}

/// One row of a diagonal scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub delta: f64,
    pub t_window: f64,
    pub c_diag: f64,
}

/// Diagonal covariance `C(j, j; i, i)` for every `(Δ, T)` combination,
/// ordered by `T` then `Δ`.
pub fn diagonal_scan(
    params: &OpaParams,
    d_values: &[f64],
    t_values: &[f64],
    comp: Option<&CompensationProfile>,
    cfg: &QuadConfig,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(d_values.len() * t_values.len());
    for &t in t_values {
        for &d in d_values {
            let grid = GridSpec::single(d, t);
            let c_diag = covariance_at_offset(params, &grid, Offset::default(), comp, cfg)?;
            rows.push(ScanRow {
                delta: d,
                t_window: t,
                c_diag,
            });
        }
    }
    Ok(rows)
}
