//! Phase-space Monte Carlo of the EPR source and the added-noise field.
//!
//! Vacuum amplitudes are drawn in the symmetric (Wigner) ordering with
//! variance ½ per discrete mode, scaled by `1/√dV` so that the lattice sum
//! `Σ dV` reproduces the continuum `δ(k − k′)`. Real-space fields follow
//! `E(ρ, t) = (2π)^{−3/2} ∫ e(q, Ω) e^{i(q·ρ − Ωt)} d²q dΩ` on a periodic
//! lattice whose cells are centred at `(j + ½)h`.

use std::f64::consts::PI;
use std::sync::Arc;

use holotel_core::{
    bogoliubov, CellPair, CompensationProfile, CovEntry, CovarianceTable, GridSpec, Method,
    OpaParams, PairCoeffs, SpectralPoint,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::stats::{jackknife_covariance, pairwise_sum};

/// Minimum number of lattice cells across a pixel edge or a time bin.
pub const MIN_CELLS: usize = 8;

const TAG_EPR: u64 = 0x4550_525f_7061_6972;
const TAG_INPUT: u64 = 0x696e_7075_745f_7663;
const TAG_PAIR: u64 = 0x7061_6972_5f63_6865;

/// Counter-based stream: the key is `(seed, tag)`, the stream number is
/// the sample index, so any sample can be regenerated on its own.
pub(crate) fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Circular complex Gaussian with `E|z|² = 2·scale²`.
pub(crate) fn complex_normal(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

/// Symmetric lattice of spectral points, `qx, qy = m·dq` and `Ω = n·dΩ`
/// with `|m| ≤ (nq − 1)/2`, `|n| ≤ (nw − 1)/2`.
///
/// Odd point counts make the lattice contain the origin and close it under
/// negation. The matching real-space lattice has `nq × nq × nw` cells of
/// edge `h = 2π/(nq·dq)` and duration `2π/(nw·dΩ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    nq: usize,
    dq: f64,
    nw: usize,
    dw: f64,
}

impl SpectralGrid {
    pub fn new(nq: usize, dq: f64, nw: usize, dw: f64) -> Result<Self> {
        if nq.is_multiple_of(2) || nw.is_multiple_of(2) {
            return Err(Error::config("mc.lattice", "point counts must be odd"));
        }
        if !(dq > 0.0 && dq.is_finite() && dw > 0.0 && dw.is_finite()) {
            return Err(Error::config("mc.lattice", "spacings must be positive"));
        }
        Ok(SpectralGrid { nq, dq, nw, dw })
    }

    /// Lattice with real-space spacing `h` (and `ht` in time) over a
    /// periodic box of at least `span × span × span_t`.
    pub fn from_real_space(h: f64, span: f64, ht: f64, span_t: f64) -> Result<Self> {
        let odd = |x: f64| {
            let n = x.ceil() as usize;
            n + 1 - n % 2
        };
        let nq = odd(span / h - 1e-9);
        let nw = odd(span_t / ht - 1e-9);
        Self::new(
            nq,
            2.0 * PI / (nq as f64 * h),
            nw,
            2.0 * PI / (nw as f64 * ht),
        )
    }

    /// Default lattice for a pixel grid: at least [`MIN_CELLS`] cells per
    /// pixel edge, per bin and per coherence length/time, a whole number
    /// of cells per pixel, and a periodic box twice the grid extent (at
    /// least 12 coherence lengths across, 8 coherence times long).
    pub fn for_grid(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let spacing = |width: f64| {
            let cells = ((MIN_CELLS as f64) * width.max(1.0) - 1e-9)
                .ceil()
                .max(MIN_CELLS as f64);
            width / cells
        };
        let h = spacing(grid.delta);
        let ht = spacing(grid.t_window);
        let extent = grid.nx.max(grid.ny) as f64 * grid.delta;
        let extent_t = grid.nt as f64 * grid.t_window;
        Self::from_real_space(h, (2.0 * extent).max(12.0), ht, (2.0 * extent_t).max(8.0))
    }

    pub fn len(&self) -> usize {
        self.nq * self.nq * self.nw
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(nq, nq, nw)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nq, self.nq, self.nw)
    }

    /// `(dq, dΩ)`.
    pub fn spacing(&self) -> (f64, f64) {
        (self.dq, self.dw)
    }

    /// Real-space cell edge and duration.
    pub fn real_spacing(&self) -> (f64, f64) {
        (
            2.0 * PI / (self.nq as f64 * self.dq),
            2.0 * PI / (self.nw as f64 * self.dw),
        )
    }

    pub fn cell_volume(&self) -> f64 {
        self.dq * self.dq * self.dw
    }

    fn half_q(&self) -> i64 {
        (self.nq as i64 - 1) / 2
    }

    fn half_w(&self) -> i64 {
        (self.nw as i64 - 1) / 2
    }

    /// Signed lattice coordinates `(m_x, m_y, n)` of a flat index.
    pub fn coords(&self, idx: usize) -> (i64, i64, i64) {
        let iw = idx % self.nw;
        let rest = idx / self.nw;
        let iy = rest % self.nq;
        let ix = rest / self.nq;
        (
            ix as i64 - self.half_q(),
            iy as i64 - self.half_q(),
            iw as i64 - self.half_w(),
        )
    }

    pub fn index(&self, mx: i64, my: i64, n: i64) -> usize {
        let ix = (mx + self.half_q()) as usize;
        let iy = (my + self.half_q()) as usize;
        let iw = (n + self.half_w()) as usize;
        (ix * self.nq + iy) * self.nw + iw
    }

    pub fn point(&self, idx: usize) -> SpectralPoint {
        let (mx, my, n) = self.coords(idx);
        SpectralPoint::new(mx as f64 * self.dq, my as f64 * self.dq, n as f64 * self.dw)
    }

    /// Index of `−k`; the storage order makes this a reversal.
    pub fn neg(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }
}

/// Vacuum amplitudes `a₁(k)`, `a₂(k)` of one realization.
#[derive(Debug, Clone)]
pub struct Vacuum {
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
}

/// Draws the vacuum of sample `index`: for each lattice point `k` in
/// storage order, `a₁(k)` then `a₂(−k)`.
pub fn draw_vacuum(lattice: &SpectralGrid, seed: u64, index: u64) -> Vacuum {
    let n = lattice.len();
    let scale = 0.5 / lattice.cell_volume().sqrt();
    let mut rng = stream(seed, TAG_EPR, index);
    let mut a1 = vec![Complex64::default(); n];
    let mut a2 = vec![Complex64::default(); n];
    for k in 0..n {
        a1[k] = complex_normal(&mut rng, scale);
        a2[lattice.neg(k)] = complex_normal(&mut rng, scale);
    }
    Vacuum { a1, a2 }
}

/// Bogoliubov coefficients of every lattice pair plus the compensating
/// phase seen by field 2 at each point.
#[derive(Debug, Clone)]
pub struct PairTable {
    lattice: SpectralGrid,
    uv: Vec<PairCoeffs>,
    comp: Vec<Complex64>,
}

impl PairTable {
    pub fn new(
        params: &OpaParams,
        comp: Option<&CompensationProfile>,
        lattice: &SpectralGrid,
    ) -> Result<Self> {
        params.validate()?;
        let uv = (0..lattice.len())
            .map(|k| bogoliubov(params, lattice.point(k)))
            .collect();
        let comp = (0..lattice.len())
            .map(|k| match comp {
                Some(p) if !p.is_zero() => {
                    Complex64::from_polar(1.0, p.phase(lattice.point(k).omega))
                }
                _ => Complex64::new(1.0, 0.0),
            })
            .collect();
        Ok(PairTable {
            lattice: *lattice,
            uv,
            comp,
        })
    }

    pub fn lattice(&self) -> &SpectralGrid {
        &self.lattice
    }

    /// Coefficients `(p, r)` with `f(k) = p(k) a₂(k) + r(k) conj(a₁(−k))`.
    pub fn noise_coefficients(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        (0..self.lattice.len())
            .map(|k| {
                let pc = &self.uv[self.lattice.neg(k)];
                let c = self.comp[k];
                (c * pc.u2m + pc.v1.conj(), c * pc.v2m + pc.u1.conj())
            })
            .unzip()
    }

    /// `E|f(k)|²·dV`: the added-noise spectrum `G` at each lattice point.
    pub fn noise_density(&self) -> Vec<f64> {
        let (p, r) = self.noise_coefficients();
        p.iter()
            .zip(&r)
            .map(|(p, r)| 0.5 * (p.norm_sqr() + r.norm_sqr()))
            .collect()
    }
}

/// One realization of the two EPR beams over a [`SpectralGrid`].
#[derive(Debug, Clone)]
pub struct SpectralSample {
    pub lattice: SpectralGrid,
    pub e1: Vec<Complex64>,
    pub e2: Vec<Complex64>,
    pub seed: u64,
    pub index: u64,
}

impl SpectralSample {
    /// Multiplies both beams by a complex factor.
    pub fn scaled(&self, alpha: Complex64) -> SpectralSample {
        SpectralSample {
            e1: self.e1.iter().map(|z| z * alpha).collect(),
            e2: self.e2.iter().map(|z| z * alpha).collect(),
            ..self.clone()
        }
    }
}

/// Applies the pair transformation to a vacuum draw.
///
/// `e₁(k) = u a₁(k) + v a₂†(−k)` and `e₂(−k) = u a₂(−k) + v a₁†(k)` with
/// `(u, v)` of the pair labelled `k`; field 2 then picks up the
/// compensating phase.
pub fn squeeze(table: &PairTable, vac: &Vacuum, seed: u64, index: u64) -> SpectralSample {
    let lat = table.lattice;
    let n = lat.len();
    let mut e1 = vec![Complex64::default(); n];
    let mut e2 = vec![Complex64::default(); n];
    for k in 0..n {
        let m = lat.neg(k);
        let c = &table.uv[k];
        e1[k] = c.u1 * vac.a1[k] + c.v1 * vac.a2[m].conj();
        e2[m] = (c.u2m * vac.a2[m] + c.v2m * vac.a1[k].conj()) * table.comp[m];
    }
    SpectralSample {
        lattice: lat,
        e1,
        e2,
        seed,
        index,
    }
}

/// Sample `index` of the EPR source keyed by `seed`.
pub fn sample_epr(
    params: &OpaParams,
    lattice: &SpectralGrid,
    seed: u64,
    index: u64,
) -> Result<SpectralSample> {
    let table = PairTable::new(params, None, lattice)?;
    Ok(squeeze(
        &table,
        &draw_vacuum(lattice, seed, index),
        seed,
        index,
    ))
}

/// Spectral noise `f(k) = e₂(k) + conj(e₁(−k))`.
pub fn noise_spectrum(sample: &SpectralSample) -> Vec<Complex64> {
    let lat = &sample.lattice;
    (0..lat.len())
        .map(|k| sample.e2[k] + sample.e1[lat.neg(k)].conj())
        .collect()
}

/// Variances of a single pair's combined amplitude along its ellipse axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSqueezing {
    /// Quadrature variance along `ψ + π/2`.
    pub minor: f64,
    /// Quadrature variance along `ψ`.
    pub major: f64,
    /// The same estimator with the pump off.
    pub vacuum: f64,
    /// `minor / vacuum` and its jackknife standard error.
    pub minor_ratio: (f64, f64),
    pub major_ratio: (f64, f64),
    /// `(minor/vacuum)·(major/vacuum)` and its standard error.
    pub product: (f64, f64),
}

/// Samples the pair `{a₁(q, Ω), a₂(−q, −Ω)}` and measures
/// `s_θ = e₁(q, Ω) + e^{2iθ} e₂†(−q, −Ω)` along its real quadrature.
///
/// `θ = ψ₁(q, Ω)` gives the major axis and `θ = ψ₁ + π/2` the minor one;
/// the vacuum level is the same statistic at σ = 0 on the same draws.
pub fn pair_squeezing_check(
    params: &OpaParams,
    pt: SpectralPoint,
    n_samples: usize,
    seed: u64,
) -> Result<PairSqueezing> {
    params.validate()?;
    if n_samples < 1000 {
        return Err(Error::config(
            "mc.samples",
            "pair check needs at least 1000 samples",
        ));
    }
    let c = bogoliubov(params, pt);
    let psi = holotel_core::ellipse(params, holotel_core::Field::One, pt).psi;
    let rows: Vec<[f64; 3]> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, TAG_PAIR, i);
            let a1 = complex_normal(&mut rng, 0.5);
            let a2 = complex_normal(&mut rng, 0.5);
            let e1 = c.u1 * a1 + c.v1 * a2.conj();
            let e2 = c.u2m * a2 + c.v2m * a1.conj();
            let x = |theta: f64, e1: Complex64, e2: Complex64| {
                2.0 * (e1 + Complex64::from_polar(1.0, 2.0 * theta) * e2.conj()).re
            };
            let major = x(psi, e1, e2);
            let minor = x(psi + 0.5 * PI, e1, e2);
            let vac = x(psi, a1, a2);
            [minor * minor, major * major, vac * vac]
        })
        .collect();
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let (minor, major, vacuum) = (col(0), col(1), col(2));
    let n = n_samples as f64;
    let mean = |v: &[f64]| pairwise_sum(v) / n;
    let (m_min, m_maj, m_vac) = (mean(&minor), mean(&major), mean(&vacuum));
    let ratio = |num: &[f64], s_num: f64| {
        crate::stats::jackknife(n_samples, |skip| {
            let drop = |v: &[f64], s: f64| match skip {
                Some(i) => (s * n - v[i]) / (n - 1.0),
                None => s,
            };
            drop(num, s_num) / drop(&vacuum, m_vac)
        })
    };
    let product = crate::stats::jackknife(n_samples, |skip| {
        let drop = |v: &[f64], s: f64| match skip {
            Some(i) => (s * n - v[i]) / (n - 1.0),
            None => s,
        };
        let vac = drop(&vacuum, m_vac);
        drop(&minor, m_min) * drop(&major, m_maj) / (vac * vac)
    });
    Ok(PairSqueezing {
        minor: m_min,
        major: m_maj,
        vacuum: m_vac,
        minor_ratio: ratio(&minor, m_min),
        major_ratio: ratio(&major, m_maj),
        product,
    })
}

/// Complex field on the periodic real-space lattice.
#[derive(Debug, Clone)]
pub struct RealField {
    pub lattice: SpectralGrid,
    /// Values at cell centres, `[x][y][t]` order.
    pub data: Vec<Complex64>,
}

impl RealField {
    pub fn at(&self, jx: usize, jy: usize, jt: usize) -> Complex64 {
        let (nq, _, nw) = self.lattice.shape();
        self.data[(jx * nq + jy) * nw + jt]
    }
}

fn fft_axis(data: &mut [Complex64], shape: [usize; 3], axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let len = shape[axis];
    let stride = match axis {
        0 => shape[1] * shape[2],
        1 => shape[2],
        _ => 1,
    };
    let mut line = vec![Complex64::default(); len];
    let outer: Vec<usize> = (0..data.len())
        .filter(|&i| (i / stride) % len == 0)
        .collect();
    for start in outer {
        for (j, z) in line.iter_mut().enumerate() {
            *z = data[start + j * stride];
        }
        fft.process(&mut line);
        for (j, z) in line.iter().enumerate() {
            data[start + j * stride] = *z;
        }
    }
}

/// Inverse Fourier synthesis of a spectral array onto the real-space
/// lattice.
pub fn synthesize(lattice: &SpectralGrid, spectrum: &[Complex64]) -> RealField {
    let (nq, _, nw) = lattice.shape();
    let norm = lattice.cell_volume() / (2.0 * PI).powf(1.5);
    let mut buf = vec![Complex64::default(); spectrum.len()];
    let wrap = |m: i64, n: usize| m.rem_euclid(n as i64) as usize;
    for (k, &f) in spectrum.iter().enumerate() {
        let (mx, my, n) = lattice.coords(k);
        // Cell centres sit at (j + ½)h.
        let shift = PI * (mx as f64 / nq as f64 + my as f64 / nq as f64 - n as f64 / nw as f64);
        let idx = (wrap(mx, nq) * nq + wrap(my, nq)) * nw + wrap(n, nw);
        buf[idx] = f * Complex64::from_polar(norm, shift);
    }
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(nq);
    let fwd = planner.plan_fft_forward(nw);
    let shape = [nq, nq, nw];
    fft_axis(&mut buf, shape, 0, &inv);
    fft_axis(&mut buf, shape, 1, &inv);
    fft_axis(&mut buf, shape, 2, &fwd);
    RealField {
        lattice: *lattice,
        data: buf,
    }
}

/// Real-space added-noise field `F = E₂ + E₁†` of one sample.
pub fn synthesize_noise(sample: &SpectralSample) -> RealField {
    synthesize(&sample.lattice, &noise_spectrum(sample))
}

/// Field averaged over each pixel and bin, normalized by `1/√(S·T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField {
    pub grid: GridSpec,
    /// `[bin][pixel]` order.
    pub values: Vec<Complex64>,
}

impl PixelField {
    pub fn get(&self, pixel: usize, bin: usize) -> Complex64 {
        self.values[bin * self.grid.pixels() + pixel]
    }
}

// Cells overlapping [lo, lo + width) on a periodic axis of `n` cells of
// size `h`: (wrapped index, unwrapped centre, overlap fraction).
fn axis_cells(lo: f64, width: f64, h: f64, n: usize) -> Vec<(usize, f64, f64)> {
    let a = lo / h;
    let b = (lo + width) / h;
    let snap = |x: f64| {
        if (x - x.round()).abs() < 1e-9 {
            x.round()
        } else {
            x
        }
    };
    let (a, b) = (snap(a), snap(b));
    let mut out = Vec::new();
    let mut j = a.floor() as i64;
    while (j as f64) < b {
        let w = (b.min(j as f64 + 1.0) - a.max(j as f64)).max(0.0);
        if w > 0.0 {
            out.push((j.rem_euclid(n as i64) as usize, (j as f64 + 0.5) * h, w));
        }
        j += 1;
    }
    out
}

fn check_resolution(grid: &GridSpec, lattice: &SpectralGrid) -> Result<()> {
    grid.validate()?;
    let (h, ht) = lattice.real_spacing();
    let (nq, _, nw) = lattice.shape();
    let cells = grid.delta / h;
    let cells_t = grid.t_window / ht;
    if cells < MIN_CELLS as f64 - 1e-9 || cells_t < MIN_CELLS as f64 - 1e-9 {
        return Err(Error::GridTooCoarse {
            reason: format!(
                "{cells:.3} cells per pixel and {cells_t:.3} per bin, need {MIN_CELLS}"
            ),
        });
    }
    let span = grid.nx.max(grid.ny) as f64 * grid.delta;
    let span_t = grid.nt as f64 * grid.t_window;
    if span > nq as f64 * h + 1e-9 || span_t > nw as f64 * ht + 1e-9 {
        return Err(Error::GridTooCoarse {
            reason: "pixel grid exceeds the periodic box".into(),
        });
    }
    Ok(())
}

/// Averages a real-space field over every pixel and bin of `grid`, with
/// fractional weights for cells cut by a pixel edge.
pub fn coarse_grain(field: &RealField, grid: &GridSpec) -> Result<PixelField> {
    check_resolution(grid, &field.lattice)?;
    let (h, ht) = field.lattice.real_spacing();
    let (nq, _, nw) = field.lattice.shape();
    let norm = h * h * ht / (grid.delta * grid.delta * grid.t_window).sqrt();
    let xs: Vec<_> = (0..grid.nx)
        .map(|x| axis_cells(grid.origin[0] + x as f64 * grid.delta, grid.delta, h, nq))
        .collect();
    let ys: Vec<_> = (0..grid.ny)
        .map(|y| axis_cells(grid.origin[1] + y as f64 * grid.delta, grid.delta, h, nq))
        .collect();
    let ts: Vec<_> = (0..grid.nt)
        .map(|t| {
            axis_cells(
                grid.origin[2] + t as f64 * grid.t_window,
                grid.t_window,
                ht,
                nw,
            )
        })
        .collect();
    let mut values = Vec::with_capacity(grid.pixels() * grid.nt);
    for tc in &ts {
        for p in 0..grid.pixels() {
            let (px, py) = grid.pixel_xy(p);
            let mut terms = Vec::with_capacity(xs[px].len() * ys[py].len() * tc.len());
            for &(jx, _, wx) in &xs[px] {
                for &(jy, _, wy) in &ys[py] {
                    for &(jt, _, wt) in tc {
                        terms.push(field.at(jx, jy, jt) * (wx * wy * wt));
                    }
                }
            }
            values.push(pairwise_complex(&terms) * norm);
        }
    }
    Ok(PixelField {
        grid: *grid,
        values,
    })
}

fn pairwise_complex(v: &[Complex64]) -> Complex64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_complex(&v[..mid]) + pairwise_complex(&v[mid..])
}

/// Homodyne quadrature `X_φ = A e^{−iφ} + c.c.` of every pixel and bin.
pub fn quadrature(pix: &PixelField, phi: f64) -> Vec<f64> {
    let rot = Complex64::from_polar(1.0, -phi);
    pix.values.iter().map(|a| 2.0 * (a * rot).re).collect()
}

/// Pixel-window projector: `A(j, i) = dV Σ_k W_j(q) W_i(Ω) f(k)`.
///
/// The windows are the exact lattice sums used by [`coarse_grain`], so
/// projecting a spectrum equals synthesizing and coarse-graining it.
#[derive(Debug, Clone)]
pub struct Projector {
    lattice: SpectralGrid,
    grid: GridSpec,
    wx: Vec<Vec<Complex64>>,
    wy: Vec<Vec<Complex64>>,
    wt: Vec<Vec<Complex64>>,
}

impl Projector {
    pub fn new(lattice: &SpectralGrid, grid: &GridSpec) -> Result<Self> {
        check_resolution(grid, lattice)?;
        let (h, ht) = lattice.real_spacing();
        let (nq, _, nw) = lattice.shape();
        let (dq, dw) = lattice.spacing();
        let window = |lo: f64, width: f64, h: f64, n: usize, dk: f64, half: i64, sign: f64| {
            let cells = axis_cells(lo, width, h, n);
            let norm = h / (2.0 * PI * width).sqrt();
            (0..n as i64)
                .map(|m| {
                    let k = (m - half) as f64 * dk;
                    let terms: Vec<Complex64> = cells
                        .iter()
                        .map(|&(_, x, w)| Complex64::from_polar(w * norm, sign * k * x))
                        .collect();
                    pairwise_complex(&terms)
                })
                .collect::<Vec<_>>()
        };
        let hq = lattice.half_q();
        let hw = lattice.half_w();
        let wx = (0..grid.nx)
            .map(|x| {
                window(
                    grid.origin[0] + x as f64 * grid.delta,
                    grid.delta,
                    h,
                    nq,
                    dq,
                    hq,
                    1.0,
                )
            })
            .collect();
        let wy = (0..grid.ny)
            .map(|y| {
                window(
                    grid.origin[1] + y as f64 * grid.delta,
                    grid.delta,
                    h,
                    nq,
                    dq,
                    hq,
                    1.0,
                )
            })
            .collect();
        let wt = (0..grid.nt)
            .map(|t| {
                window(
                    grid.origin[2] + t as f64 * grid.t_window,
                    grid.t_window,
                    ht,
                    nw,
                    dw,
                    hw,
                    -1.0,
                )
            })
            .collect();
        Ok(Projector {
            lattice: *lattice,
            grid: *grid,
            wx,
            wy,
            wt,
        })
    }

    /// Projects `spectrum` onto the listed `(pixel, bin)` cells.
    pub fn project(&self, spectrum: &[Complex64], cells: &[(usize, usize)]) -> Vec<Complex64> {
        let nw = self.lattice.shape().2;
        self.finish(cells, |w| {
            spectrum
                .chunks_exact(nw)
                .map(|line| line.iter().zip(w).map(|(f, w)| f * w).sum())
                .collect()
        })
    }

    /// Same as projecting [`noise_spectrum`] of the squeezed vacuum, without
    /// forming the spectrum.
    pub fn project_noise(
        &self,
        coeffs: &(Vec<Complex64>, Vec<Complex64>),
        vac: &Vacuum,
        cells: &[(usize, usize)],
    ) -> Vec<Complex64> {
        let nw = self.lattice.shape().2;
        let last = self.lattice.len() - 1;
        let (p, r) = coeffs;
        self.finish(cells, |w| {
            (0..self.lattice.len() / nw)
                .map(|line| {
                    let base = line * nw;
                    let mut acc = Complex64::default();
                    for (iw, w) in w.iter().enumerate() {
                        let k = base + iw;
                        let f = p[k] * vac.a2[k] + r[k] * vac.a1[last - k].conj();
                        acc += f * w;
                    }
                    acc
                })
                .collect()
        })
    }

    // Contracts Ω once per bin with `contract`, then qy and qx per cell.
    fn finish<C>(&self, cells: &[(usize, usize)], contract: C) -> Vec<Complex64>
    where
        C: Fn(&[Complex64]) -> Vec<Complex64>,
    {
        let nq = self.lattice.shape().0;
        let dv = self.lattice.cell_volume();
        let mut bins: Vec<usize> = cells.iter().map(|c| c.1).collect();
        bins.sort_unstable();
        bins.dedup();
        let by_bin: Vec<Vec<Complex64>> = bins.iter().map(|&b| contract(&self.wt[b])).collect();
        cells
            .iter()
            .map(|&(pixel, bin)| {
                let plane = &by_bin[bins.binary_search(&bin).unwrap()];
                let (px, py) = self.grid.pixel_xy(pixel);
                let (wx, wy) = (&self.wx[px], &self.wy[py]);
                let mut total = Complex64::default();
                for ix in 0..nq {
                    let row = &plane[ix * nq..(ix + 1) * nq];
                    let inner: Complex64 = row.iter().zip(wy).map(|(f, w)| f * w).sum();
                    total += inner * wx[ix];
                }
                total * dv
            })
            .collect()
    }

    /// `W_a(k)·conj(W_b(k))` summed against a spectral density:
    /// `2 Σ dV Re(W_a W̄_b) G(k)`.
    pub fn expected_covariance(
        &self,
        density: &[f64],
        a: (usize, usize),
        b: (usize, usize),
    ) -> f64 {
        let (nq, _, nw) = self.lattice.shape();
        let dv = self.lattice.cell_volume();
        let (ax, ay) = self.grid.pixel_xy(a.0);
        let (bx, by) = self.grid.pixel_xy(b.0);
        let mut terms = Vec::with_capacity(nq * nq);
        for ix in 0..nq {
            let wx = self.wx[ax][ix] * self.wx[bx][ix].conj();
            for iy in 0..nq {
                let wxy = wx * self.wy[ay][iy] * self.wy[by][iy].conj();
                let base = (ix * nq + iy) * nw;
                let line: f64 = (0..nw)
                    .map(|iw| {
                        (wxy * self.wt[a.1][iw] * self.wt[b.1][iw].conj()).re * density[base + iw]
                    })
                    .sum();
                terms.push(line);
            }
        }
        2.0 * dv * pairwise_sum(&terms)
    }
}

/// Input vacuum of one realization: a circular Gaussian of variance ½ per
/// pixel/bin mode, from a stream independent of the EPR source.
pub fn input_vacuum(grid: &GridSpec, seed: u64, index: u64) -> Vec<Complex64> {
    let mut rng = stream(seed, TAG_INPUT, index);
    (0..grid.pixels() * grid.nt)
        .map(|_| complex_normal(&mut rng, 0.5))
        .collect()
}

/// One configuration evaluated by [`estimate_sweep`].
#[derive(Debug, Clone)]
pub struct McCase {
    pub params: OpaParams,
    pub comp: Option<CompensationProfile>,
    pub grid: GridSpec,
    pub pairs: Vec<CellPair>,
    pub phis: Vec<f64>,
}

/// Monte Carlo covariance tables for several configurations sharing one
/// lattice and one set of vacuum draws; returns one table per case and
/// quadrature phase.
///
/// Samples are generated in parallel but reduced in sample order with
/// pairwise sums, so results do not depend on the number of threads.
pub fn estimate_sweep(
    lattice: &SpectralGrid,
    cases: &[McCase],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<CovarianceTable>>> {
    if n_samples < 100 {
        return Err(Error::config("mc.samples", "need at least 100 samples"));
    }
    struct Prepared {
        coeffs: (Vec<Complex64>, Vec<Complex64>),
        projector: Projector,
        cells: Vec<(usize, usize)>,
        slots: Vec<(usize, usize)>,
    }
    let mut prepared = Vec::with_capacity(cases.len());
    for case in cases {
        for pair in &case.pairs {
            for c in [pair.a, pair.b] {
                if c.pixel >= case.grid.pixels() || c.bin >= case.grid.nt {
                    return Err(holotel_core::Error::CellOutOfRange {
                        pixel_x: case.grid.pixel_xy(c.pixel).0,
                        pixel_y: case.grid.pixel_xy(c.pixel).1,
                        bin: c.bin,
                    }
                    .into());
                }
            }
        }
        let mut cells: Vec<(usize, usize)> = case
            .pairs
            .iter()
            .flat_map(|p| [(p.a.pixel, p.a.bin), (p.b.pixel, p.b.bin)])
            .collect();
        cells.sort_unstable();
        cells.dedup();
        let slots = case
            .pairs
            .iter()
            .map(|p| {
                let find = |c: holotel_core::Cell| cells.binary_search(&(c.pixel, c.bin)).unwrap();
                (find(p.a), find(p.b))
            })
            .collect();
        prepared.push(Prepared {
            coeffs: PairTable::new(&case.params, case.comp.as_ref(), lattice)?.noise_coefficients(),
            projector: Projector::new(lattice, &case.grid)?,
            cells,
            slots,
        });
    }
    // Per sample: quadrature values for every case, phase and cell.
    let rows: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let vac = draw_vacuum(lattice, seed, i);
            let mut out = Vec::new();
            for (case, prep) in cases.iter().zip(&prepared) {
                let amps = prep
                    .projector
                    .project_noise(&prep.coeffs, &vac, &prep.cells);
                for &phi in &case.phis {
                    let rot = Complex64::from_polar(1.0, -phi);
                    out.extend(amps.iter().map(|a| 2.0 * (a * rot).re));
                }
            }
            out
        })
        .collect();

    let mut tables = Vec::with_capacity(cases.len());
    let mut offset = 0;
    for (case, prep) in cases.iter().zip(&prepared) {
        let mut per_phase = Vec::with_capacity(case.phis.len());
        for _ in &case.phis {
            let column = |j: usize| rows.iter().map(|r| r[offset + j]).collect::<Vec<f64>>();
            let columns: Vec<Vec<f64>> = (0..prep.cells.len()).map(column).collect();
            let entries = case
                .pairs
                .iter()
                .zip(&prep.slots)
                .map(|(&pair, &(a, b))| {
                    let (value, stderr) = jackknife_covariance(&columns[a], &columns[b]);
                    CovEntry {
                        pair,
                        value,
                        stderr: Some(stderr),
                    }
                })
                .collect();
            per_phase.push(CovarianceTable {
                method: Method::MonteCarlo { samples: n_samples },
                entries,
                fingerprint: holotel_core::kernel::fingerprint(
                    &case.params,
                    &case.grid,
                    case.comp.as_ref(),
                ),
            });
            offset += prep.cells.len();
        }
        tables.push(per_phase);
    }
    Ok(tables)
}

/// Sample covariance of `X_φ` over the listed cell pairs, with jackknife
/// standard errors, on the default lattice of `grid`.
pub fn estimate_covariance(
    params: &OpaParams,
    grid: &GridSpec,
    pairs: &[CellPair],
    comp: Option<&CompensationProfile>,
    phi: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CovarianceTable> {
    let lattice = SpectralGrid::for_grid(grid)?;
    let case = McCase {
        params: *params,
        comp: comp.cloned(),
        grid: *grid,
        pairs: pairs.to_vec(),
        phis: vec![phi],
    };
    let mut out = estimate_sweep(&lattice, &[case], n_samples, seed)?;
    Ok(out.remove(0).remove(0))
}

/// Exact expectation of [`estimate_covariance`] on a lattice: the
/// discretized counterpart of the quadrature kernel.
pub fn lattice_covariance(
    params: &OpaParams,
    comp: Option<&CompensationProfile>,
    grid: &GridSpec,
    lattice: &SpectralGrid,
    pair: CellPair,
) -> Result<f64> {
    let table = PairTable::new(params, comp, lattice)?;
    let projector = Projector::new(lattice, grid)?;
    Ok(projector.expected_covariance(
        &table.noise_density(),
        (pair.a.pixel, pair.a.bin),
        (pair.b.pixel, pair.b.bin),
    ))
}
