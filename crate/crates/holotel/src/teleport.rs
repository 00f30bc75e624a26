//! End-to-end teleportation of an image through the EPR channel.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use holotel_core::{
    covariance_at_offset, fidelity_map, CompensationProfile, GridSpec, Offset, OpaParams,
    QuadConfig,
};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mc::{draw_vacuum, input_vacuum, squeeze, PairTable, Projector, SpectralGrid};
use crate::pgm::Gray;
use crate::stats::pairwise_sum;

/// Coherent amplitudes `α(j, i)` of an image, `[bin][pixel]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub alpha: Vec<Complex64>,
    /// Mean photon number of a full-scale pixel.
    pub scale: f64,
}

impl ImagePlane {
    pub fn new(nx: usize, ny: usize, nt: usize, alpha: Vec<Complex64>, scale: f64) -> Result<Self> {
        if alpha.len() != nx * ny * nt || alpha.is_empty() {
            return Err(Error::config(
                "image",
                "amplitude count does not match the shape",
            ));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config(
                "image.scale",
                "must be finite and non-negative",
            ));
        }
        if alpha
            .iter()
            .any(|a| !(a.re.is_finite() && a.im.is_finite()))
        {
            return Err(Error::config("image", "amplitudes must be finite"));
        }
        Ok(ImagePlane {
            nx,
            ny,
            nt,
            alpha,
            scale,
        })
    }

    /// Still image: `α = √(s·g/maxval)`.
    pub fn from_gray(gray: &Gray, scale: f64) -> Result<Self> {
        Self::from_stack(std::slice::from_ref(gray), scale)
    }

    /// One graymap per time bin.
    pub fn from_stack(frames: &[Gray], scale: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::config("image", "no frames"))?;
        let mut alpha = Vec::with_capacity(frames.len() * first.data.len());
        for f in frames {
            if (f.width, f.height) != (first.width, first.height) {
                return Err(Error::config("image", "frames differ in size"));
            }
            let m = f.maxval as f64;
            alpha.extend(
                f.data
                    .iter()
                    .map(|&g| Complex64::new((scale * g as f64 / m).sqrt(), 0.0)),
            );
        }
        Self::new(first.width, first.height, frames.len(), alpha, scale)
    }

    pub fn pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn bin(&self, bin: usize) -> &[Complex64] {
        &self.alpha[bin * self.pixels()..(bin + 1) * self.pixels()]
    }

    /// 16-bit graymap of `|α|²/s` for one bin, clamped to `[0, 1]`.
    pub fn to_gray(&self, bin: usize) -> Gray {
        let data = self
            .bin(bin)
            .iter()
            .map(|a| {
                let level = if self.scale > 0.0 {
                    (a.norm_sqr() / self.scale).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (level * 65535.0).round() as u16
            })
            .collect();
        Gray {
            width: self.nx,
            height: self.ny,
            maxval: 65535,
            data,
        }
    }
}

pub fn load_image(path: &Path, scale: f64) -> Result<ImagePlane> {
    ImagePlane::from_gray(&Gray::read(path)?, scale)
}

pub fn load_stack(paths: &[&Path], scale: f64) -> Result<ImagePlane> {
    let frames = paths
        .iter()
        .map(|p| Gray::read(p))
        .collect::<Result<Vec<_>>>()?;
    ImagePlane::from_stack(&frames, scale)
}

/// Pixel grid of `image` with the given pixel size and bin duration.
pub fn grid_for(image: &ImagePlane, delta: f64, t_window: f64) -> GridSpec {
    GridSpec::new(delta, t_window, image.nx, image.ny, image.nt)
}

/// Shared state for teleporting realizations of one image.
#[derive(Debug, Clone)]
pub struct Teleporter {
    lattice: SpectralGrid,
    grid: GridSpec,
    table: PairTable,
    coeffs: (Vec<Complex64>, Vec<Complex64>),
    projector: Projector,
    cells: Vec<(usize, usize)>,
}

impl Teleporter {
    pub fn new(
        params: &OpaParams,
        comp: Option<&CompensationProfile>,
        grid: &GridSpec,
        lattice: &SpectralGrid,
    ) -> Result<Self> {
        let table = PairTable::new(params, comp, lattice)?;
        let cells = (0..grid.nt)
            .flat_map(|b| (0..grid.pixels()).map(move |p| (p, b)))
            .collect();
        Ok(Teleporter {
            lattice: *lattice,
            grid: *grid,
            coeffs: table.noise_coefficients(),
            table,
            projector: Projector::new(lattice, grid)?,
            cells,
        })
    }

    fn check(&self, image: &ImagePlane) -> Result<()> {
        if (image.nx, image.ny, image.nt) != (self.grid.nx, self.grid.ny, self.grid.nt) {
            return Err(Error::config(
                "grid",
                "image shape does not match the pixel grid",
            ));
        }
        Ok(())
    }

    fn input(&self, image: &ImagePlane, seed: u64, index: u64) -> Vec<Complex64> {
        let vac = input_vacuum(&self.grid, seed, index);
        image.alpha.iter().zip(vac).map(|(a, v)| a + v).collect()
    }

    /// One realization through beamsplitter, homodyne records and
    /// modulation of beam 2.
    pub fn explicit(&self, image: &ImagePlane, seed: u64, index: u64) -> Result<Vec<Complex64>> {
        self.check(image)?;
        let a_in = self.input(image, seed, index);
        let sample = squeeze(
            &self.table,
            &draw_vacuum(&self.lattice, seed, index),
            seed,
            index,
        );
        let e1 = self.projector.project(&sample.e1, &self.cells);
        let e2 = self.projector.project(&sample.e2, &self.cells);
        Ok(a_in
            .iter()
            .zip(e1.iter().zip(&e2))
            .map(|(&a, (&e1, &e2))| {
                let bx = (a + e1) * FRAC_1_SQRT_2;
                let by = (-a + e1) * FRAC_1_SQRT_2;
                let x = 2.0 * bx.re;
                let y = 2.0 * by.im;
                let record = Complex64::new(x, y) * FRAC_1_SQRT_2;
                e2 + record.conj()
            })
            .collect())
    }

    /// The same realization as `A_in + F`.
    pub fn shortcut(&self, image: &ImagePlane, seed: u64, index: u64) -> Result<Vec<Complex64>> {
        self.check(image)?;
        let a_in = self.input(image, seed, index);
        let vac = draw_vacuum(&self.lattice, seed, index);
        let f = self
            .projector
            .project_noise(&self.coeffs, &vac, &self.cells);
        Ok(a_in.iter().zip(f).map(|(a, f)| a + f).collect())
    }
}

/// Realizations `0..n_samples` of the explicit protocol on the default
/// lattice of `grid`.
pub fn protocol_explicit(
    image: &ImagePlane,
    params: &OpaParams,
    grid: &GridSpec,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<ImagePlane>> {
    let t = Teleporter::new(params, None, grid, &SpectralGrid::for_grid(grid)?)?;
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let alpha = t.explicit(image, seed, i)?;
            ImagePlane::new(image.nx, image.ny, image.nt, alpha, image.scale)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Teleported {
    pub mean: ImagePlane,
    /// Standard error of the real and imaginary parts of each mean amplitude.
    pub stderr: Vec<(f64, f64)>,
    /// Per-cell sample variance of `X₀` over realizations.
    pub variance: Vec<f64>,
    /// Realization 0.
    pub sample: ImagePlane,
    /// Quadrature covariance at zero separation.
    pub c_diag: f64,
    /// Per-pixel fidelity.
    pub fidelity: Vec<f64>,
}

/// Teleports `n_samples` realizations of `image` and summarizes them.
#[allow(clippy::too_many_arguments)]
pub fn teleport(
    image: &ImagePlane,
    params: &OpaParams,
    comp: Option<&CompensationProfile>,
    grid: &GridSpec,
    quad: &QuadConfig,
    seed: u64,
    n_samples: usize,
) -> Result<Teleported> {
    if n_samples < 2 {
        return Err(Error::config("mc.samples", "need at least 2 samples"));
    }
    let t = Teleporter::new(params, comp, grid, &SpectralGrid::for_grid(grid)?)?;
    t.check(image)?;
    let runs: Vec<Vec<Complex64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| t.shortcut(image, seed, i))
        .collect::<Result<_>>()?;
    let n = n_samples as f64;
    let cells = image.alpha.len();
    let mut mean = Vec::with_capacity(cells);
    let mut stderr = Vec::with_capacity(cells);
    let mut variance = Vec::with_capacity(cells);
    for c in 0..cells {
        let re: Vec<f64> = runs.iter().map(|r| r[c].re).collect();
        let im: Vec<f64> = runs.iter().map(|r| r[c].im).collect();
        let (mr, mi) = (pairwise_sum(&re) / n, pairwise_sum(&im) / n);
        let var = |v: &[f64], m: f64| {
            let d: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
            pairwise_sum(&d) / (n - 1.0)
        };
        let (vr, vi) = (var(&re, mr), var(&im, mi));
        mean.push(Complex64::new(mr, mi));
        stderr.push(((vr / n).sqrt(), (vi / n).sqrt()));
        variance.push(4.0 * vr);
    }
    let c_diag = covariance_at_offset(params, grid, Offset::default(), comp, quad)?;
    let fidelity = fidelity_map(&vec![c_diag; image.pixels()])?;
    Ok(Teleported {
        mean: ImagePlane::new(image.nx, image.ny, image.nt, mean, image.scale)?,
        stderr,
        variance,
        sample: ImagePlane::new(image.nx, image.ny, image.nt, runs[0].clone(), image.scale)?,
        c_diag,
        fidelity,
    })
}
