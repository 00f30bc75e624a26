use std::f64::consts::PI;

use holotel::mc::{
    coarse_grain, draw_vacuum, estimate_covariance, estimate_sweep, lattice_covariance,
    noise_spectrum, pair_squeezing_check, sample_epr, synthesize, synthesize_noise, McCase,
    PairTable, Projector, SpectralGrid,
};
use holotel::Error;
use holotel_core::{Cell, CellPair, GridSpec, OpaParams, SpectralPoint};

fn all_pairs(grid: &GridSpec) -> Vec<CellPair> {
    let cells: Vec<Cell> = (0..grid.pixels())
        .flat_map(|p| (0..grid.nt).map(move |b| Cell::new(p, b)))
        .collect();
    let mut out = Vec::new();
    for &a in &cells {
        for &b in &cells {
            out.push(CellPair::new(a, b));
        }
    }
    out
}

#[test]
fn projection_matches_fft_and_coarse_graining() {
    let mut grid = GridSpec::new(1.0, 1.0, 2, 2, 2);
    grid.origin = [0.3, -0.7, 1.1];
    let lattice = SpectralGrid::from_real_space(0.125, 4.0, 0.125, 4.0).unwrap();
    let sample = sample_epr(&OpaParams::with_sigma(1.0), &lattice, 7, 3).unwrap();
    let pix = coarse_grain(&synthesize_noise(&sample), &grid).unwrap();
    let projector = Projector::new(&lattice, &grid).unwrap();
    let cells: Vec<(usize, usize)> = (0..grid.nt)
        .flat_map(|b| (0..grid.pixels()).map(move |p| (p, b)))
        .collect();
    let direct = projector.project(&noise_spectrum(&sample), &cells);
    for (&(p, b), d) in cells.iter().zip(&direct) {
        let a = pix.get(p, b);
        assert!((a - d).norm() < 1e-10, "{a} vs {d}");
    }
    let table = PairTable::new(&OpaParams::with_sigma(1.0), None, &lattice).unwrap();
    let fused = projector.project_noise(
        &table.noise_coefficients(),
        &draw_vacuum(&lattice, 7, 3),
        &cells,
    );
    for (d, f) in direct.iter().zip(&fused) {
        assert!((d - f).norm() < 1e-12, "{d} vs {f}");
    }
}

#[test]
fn unpumped_source_is_calibrated() {
    let grid = GridSpec::new(1.0, 1.0, 2, 1, 1);
    let pairs = all_pairs(&grid);
    let t = estimate_covariance(
        &OpaParams::with_sigma(0.0),
        &grid,
        &pairs,
        None,
        0.4,
        4000,
        11,
    )
    .unwrap();
    for e in &t.entries {
        let expect = if e.pair.a == e.pair.b { 2.0 } else { 0.0 };
        let se = e.stderr.unwrap();
        assert!((e.value - expect).abs() < 4.0 * se, "{e:?}");
    }
    let lattice = SpectralGrid::for_grid(&grid).unwrap();
    let exact = lattice_covariance(
        &OpaParams::with_sigma(0.0),
        None,
        &grid,
        &lattice,
        CellPair::diagonal(Cell::new(0, 0)),
    )
    .unwrap();
    assert!((exact - 2.0).abs() < 1e-9, "{exact}");
}

#[test]
fn noise_moments_match_spectrum() {
    let lattice = SpectralGrid::new(5, 0.9, 5, 1.1).unwrap();
    let params = OpaParams::with_sigma(1.5);
    let table = PairTable::new(&params, None, &lattice).unwrap();
    let density = table.noise_density();
    let dv = lattice.cell_volume();
    let n = 4000;
    let mut power = vec![0.0; lattice.len()];
    let mut anomalous = vec![num_complex::Complex64::default(); lattice.len()];
    for i in 0..n {
        let vac = draw_vacuum(&lattice, 5, i);
        let s = holotel::mc::squeeze(&table, &vac, 5, i);
        for (k, f) in noise_spectrum(&s).into_iter().enumerate() {
            power[k] += f.norm_sqr() * dv / n as f64;
            anomalous[k] += f * f * dv / n as f64;
        }
    }
    for k in 0..lattice.len() {
        let g = density[k];
        assert!((power[k] - g).abs() < 0.12 * g, "{k}: {} vs {g}", power[k]);
        assert!(anomalous[k].norm() < 0.12 * g);
    }
}

#[test]
fn sweep_is_thread_independent() {
    let grid = GridSpec::new(1.0, 1.0, 1, 1, 2);
    let lattice = SpectralGrid::from_real_space(0.125, 4.0, 0.125, 4.0).unwrap();
    let case = McCase {
        params: OpaParams::with_sigma(1.0),
        comp: None,
        grid,
        pairs: all_pairs(&grid),
        phis: vec![0.0, PI / 3.0],
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_sweep(&lattice, std::slice::from_ref(&case), 200, 99).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
}

#[test]
fn lattice_must_resolve_pixels() {
    let grid = GridSpec::new(1.0, 1.0, 1, 1, 1);
    let coarse = SpectralGrid::from_real_space(0.25, 4.0, 0.25, 4.0).unwrap();
    assert!(matches!(
        Projector::new(&coarse, &grid),
        Err(Error::GridTooCoarse { .. })
    ));
    let small = SpectralGrid::from_real_space(0.125, 2.0, 0.125, 2.0).unwrap();
    let wide = GridSpec::new(1.0, 1.0, 4, 1, 1);
    assert!(matches!(
        Projector::new(&small, &wide),
        Err(Error::GridTooCoarse { .. })
    ));
    assert!(SpectralGrid::new(4, 1.0, 5, 1.0).is_err());
}

#[test]
fn single_pair_is_squeezed_below_vacuum() {
    let params = OpaParams::with_sigma(1.0);
    let r = pair_squeezing_check(&params, SpectralPoint::new(0.5, 0.0, 0.3), 20_000, 3).unwrap();
    let e = holotel_core::ellipse(
        &params,
        holotel_core::Field::One,
        SpectralPoint::new(0.5, 0.0, 0.3),
    );
    let (lo, hi) = ((-2.0 * e.r).exp(), (2.0 * e.r).exp());
    assert!(
        (r.minor_ratio.0 - lo).abs() < 4.0 * r.minor_ratio.1,
        "{r:?} {lo}"
    );
    assert!(
        (r.major_ratio.0 - hi).abs() < 4.0 * r.major_ratio.1,
        "{r:?} {hi}"
    );
    assert!((r.vacuum - 2.0).abs() < 0.1, "{r:?}");
}

#[test]
fn coarse_grain_of_simple_fields() {
    use holotel::mc::RealField;
    use num_complex::Complex64;
    let lattice = SpectralGrid::from_real_space(0.125, 4.0, 0.125, 4.0).unwrap();
    let (nq, _, nw) = lattice.shape();
    let (h, _) = lattice.real_spacing();
    let c = Complex64::new(0.3, -1.2);
    let constant = RealField {
        lattice,
        data: vec![c; nq * nq * nw],
    };
    let mut grid = GridSpec::new(1.0, 1.5, 2, 1, 1);
    grid.origin = [0.5, 1.0, 0.25];
    let pix = coarse_grain(&constant, &grid).unwrap();
    let st = (grid.delta * grid.delta * grid.t_window).sqrt();
    for v in &pix.values {
        assert!((v - c * st).norm() < 1e-12, "{v}");
    }
    // Linear in x: the pixel average is the value at the pixel centre.
    let mut data = vec![Complex64::default(); nq * nq * nw];
    for jx in 0..nq {
        let x = (jx as f64 + 0.5) * h;
        for k in 0..nq * nw {
            data[jx * nq * nw + k] = Complex64::new(2.0 * x - 1.0, 0.0);
        }
    }
    let pix = coarse_grain(&RealField { lattice, data }, &grid).unwrap();
    for p in 0..2 {
        let (x, _) = grid.pixel_center(p);
        assert!((pix.get(p, 0).re / st - (2.0 * x - 1.0)).abs() < 1e-12);
    }
}

#[test]
fn quadrature_examples() {
    use holotel::mc::{quadrature, PixelField};
    use num_complex::Complex64;
    let pix = PixelField {
        grid: GridSpec::new(1.0, 1.0, 2, 1, 1),
        values: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
    };
    assert_eq!(quadrature(&pix, 0.0), vec![2.0, 0.0]);
    let y = quadrature(&pix, PI / 2.0);
    assert!(y[0].abs() < 1e-15 && (y[1] - 2.0).abs() < 1e-15);
    let a = quadrature(&pix, 0.7);
    let b = quadrature(&pix, 0.7 + PI);
    for (a, b) in a.iter().zip(&b) {
        assert!((a + b).abs() < 1e-15);
    }
}

#[test]
fn synthesis_is_linear() {
    use num_complex::Complex64;
    let lattice = SpectralGrid::new(9, 1.3, 9, 1.7).unwrap();
    let sample = sample_epr(&OpaParams::with_sigma(2.0), &lattice, 1, 0).unwrap();
    let spectrum = noise_spectrum(&sample);
    let b = synthesize(&lattice, &spectrum);
    let scale = b.data.iter().map(|y| y.norm()).fold(1.0, f64::max);
    // complex-linear in the spectrum
    let alpha = Complex64::new(-0.4, 2.5);
    let scaled: Vec<_> = spectrum.iter().map(|z| z * alpha).collect();
    let a = synthesize(&lattice, &scaled);
    for (x, y) in a.data.iter().zip(&b.data) {
        assert!((x - y * alpha).norm() < 1e-12 * scale * alpha.norm());
    }
    // F = E2 + E1† is only real-linear in the beams
    let a = synthesize_noise(&sample.scaled(Complex64::new(-1.7, 0.0)));
    for (x, y) in a.data.iter().zip(&b.data) {
        assert!((x + y * 1.7).norm() < 1e-12 * scale * 1.7);
    }
}

#[test]
fn unpumped_sample_is_the_vacuum() {
    let lattice = SpectralGrid::new(5, 0.8, 5, 0.9).unwrap();
    let s = sample_epr(&OpaParams::with_sigma(0.0), &lattice, 3, 9).unwrap();
    let vac = draw_vacuum(&lattice, 3, 9);
    for (s, v) in [(&s.e1, &vac.a1), (&s.e2, &vac.a2)] {
        for (x, y) in s.iter().zip(v) {
            assert!((x - y).norm() < 1e-14, "{x} vs {y}");
        }
    }
}

// Mean and standard error of a series.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn sampled_moments_match_coefficients() {
    use holotel_core::bogoliubov;
    let lattice = SpectralGrid::new(5, 0.9, 5, 1.1).unwrap();
    let params = OpaParams::with_sigma(1.0);
    let dv = lattice.cell_volume();
    let n = 10_000;
    let samples: Vec<_> = (0..n)
        .map(|i| {
            (
                sample_epr(&params, &lattice, 12, i).unwrap(),
                draw_vacuum(&lattice, 12, i),
            )
        })
        .collect();
    for k in [0, 31, 62, 100] {
        let m = lattice.neg(k);
        let c = bogoliubov(&params, lattice.point(k));
        let excess: Vec<f64> = samples
            .iter()
            .map(|(s, v)| (s.e1[k].norm_sqr() - v.a1[k].norm_sqr()) * dv)
            .collect();
        let (mean, se) = mean_se(&excess);
        let expect = c.v1.norm_sqr();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "k={k}: {mean} ± {se} vs {expect}"
        );

        let corr: Vec<_> = samples
            .iter()
            .map(|(s, _)| s.e1[k] * s.e2[m] * dv)
            .collect();
        let expect = c.u1 * c.v1;
        let (re, re_se) = mean_se(&corr.iter().map(|z| z.re).collect::<Vec<_>>());
        let (im, im_se) = mean_se(&corr.iter().map(|z| z.im).collect::<Vec<_>>());
        assert!(
            (re - expect.re).abs() < 3.0 * re_se,
            "k={k}: {re} vs {}",
            expect.re
        );
        assert!(
            (im - expect.im).abs() < 3.0 * im_se,
            "k={k}: {im} vs {}",
            expect.im
        );
    }
}

proptest::proptest! {
    #[test]
    fn quadratures_are_odd_under_a_half_turn(
        values in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4),
        phi in -7.0f64..7.0,
    ) {
        let pix = holotel::mc::PixelField {
            grid: GridSpec { nx: 2, ny: 2, ..GridSpec::single(1.0, 1.0) },
            values: values.iter().map(|&(re, im)| num_complex::Complex64::new(re, im)).collect(),
        };
        let x = holotel::mc::quadrature(&pix, phi);
        let y = holotel::mc::quadrature(&pix, phi + PI);
        let p = holotel::mc::quadrature(&pix, phi + PI / 2.0);
        for (i, a) in pix.values.iter().enumerate() {
            proptest::prop_assert!((x[i] + y[i]).abs() < 1e-12);
            proptest::prop_assert!((x[i] * x[i] + p[i] * p[i] - 4.0 * a.norm_sqr()).abs() < 1e-9);
        }
    }
}
