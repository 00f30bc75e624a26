//! Globally adaptive Gauss–Kronrod (7, 15) quadrature on finite intervals,
//! plus an outward-marching driver for semi-infinite tails.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    /// Maximum number of bisections.
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64, max_subdivisions: usize) -> Self {
        Tolerance {
            rel,
            abs,
            max_subdivisions,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl core::ops::Add for Estimate {
    type Output = Estimate;

    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            evaluations: self.evaluations + rhs.evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    // Largest error first; ties broken by position so the pop order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    let mut abs = kron.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kron * half;
    let asc = asc * half.abs();
    let abs = abs * half.abs();
    let mut error = ((kron - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * libm::pow(200.0 * error / asc, 1.5).min(1.0);
    }
    if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs);
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the
/// partition given by `points` (sorted ascending).
///
/// Bisects the segment with the largest error estimate until the summed
/// error meets the tolerance. Fails with
/// [`Error::QuadratureNotConverged`] once `max_subdivisions` bisections
/// have been spent.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: &Tolerance,
) -> Result<Estimate> {
    debug_assert!(points.len() >= 2);
    debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    let mut heap = BinaryHeap::with_capacity(points.len() + 16);
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&mut f, w[0], w[1]));
            evaluations += 15;
        }
    }
    let (mut value, mut error) = totals(&heap);
    let mut splits = 0;
    loop {
        if error <= tol.target(value) {
            let (value, error) = totals(&heap);
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if splits >= tol.max_subdivisions {
            return Err(Error::QuadratureNotConverged {
                error_estimate: error,
                target: tol.target(value),
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => return Ok(Estimate::default()),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Segment can no longer be split in floating point.
            return Err(Error::QuadratureNotConverged {
                error_estimate: error,
                target: tol.target(value),
            });
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
        splits += 1;
        if splits % 256 == 0 {
            (value, error) = totals(&heap);
        }
    }
}

// Sum in position order so the result does not depend on heap layout.
fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Integrates `f` from `start` towards `±∞`.
///
/// Segments `[start, start ± w]`, `[start ± w, start ± 3w]`, … are
/// integrated with [`integrate`] at doubling widths; marching stops once
/// two consecutive segments each contribute less than `negligible`
/// (value plus error). `max_segments` bounds the march.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    width: f64,
    forward: bool,
    negligible: f64,
    max_segments: usize,
    tol: &Tolerance,
) -> Result<Estimate> {
    let sign = if forward { 1.0 } else { -1.0 };
    let mut total = Estimate::default();
    let mut lo = start;
    let mut w = width;
    let mut quiet = 0;
    for _ in 0..max_segments {
        let hi = lo + sign * w;
        let (a, b) = if forward { (lo, hi) } else { (hi, lo) };
        let seg = integrate(&mut f, &[a, b], tol)?;
        total = total + seg;
        if seg.value.abs() + seg.error < negligible {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        w *= 2.0;
    }
    Err(Error::QuadratureNotConverged {
        error_estimate: total.error + negligible,
        target: negligible,
    })
}
