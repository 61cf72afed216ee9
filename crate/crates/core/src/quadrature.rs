//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below the absolute tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae (positive half) and weights, QUADPACK qk15.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
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
// Gauss weights for the odd-indexed Kronrod nodes (x = XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Default cap on the number of bisections.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// `breaks` are optional interior points where the integrand changes
/// character quickly; they seed the initial partition.
pub fn integrate<F>(f: F, lo: f64, hi: f64, tol: f64, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_with_limit(f, lo, hi, tol, breaks, DEFAULT_MAX_SUBDIVISIONS)
}

pub fn integrate_with_limit<F>(f: F, lo: f64, hi: f64, tol: f64, breaks: &[f64], max_subdivisions: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if hi <= lo {
        return Ok(0.0);
    }
    let mut points = vec![lo];
    let mut interior: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    points.extend(interior);
    points.push(hi);

    let mut heap: BinaryHeap<Segment> = points.windows(2).map(|w| kronrod15(&f, w[0], w[1])).collect();
    let mut total_error: f64 = heap.iter().map(|s| s.error).sum();

    let mut splits = 0;
    while total_error > tol {
        if splits >= max_subdivisions {
            return Err(Error::Quadrature {
                tolerance: tol,
                estimate: total_error,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval exhausted at machine precision; keep it as is
            heap.push(Segment { error: 0.0, ..worst });
            total_error -= worst.error;
            continue;
        }
        let left = kronrod15(&f, worst.lo, mid);
        let right = kronrod15(&f, mid, worst.hi);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
        // refresh the running sum occasionally to shed accumulated rounding
        if splits % 64 == 0 {
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
    // sum small contributions first
    let mut values: Vec<f64> = heap.iter().map(|s| s.value).collect();
    values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    Ok(values.iter().sum())
}
