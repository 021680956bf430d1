//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate falls below `max(abs_tol, rel_tol·|I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
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

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: &QuadratureSettings) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = kronrod15(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_error = error;

    let mut subdivisions = 0;
    while total_error > settings.abs_tol.max(settings.rel_tol * total.abs()) {
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::QuadratureFailure {
                error: total_error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureFailure {
                error: total_error,
                subdivisions,
            });
        }
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        evaluations += 30;
        subdivisions += 1;
        total += lv + rv - worst.value;
        total_error += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        if subdivisions % 64 == 0 {
            // Resum to shed accumulated cancellation in the running totals.
            total = heap.iter().map(|s| s.value).sum();
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(Integral {
        value,
        abs_error,
        evaluations,
    })
}

/// Integrates an exponentially decaying `f` over `[start, ∞)`, cutting the
/// domain at `start + widths·scale`, where `scale` is the decay length.
pub fn integrate_decaying<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    scale: f64,
    widths: f64,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    // Unit-width pieces keep each panel resolving one e-fold.
    let pieces = widths.ceil().max(1.0) as usize;
    let step = widths * scale / pieces as f64;
    let mut out = Integral {
        value: 0.0,
        abs_error: 0.0,
        evaluations: 0,
    };
    for k in 0..pieces {
        let a = start + k as f64 * step;
        let b = if k + 1 == pieces {
            start + widths * scale
        } else {
            a + step
        };
        let part = integrate(&f, a, b, settings)?;
        out.value += part.value;
        out.abs_error += part.abs_error;
        out.evaluations += part.evaluations;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_degree_23() {
        // ∫_{-1}^{1} x^22 dx = 2/23
        let (v, _) = kronrod15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-15, "{v}");
        let (v, _) = kronrod15(&|x: f64| x.powi(24), -1.0, 1.0);
        assert!((v - 2.0 / 25.0).abs() > 1e-12);
        let (v, _) = kronrod15(&|x: f64| x.powi(23) + 1.0, -1.0, 1.0);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        let sum: f64 = 2.0 * (WG[0] + WG[1] + WG[2]) + WG[3];
        assert!((sum - 2.0).abs() < 1e-15);
        let sum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((sum - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_over_long_range() {
        let s = QuadratureSettings::default();
        let r = integrate_decaying(|x: f64| (-x).exp(), 0.0, 1.0, 60.0, &s).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_needs_subdivision() {
        let s = QuadratureSettings::default();
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &s).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() < 1e-9 * exact);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let s = QuadratureSettings {
            abs_tol: 0.0,
            rel_tol: 0.0,
            max_subdivisions: 5,
        };
        let r = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &s);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
