//! Adaptive Gauss–Kronrod (10/21-point) quadrature on finite intervals.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_478_398,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sum of per-interval `|K21 - G10|` differences.
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        k += w * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: k * half,
        error: ((k - g) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]`, bisecting the worst panel until the total
/// error bound drops below `max(abs_tol, rel_tol * |value|)` or the panel
/// budget runs out. The returned estimate always carries its error bound.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Estimate {
    integrate_breaks(&mut f, &[lo, hi], abs_tol, rel_tol)
}

/// Like [`integrate`], seeding the panel list with the given breakpoints.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(
    f: &mut F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Estimate {
    let mut panels: Vec<Panel> = breaks
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    let mut evaluations = 21 * panels.len();
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || panels.len() >= MAX_INTERVALS {
            return Estimate {
                value,
                error,
                evaluations,
            };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // Cannot split further in floating point.
            panels.push(p);
            let value = panels.iter().map(|p| p.value).sum();
            let error = panels.iter().map(|p| p.error).sum();
            return Estimate {
                value,
                error,
                evaluations,
            };
        }
        panels.push(kronrod(f, p.lo, mid));
        panels.push(kronrod(f, mid, p.hi));
        evaluations += 42;
    }
}

/// Fails with [`Error::Quadrature`] when the error bound exceeds `limit`.
pub fn require(estimate: Estimate, limit: f64) -> Result<Estimate> {
    if estimate.error > limit || !estimate.value.is_finite() {
        return Err(Error::Quadrature {
            value: estimate.value,
            error: estimate.error,
            tolerance: limit,
        });
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_panel_is_exact_for_polynomials() {
        // K21 integrates degree 31 exactly, G10 degree 19.
        for deg in [0u32, 1, 5, 12, 19, 25, 31] {
            let mut f = |x: f64| x.powi(deg as i32) * (deg as f64 + 1.0);
            let p = kronrod(&mut f, 0.0, 1.0);
            assert!((p.value - 1.0).abs() < 1e-14, "degree {deg}: {}", p.value);
            if deg <= 19 {
                assert!(p.error < 1e-14, "degree {deg}: error {}", p.error);
            }
        }
    }

    #[test]
    fn gaussian_integral() {
        let est = integrate(|x: f64| (-x * x).exp(), -12.0, 12.0, 1e-14, 1e-14);
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(est.error < 1e-13);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let eps: f64 = 1e-3;
        let est = integrate(|x: f64| eps / (x * x + eps * eps), -1.0, 1.0, 1e-12, 1e-12);
        let exact = 2.0 * (1.0 / eps).atan();
        assert!(
            (est.value - exact).abs() < 1e-10,
            "{} vs {exact}",
            est.value
        );
    }

    #[test]
    fn require_rejects_loose_estimates() {
        let est = Estimate {
            value: 1.0,
            error: 1e-6,
            evaluations: 21,
        };
        assert!(require(est, 1e-9).is_err());
        assert!(require(est, 1e-5).is_ok());
    }
}
