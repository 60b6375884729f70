//! Closed-form free Gaussian packet in three dimensions (`hbar = m = 1`).
//!
//! The packet starts centred at `(-x1, 0, 0)` with widths `(a, b, c)` and mean
//! wavenumber `k` along `x`. With `alpha^2 = a^2 + i t` (likewise `beta`,
//! `gamma`), everything here follows from
//!
//! ```text
//! psi = (a^2 b^2 c^2 / pi^3)^(1/4) exp[i(kx - k^2 t/2)] / (alpha beta gamma)
//!       * exp[-(x + x1 - kt)^2 / 2 alpha^2] exp[-y^2 / 2 beta^2] exp[-z^2 / 2 gamma^2]
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::erfc;

/// Initial-packet parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    /// Width along `x`.
    pub a: f64,
    /// Width along `y`.
    pub b: f64,
    /// Width along `z`.
    pub c: f64,
    /// Mean wavenumber, equal to the initial group velocity along `x`.
    pub k: f64,
    /// Initial centre offset; the packet starts at `x = -x1`.
    pub x1: f64,
}

impl Default for PacketParams {
    /// `a = 1, b = 1, c = 0.5, k = 2, x1 = 5`: negligible initial tail in
    /// `x >= 0` and `c < b` so the plane perturbation does not vanish.
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 0.5,
            k: 2.0,
            x1: 5.0,
        }
    }
}

impl PacketParams {
    pub fn new(a: f64, b: f64, c: f64, k: f64, x1: f64) -> Result<Self> {
        let params = Self { a, b, c, k, x1 };
        params.validate()?;
        Ok(params)
    }

    /// Widths must be strictly positive. `k` and `x1` may be zero (a packet
    /// at rest, or straddling the plane) but not negative.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "width must be finite and positive",
                });
            }
        }
        for (name, value) in [("k", self.k), ("x1", self.x1)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    /// `x` coordinate of the packet centre at time `t`.
    pub fn center_x(&self, t: f64) -> f64 {
        -self.x1 + self.k * t
    }
}

/// A point in space-time with `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacePoint {
    x: f64,
    y: f64,
    z: f64,
    t: f64,
}

impl SpacePoint {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        Ok(Self { x, y, z, t })
    }

    /// Skips the time check; for finite-difference stencils that may step
    /// slightly before `t = 0` and for the integrator's own stages.
    pub(crate) fn raw(x: f64, y: f64, z: f64, t: f64) -> Self {
        Self { x, y, z, t }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub(crate) fn shifted(&self, axis: usize, h: f64) -> Self {
        let mut p = *self;
        match axis {
            0 => p.x += h,
            1 => p.y += h,
            2 => p.z += h,
            _ => p.t += h,
        }
        p
    }
}

/// `alpha^2 = a^2 + i t`, `beta^2`, `gamma^2` and their moduli at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexWidths {
    pub alpha2: Complex64,
    pub beta2: Complex64,
    pub gamma2: Complex64,
}

impl ComplexWidths {
    pub fn at(params: &PacketParams, t: f64) -> Self {
        Self {
            alpha2: Complex64::new(params.a * params.a, t),
            beta2: Complex64::new(params.b * params.b, t),
            gamma2: Complex64::new(params.c * params.c, t),
        }
    }

    /// `|alpha|^4 = a^4 + t^2`, likewise for the other two.
    pub fn abs4(&self) -> [f64; 3] {
        [
            self.alpha2.norm_sqr(),
            self.beta2.norm_sqr(),
            self.gamma2.norm_sqr(),
        ]
    }

    /// `|alpha|^2 = sqrt(a^4 + t^2)`, likewise for the other two.
    pub fn abs2(&self) -> [f64; 3] {
        let [a, b, c] = self.abs4();
        [a.sqrt(), b.sqrt(), c.sqrt()]
    }
}

/// Wave function `psi(x, y, z, t)`.
pub fn psi(params: &PacketParams, p: &SpacePoint) -> Complex64 {
    let w = ComplexWidths::at(params, p.t);
    let (a2, b2, c2) = (params.a.powi(2), params.b.powi(2), params.c.powi(2));
    let norm = (a2 * b2 * c2 / PI.powi(3)).powf(0.25);
    let u = p.x + params.x1 - params.k * p.t;
    let plane = Complex64::new(0.0, params.k * p.x - 0.5 * params.k * params.k * p.t).exp();
    let envelope = (-(u * u) / (2.0 * w.alpha2)
        - (p.y * p.y) / (2.0 * w.beta2)
        - (p.z * p.z) / (2.0 * w.gamma2))
        .exp();
    let spread = w.alpha2.sqrt() * w.beta2.sqrt() * w.gamma2.sqrt();
    norm * plane * envelope / spread
}

/// Probability density `|psi|^2`, evaluated from its real closed form.
pub fn density(params: &PacketParams, p: &SpacePoint) -> f64 {
    density_parts(params, p).0
}

/// Analytic `grad |psi|^2`.
pub fn density_gradient(params: &PacketParams, p: &SpacePoint) -> [f64; 3] {
    let (rho, [fa, fb, fc], u) = density_parts(params, p);
    [
        -2.0 * params.a.powi(2) * u / fa * rho,
        -2.0 * params.b.powi(2) * p.y / fb * rho,
        -2.0 * params.c.powi(2) * p.z / fc * rho,
    ]
}

/// Density together with `|alpha|^4, |beta|^4, |gamma|^4` and `u = x + x1 - kt`.
pub(crate) fn density_parts(params: &PacketParams, p: &SpacePoint) -> (f64, [f64; 3], f64) {
    // pi^(-3/2)
    const INV_PI_3_2: f64 = 0.179_587_122_125_166_56;
    let t2 = p.t * p.t;
    let (a, b, c) = (params.a, params.b, params.c);
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let abs4 = [a2 * a2 + t2, b2 * b2 + t2, c2 * c2 + t2];
    let [fa, fb, fc] = abs4;
    let u = p.x + params.x1 - params.k * p.t;
    let prefactor = a * b * c * INV_PI_3_2 / (fa * fb * fc).sqrt();
    let rho =
        prefactor * (-(a2 * u * u) / fa - (b2 * p.y * p.y) / fb - (c2 * p.z * p.z) / fc).exp();
    (rho, abs4, u)
}

/// Argument of the erfc in the occupancy: `a (x1 - k t) / |alpha|^2`.
pub fn occupancy_argument(params: &PacketParams, t: f64) -> f64 {
    let abs2_alpha = (params.a.powi(4) + t * t).sqrt();
    params.a * (params.x1 - params.k * t) / abs2_alpha
}

/// Probability of finding the particle in `x >= 0` at time `t >= 0`.
pub fn q_exact(params: &PacketParams, t: f64) -> f64 {
    q_exact_with(params, t, erfc)
}

/// [`q_exact`] with a caller-supplied `erfc`; used to probe the sensitivity
/// of the verification suite.
pub fn q_exact_with(params: &PacketParams, t: f64, erfc: impl Fn(f64) -> f64) -> f64 {
    0.5 * erfc(occupancy_argument(params, t))
}

/// `Q(0) = erfc(x1 / a) / 2`.
pub fn q_initial(params: &PacketParams) -> f64 {
    0.5 * erfc(params.x1 / params.a)
}

/// Long-time limit of the occupancy, `erfc(-a k) / 2`; strictly below one.
pub fn q_limit(params: &PacketParams) -> f64 {
    0.5 * erfc(-params.a * params.k)
}

/// Error bound above which [`q_quadrature`] reports failure.
pub const Q_QUADRATURE_LIMIT: f64 = 1e-9;

/// Occupancy by direct numerical integration of the density over `x >= 0`.
///
/// The transverse directions integrate to one exactly, leaving the `x`
/// marginal `a / (sqrt(pi) |alpha|^2) exp[-a^2 (x - x_c)^2 / |alpha|^4]`. No
/// error function is involved.
pub fn q_quadrature(params: &PacketParams, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let abs4 = params.a.powi(4) + t * t;
    let abs2 = abs4.sqrt();
    let center = params.center_x(t);
    let sigma = abs2 / (std::f64::consts::SQRT_2 * params.a);
    let a2 = params.a * params.a;
    let scale = params.a / (PI.sqrt() * abs2);
    let mut marginal = |x: f64| {
        let d = x - center;
        scale * (-a2 * d * d / abs4).exp()
    };
    let upper = center.max(0.0) + 40.0 * sigma;
    let mut breaks = vec![0.0];
    if center > 0.0 {
        breaks.extend([center - 3.0 * sigma, center, center + 3.0 * sigma]);
        breaks.retain(|&b| b >= 0.0);
        breaks.dedup();
    }
    breaks.push(upper);
    let est = quadrature::integrate_breaks(&mut marginal, &breaks, 1e-14, 1e-13);
    Ok(quadrature::require(est, Q_QUADRATURE_LIMIT)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use proptest::prelude::*;

    fn point(x: f64, y: f64, z: f64, t: f64) -> SpacePoint {
        SpacePoint::new(x, y, z, t).unwrap()
    }

    /// Same closed form, assembled in the log domain from real parts.
    fn psi_log_domain(params: &PacketParams, p: &SpacePoint) -> Complex64 {
        let t = p.t();
        let ln_norm = 0.25 * ((params.a * params.b * params.c).powi(2) / PI.powi(3)).ln();
        let mut re = ln_norm;
        let mut im = params.k * p.x() - 0.5 * params.k * params.k * t;
        for (w, d) in [
            (params.a, p.x() + params.x1 - params.k * t),
            (params.b, p.y()),
            (params.c, p.z()),
        ] {
            let w2 = w * w;
            let m2 = w2 * w2 + t * t;
            // -1/2 ln(w^2 + i t)
            re -= 0.25 * m2.ln();
            im -= 0.5 * t.atan2(w2);
            // -d^2 / 2(w^2 + i t) = -d^2 (w^2 - i t) / 2 m2
            re -= d * d * w2 / (2.0 * m2);
            im += d * d * t / (2.0 * m2);
        }
        Complex64::from_polar(re.exp(), im)
    }

    #[test]
    fn peak_value_at_start() {
        let params = PacketParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let rho = density(&params, &point(-1.0, 0.0, 0.0, 0.0));
        assert!((rho - PI.powf(-1.5)).abs() < 1e-15);
        let amp = psi(&params, &point(-1.0, 0.0, 0.0, 0.0)).norm_sqr();
        assert!((amp - PI.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn decays_far_from_axis() {
        let params = PacketParams::default();
        assert_eq!(psi(&params, &point(0.0, 60.0, 0.0, 1.0)).norm(), 0.0);
        assert!(density(&params, &point(0.0, 30.0, 0.0, 1.0)) < 1e-150);
    }

    #[test]
    fn two_encodings_agree() {
        let params = PacketParams::new(1.0, 1.0, 0.5, 2.0, 5.0).unwrap();
        let p = point(0.0, 0.3, -0.2, 1.5);
        let direct = psi(&params, &p);
        let oracle = psi_log_domain(&params, &p);
        assert!(
            (direct - oracle).norm() / oracle.norm() < 1e-12,
            "{direct} vs {oracle}"
        );
    }

    #[test]
    fn density_at_moving_center() {
        let params = PacketParams::default();
        for t in [0.0, 0.7, 2.5, 9.0] {
            let [a2, b2, c2] = ComplexWidths::at(&params, t).abs2();
            let want = params.a * params.b * params.c / PI.powf(1.5) / (a2 * b2 * c2);
            let got = density(&params, &point(params.center_x(t), 0.0, 0.0, t));
            assert!((got - want).abs() <= 1e-15 * want);
            let g = density_gradient(&params, &point(params.center_x(t), 0.0, 0.0, t));
            assert_eq!(g, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn widths_identity() {
        let params = PacketParams::default();
        let w = ComplexWidths::at(&params, 3.0);
        let [fa, fb, fc] = w.abs4();
        assert_eq!(fa, 1.0 + 9.0);
        assert_eq!(fb, 1.0 + 9.0);
        assert_eq!(fc, 0.0625 + 9.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PacketParams::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PacketParams::new(1.0, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PacketParams::new(1.0, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(PacketParams::new(1.0, 1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(SpacePoint::new(0.0, 0.0, 0.0, -1e-9).is_err());
        assert!(q_quadrature(&PacketParams::default(), -1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let params = PacketParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let lengths = [params.a, params.b, params.c];
        for _ in 0..100 {
            let t = rng.gen_range(0.0..10.0);
            let p = point(
                params.center_x(t) + rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-2.0..2.0),
                t,
            );
            let g = density_gradient(&params, &p);
            let mut err = 0.0;
            for axis in 0..3 {
                let fd = fd::partial(|q| density(&params, q), &p, axis, fd::step(lengths[axis]));
                err += (fd - g[axis]).powi(2);
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err.sqrt() <= 1e-7 * norm, "{p:?}: {} vs {norm}", err.sqrt());
            assert!(g[1] * p.y() <= 0.0);
        }
    }

    #[test]
    fn occupancy_closed_form_values() {
        let params = PacketParams::default();
        assert_eq!(q_exact(&params, 0.0), q_initial(&params));
        // erfc(5)/2 and erfc(-2)/2, 40-digit references.
        assert!((q_exact(&params, 0.0) - 7.687_298_972_140_174e-13).abs() < 1e-25);
        assert!((q_limit(&params) - 0.997_661_132_509_476_4).abs() < 1e-15);
        assert!((q_exact(&params, 1e6) - q_limit(&params)).abs() < 1e-6);
        assert_eq!(q_exact(&params, params.x1 / params.k), 0.5);

        let unit = PacketParams::new(1.0, 1.0, 1.0, 3.0, 1.0).unwrap();
        assert!((q_exact(&unit, 0.0) - 0.078_649_603_525_142_57).abs() < 1e-16);
    }

    #[test]
    fn occupancy_quadrature_oracle() {
        let params = PacketParams::default();
        for t in [0.0, 0.5, 1.0, 2.0, 2.5, 5.0, 10.0, 20.0] {
            let q = q_quadrature(&params, t).unwrap();
            assert!((q - q_exact(&params, t)).abs() < 1e-9, "t={t}");
        }
        let straddling = PacketParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        for t in [0.0, 1.0, 7.5] {
            assert!((q_quadrature(&straddling, t).unwrap() - 0.5).abs() < 1e-12);
        }
        let far = PacketParams::new(1.0, 1.0, 1.0, 1.0, 8.0).unwrap();
        assert!(q_quadrature(&far, 0.0).unwrap() < 1e-10);
    }

    proptest! {
        #[test]
        fn density_is_modulus_squared(
            x in -12.0..6.0f64, y in -3.0..3.0f64, z in -2.0..2.0f64, t in 0.0..10.0f64,
        ) {
            let params = PacketParams::default();
            let p = point(x, y, z, t);
            let rho = density(&params, &p);
            let amp = psi(&params, &p).norm_sqr();
            prop_assert!((rho - amp).abs() <= 1e-12 * rho.max(1e-300));
        }

        #[test]
        fn occupancy_is_a_probability(t in 0.0..1e3f64, k in 0.0..5.0f64, x1 in 0.0..10.0f64) {
            let params = PacketParams::new(1.0, 1.0, 1.0, k, x1).unwrap();
            let q = q_exact(&params, t);
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }
}
