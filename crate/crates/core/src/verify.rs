//! Oracle suite: every closed form checked against an independent numerical
//! route (quadrature, finite differences, direct maximisation).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::max_abs_delta_vx;
use crate::fd;
use crate::fields::{
    bohmian_velocity, continuity_residual, delta_v, divergence_check, divergence_scale,
    phase_gradient_fd, FieldKind,
};
use crate::quadrature;
use crate::special::erfc;
use crate::wavepacket::{
    density, density_gradient, psi, q_exact_with, q_limit, q_quadrature, ComplexWidths,
    PacketParams, SpacePoint,
};

pub const OCCUPANCY_TOL: f64 = 1e-9;
pub const OCCUPANCY_LIMIT_TOL: f64 = 1e-6;
pub const NORMALIZATION_TOL: f64 = 1e-9;
pub const DENSITY_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-7;
pub const VELOCITY_TOL: f64 = 1e-6;
pub const CONTINUITY_TOL: f64 = 1e-6;
pub const DIVERGENCE_TOL: f64 = 1e-6;
pub const PLANE_MAX_TOL: f64 = 1e-6;

pub const OCCUPANCY_TIMES: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 2.5, 5.0, 10.0, 20.0];
pub const PLANE_MAX_TIMES: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_owned(),
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub n_points: usize,
    pub seed: u64,
    /// Bohm-like `lambda` used by the continuity check of `J_l`.
    pub lambda: f64,
    /// Relative perturbation applied to `erfc` in the occupancy check only.
    pub erfc_perturbation: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_points: 100,
            seed: 2024,
            lambda: 1.0,
            erfc_perturbation: 0.0,
        }
    }
}

/// Points spread over a few widths of the packet at uniform `t` in `[0, 10]`.
pub fn random_points(params: &PacketParams, n: usize, seed: u64) -> Vec<SpacePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.gen_range(0.0..10.0);
            let [sa, sb, sc] = ComplexWidths::at(params, t).abs2();
            SpacePoint::raw(
                params.center_x(t) + rng.gen_range(-2.0..2.0) * sa / params.a,
                rng.gen_range(-2.0..2.0) * sb / params.b,
                rng.gen_range(-2.0..2.0) * sc / params.c,
                t,
            )
        })
        .collect()
}

/// Total probability by nested adaptive quadrature over a box of twelve
/// packet widths on each side.
pub fn normalization(params: &PacketParams, t: f64) -> f64 {
    let [sa, sb, sc] = ComplexWidths::at(params, t).abs2();
    let (hx, hy, hz) = (
        12.0 * sa / params.a,
        12.0 * sb / params.b,
        12.0 * sc / params.c,
    );
    let cx = params.center_x(t);
    let tol = 1e-13;
    quadrature::integrate(
        |x| {
            quadrature::integrate(
                |y| {
                    quadrature::integrate(
                        |z| density(params, &SpacePoint::raw(x, y, z, t)),
                        -hz,
                        hz,
                        tol,
                        tol,
                    )
                    .value
                },
                -hy,
                hy,
                tol,
                tol,
            )
            .value
        },
        cx - hx,
        cx + hx,
        tol,
        tol,
    )
    .value
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Maximises `|delta_v_x(0, Y, Z, t)|` numerically through the cross-product
/// field: a 201 x 201 grid, then alternating golden-section line searches.
/// Returns `(max, Y, Z)`.
pub fn numerical_plane_max(params: &PacketParams, t: f64, lambda: f64) -> (f64, f64, f64) {
    let g = |y: f64, z: f64| {
        delta_v(params, &SpacePoint::raw(0.0, y, z, t), lambda)
            .vx
            .abs()
    };
    let [_, sb, sc] = ComplexWidths::at(params, t).abs2();
    let (ly, lz) = (4.0 * sb / params.b, 4.0 * sc / params.c);
    let n = 201;
    let node = |l: f64, i: usize| -l + 2.0 * l * i as f64 / (n - 1) as f64;
    let (mut y, mut z, mut best) = (0.0, 0.0, -1.0);
    for i in 0..n {
        for j in 0..n {
            let v = g(node(ly, i), node(lz, j));
            if v > best {
                (y, z, best) = (node(ly, i), node(lz, j), v);
            }
        }
    }
    let (dy, dz) = (2.0 * ly / (n - 1) as f64, 2.0 * lz / (n - 1) as f64);
    for _ in 0..20 {
        let (py, pz) = (y, z);
        y = golden_max(|s| g(s, z), y - dy, y + dy);
        z = golden_max(|s| g(y, s), z - dz, z + dz);
        if (y - py).abs() < 1e-13 * (1.0 + y.abs()) && (z - pz).abs() < 1e-13 * (1.0 + z.abs()) {
            break;
        }
    }
    (g(y, z), y, z)
}

/// Runs every oracle check.
pub fn run_suite(params: &PacketParams, opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let pts = random_points(params, opts.n_points, opts.seed);

    let perturbed = |x: f64| erfc(x) * (1.0 + opts.erfc_perturbation);
    let occupancy = OCCUPANCY_TIMES
        .iter()
        .map(|&t| match q_quadrature(params, t) {
            Ok(q) => (q_exact_with(params, t, perturbed) - q).abs(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        "occupancy_vs_quadrature",
        occupancy,
        OCCUPANCY_TOL,
    ));
    out.push(CheckResult::new(
        "occupancy_long_time_limit",
        (q_exact_with(params, 1e6, perturbed) - q_limit(params)).abs(),
        OCCUPANCY_LIMIT_TOL,
    ));

    let norm = [0.0, 3.0]
        .iter()
        .map(|&t| (normalization(params, t) - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::new("normalization", norm, NORMALIZATION_TOL));

    let dens = pts
        .iter()
        .map(|p| {
            let rho = density(params, p);
            (rho - psi(params, p).norm_sqr()).abs() / rho
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new("density_vs_amplitude", dens, DENSITY_TOL));

    let lengths = [params.a, params.b, params.c];
    let grad = pts
        .iter()
        .map(|p| {
            let g = density_gradient(params, p);
            let mut err = 0.0;
            for axis in 0..3 {
                let d = fd::partial(|q| density(params, q), p, axis, fd::step(lengths[axis]));
                err += (d - g[axis]).powi(2);
            }
            err.sqrt() / g.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        "density_gradient_vs_fd",
        grad,
        GRADIENT_TOL,
    ));

    let vel = pts
        .iter()
        .map(|p| {
            let v = bohmian_velocity(params, p);
            (v - phase_gradient_fd(params, p)).norm() / v.norm()
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        "bohmian_velocity_vs_phase_fd",
        vel,
        VELOCITY_TOL,
    ));

    for (name, kind) in [
        ("continuity_customary_current", FieldKind::Bohmian),
        (
            "continuity_alternative_current",
            FieldKind::BohmLike {
                lambda: opts.lambda,
            },
        ),
    ] {
        let r = pts
            .iter()
            .map(|p| continuity_residual(params, p, kind).relative())
            .fold(0.0, f64::max);
        out.push(CheckResult::new(name, r, CONTINUITY_TOL));
    }

    let mut div_pts = pts.clone();
    div_pts.extend([0.5, 2.0, 6.0].map(|t| SpacePoint::raw(params.center_x(t) + 0.3, 0.0, 0.0, t)));
    let div = div_pts
        .iter()
        .map(|p| divergence_check(params, p, opts.lambda).abs() / divergence_scale(params, p))
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        "perturbation_divergence",
        div,
        DIVERGENCE_TOL,
    ));

    if params.b != params.c {
        let plane = PLANE_MAX_TIMES
            .iter()
            .map(|&t| {
                let closed = max_abs_delta_vx(params, t, 1.0)
                    .expect("b != c")
                    .max_abs_dvx;
                let (numeric, _, _) = numerical_plane_max(params, t, 1.0);
                (closed - numeric).abs() / closed
            })
            .fold(0.0, f64::max);
        out.push(CheckResult::new(
            "plane_maximum_closed_form",
            plane,
            PLANE_MAX_TOL,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let results = run_suite(&PacketParams::default(), &VerifyOptions::default());
        for r in &results {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(results.len(), 10);
    }

    #[test]
    fn perturbed_erfc_is_caught() {
        let opts = VerifyOptions {
            erfc_perturbation: 1e-3,
            n_points: 4,
            ..VerifyOptions::default()
        };
        let results = run_suite(&PacketParams::default(), &opts);
        let occ = results
            .iter()
            .find(|r| r.name == "occupancy_vs_quadrature")
            .unwrap();
        assert!(!occ.passed);
    }

    #[test]
    fn plane_maximum_location() {
        let params = PacketParams::default();
        let (v, y, z) = numerical_plane_max(&params, 2.0, 1.0);
        let closed = max_abs_delta_vx(&params, 2.0, 1.0).unwrap();
        assert!((v - closed.max_abs_dvx).abs() <= 1e-6 * closed.max_abs_dvx);
        assert!((y.abs() - closed.location.0).abs() < 1e-4);
        assert!((z.abs() - closed.location.1.abs()).abs() < 1e-4);
    }
}
