//! Extremal analysis of the Bohm-like x-velocity on the arrival plane `x = 0`.
//!
//! On the plane the Bohmian x-velocity depends on `t` only,
//! `v_bx(0, t) = (k a^4 + x1 t) / |alpha|^4`, while the perturbation is
//! `delta_v_x = 2 lambda |psi|^2 (c^2 - b^2) Y Z t / (|beta|^4 |gamma|^4)`.
//! The perturbation peaks at `Y = |beta|^2 / (sqrt 2 b)`,
//! `Z = |gamma|^2 / (sqrt 2 c)` (up to signs), so the threshold `lambda_crit`
//! below which `v_blx > 0` everywhere on the plane is a one-dimensional
//! minimisation over `t` of `v_bx / (|delta_v_x|_max / lambda)`.

use std::f64::consts::{E, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{velocity, FieldKind};
use crate::wavepacket::{density, ComplexWidths, PacketParams, SpacePoint};

/// Bohmian x-velocity on the plane.
pub fn plane_vbx(params: &PacketParams, t: f64) -> f64 {
    let a4 = params.a.powi(4);
    (params.k * a4 + params.x1 * t) / (a4 + t * t)
}

/// x-component of the perturbation on the plane, in closed form.
pub fn plane_delta_vx(params: &PacketParams, y: f64, z: f64, t: f64, lambda: f64) -> f64 {
    let [_, fb, fc] = ComplexWidths::at(params, t).abs4();
    let rho = density(params, &SpacePoint::raw(0.0, y, z, t));
    2.0 * lambda * rho * (params.c.powi(2) - params.b.powi(2)) * y * z * t / (fb * fc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneExtremum {
    pub t: f64,
    pub max_abs_dvx: f64,
    /// Extremal point in the quadrant where `delta_v_x < 0` for `lambda > 0`;
    /// the mirror point `(-Y, -Z)` is equivalent.
    pub location: (f64, f64),
    pub vbx_at_plane: f64,
}

fn unit_max_abs_dvx(params: &PacketParams, t: f64) -> f64 {
    let [fa, fb, fc] = ComplexWidths::at(params, t).abs4();
    let shift = params.x1 - params.k * t;
    params.a * (params.b.powi(2) - params.c.powi(2)).abs() * t
        / (PI.powf(1.5) * E * fa.sqrt() * fb * fc)
        * (-params.a.powi(2) * shift * shift / fa).exp()
}

/// Closed-form `max_{Y,Z} |delta_v_x(0, Y, Z, t)|` and its location.
pub fn max_abs_delta_vx(params: &PacketParams, t: f64, lambda: f64) -> Result<PlaneExtremum> {
    if params.b == params.c {
        return Err(Error::ThresholdUndefined);
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let [_, bb, gg] = ComplexWidths::at(params, t).abs2();
    let y = bb / (SQRT_2 * params.b);
    let z = gg / (SQRT_2 * params.c);
    let z = if params.c < params.b { z } else { -z };
    Ok(PlaneExtremum {
        t,
        max_abs_dvx: lambda * unit_max_abs_dvx(params, t),
        location: (y, z),
        vbx_at_plane: plane_vbx(params, t),
    })
}

/// Resolution of the threshold scan and of its certification grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points in the one-dimensional time scan of the velocity ratio.
    pub n_t: usize,
    /// Times in the certification grid (plus the worst time itself).
    pub n_t_plane: usize,
    /// Nodes per side of the square plane grid.
    pub n_plane: usize,
    /// Plane half-width; `5 max(|beta|^2, |gamma|^2)^(1/2)` at the horizon when unset.
    pub half_width: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_t: 2001,
            n_t_plane: 101,
            n_plane: 201,
            half_width: None,
        }
    }
}

/// Default scan horizon, `4 x1 / k`: the perturbation peaks near `x1 / k`.
pub fn default_threshold_horizon(params: &PacketParams) -> f64 {
    if params.k > 0.0 && params.x1 > 0.0 {
        4.0 * params.x1 / params.k
    } else {
        10.0 * params.a.max(params.b).max(params.c).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    pub lambda_crit: f64,
    /// Time at which `v_bx / (|delta_v_x|_max / lambda)` is smallest.
    pub t_worst: f64,
    /// `(refined minimum, best scan sample)`; the refined value is `lambda_crit`.
    pub bracket: (f64, f64),
    pub t_max: f64,
    pub grid: GridSpec,
}

fn ratio(params: &PacketParams, t: f64) -> f64 {
    plane_vbx(params, t) / unit_max_abs_dvx(params, t)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * (1.0 + lo.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Smallest `lambda` for which the Bohm-like x-velocity turns negative
/// somewhere on the plane during `(0, t_max]`.
pub fn lambda_critical(
    params: &PacketParams,
    t_max: f64,
    grid: GridSpec,
) -> Result<LambdaThreshold> {
    if params.b == params.c {
        return Err(Error::ThresholdUndefined);
    }
    if !(t_max.is_finite() && t_max > 0.0) || grid.n_t < 3 {
        return Err(Error::InvalidConfig(format!(
            "threshold scan needs t_max > 0 and at least 3 points (t_max = {t_max}, n_t = {})",
            grid.n_t
        )));
    }
    let dt = t_max / grid.n_t as f64;
    let (best, scan_min) = (1..=grid.n_t)
        .map(|i| (i, ratio(params, i as f64 * dt)))
        .filter(|(_, r)| r.is_finite() && *r > 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::NoFiniteMinimum)?;
    let lo = (best - 1) as f64 * dt;
    let hi = ((best + 1) as f64 * dt).min(t_max);
    let (t_worst, refined) = golden_min(|t| ratio(params, t), lo.max(dt * 1e-6), hi, 1e-13);
    let (t_worst, lambda_crit) = if refined <= scan_min {
        (t_worst, refined)
    } else {
        (best as f64 * dt, scan_min)
    };
    Ok(LambdaThreshold {
        lambda_crit,
        t_worst,
        bracket: (lambda_crit, scan_min),
        t_max,
        grid,
    })
}

/// Square grid of `(Y, Z)` nodes on the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneGrid {
    pub half_width: f64,
    pub n: usize,
}

impl PlaneGrid {
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n.max(2);
        (0..n).map(move |i| -self.half_width + 2.0 * self.half_width * i as f64 / (n - 1) as f64)
    }
}

/// Plane-time grid on which the threshold is certified: a uniform time scan
/// plus `t_worst`, and at every time the square plane grid augmented with
/// the four extremal points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub times: Vec<f64>,
    pub plane: PlaneGrid,
}

impl ScanGrid {
    pub fn for_threshold(params: &PacketParams, threshold: &LambdaThreshold) -> Self {
        let spec = threshold.grid;
        let n = spec.n_t_plane.max(1);
        let mut times: Vec<f64> = (1..=n)
            .map(|i| threshold.t_max * i as f64 / n as f64)
            .collect();
        times.push(threshold.t_worst);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let half_width = spec.half_width.unwrap_or_else(|| {
            let [_, bb, gg] = ComplexWidths::at(params, threshold.t_max).abs2();
            5.0 * bb.max(gg).sqrt()
        });
        Self {
            times,
            plane: PlaneGrid {
                half_width,
                n: spec.n_plane,
            },
        }
    }
}

/// Lowest Bohm-like x-velocity found on a scan grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneMinimum {
    pub vx: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

fn plane_points(params: &PacketParams, plane: &PlaneGrid, t: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = plane
        .nodes()
        .flat_map(|y| plane.nodes().map(move |z| (y, z)))
        .collect();
    if params.b != params.c {
        let [_, bb, gg] = ComplexWidths::at(params, t).abs2();
        let (ys, zs) = (bb / (SQRT_2 * params.b), gg / (SQRT_2 * params.c));
        for (sy, sz) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            pts.push((sy * ys, sz * zs));
        }
    }
    pts
}

/// Minimum of `v_blx(0, Y, Z, t)` over the scan grid, evaluated through the
/// full velocity field.
pub fn plane_minimum(params: &PacketParams, lambda: f64, grid: &ScanGrid) -> PlaneMinimum {
    let kind = if lambda > 0.0 {
        FieldKind::BohmLike { lambda }
    } else {
        FieldKind::Bohmian
    };
    let mut best = PlaneMinimum {
        vx: f64::INFINITY,
        y: 0.0,
        z: 0.0,
        t: 0.0,
    };
    for &t in &grid.times {
        for (y, z) in plane_points(params, &grid.plane, t) {
            let vx = velocity(params, &SpacePoint::raw(0.0, y, z, t), kind).vx;
            if vx < best.vx {
                best = PlaneMinimum { vx, y, z, t };
            }
        }
    }
    best
}

/// Plane nodes where the Bohm-like x-velocity is negative at time `t`.
pub fn negative_region(
    params: &PacketParams,
    lambda: f64,
    t: f64,
    plane: &PlaneGrid,
) -> Vec<(f64, f64)> {
    let kind = FieldKind::BohmLike { lambda };
    plane
        .nodes()
        .flat_map(|y| plane.nodes().map(move |z| (y, z)))
        .filter(|&(y, z)| velocity(params, &SpacePoint::raw(0.0, y, z, t), kind).vx < 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{bohmian_velocity, delta_v};

    #[test]
    fn plane_velocity_matches_field() {
        let params = PacketParams::new(1.3, 1.0, 0.5, 2.0, 5.0).unwrap();
        for t in [0.0, 0.4, 2.5, 11.0] {
            let v = bohmian_velocity(&params, &SpacePoint::new(0.0, 0.7, -1.1, t).unwrap()).vx;
            assert!((v - plane_vbx(&params, t)).abs() < 1e-14 * v);
        }
    }

    #[test]
    fn extremum_basics() {
        let params = PacketParams::default();
        let e0 = max_abs_delta_vx(&params, 0.0, 1.0).unwrap();
        assert_eq!(e0.max_abs_dvx, 0.0);
        for t in [0.3, 2.0, 7.0] {
            let one = max_abs_delta_vx(&params, t, 1.0).unwrap();
            let many = max_abs_delta_vx(&params, t, 37.5).unwrap();
            assert_eq!(many.max_abs_dvx, 37.5 * one.max_abs_dvx);
            let (y, z) = one.location;
            let at = delta_v(&params, &SpacePoint::new(0.0, y, z, t).unwrap(), 1.0).vx;
            assert!(at < 0.0);
            assert!((at.abs() - one.max_abs_dvx).abs() < 1e-12 * one.max_abs_dvx);
        }
        let round = PacketParams::new(1.0, 0.8, 0.8, 2.0, 5.0).unwrap();
        assert_eq!(
            max_abs_delta_vx(&round, 1.0, 1.0),
            Err(Error::ThresholdUndefined)
        );
    }

    #[test]
    fn extremum_quadrant_follows_widths() {
        let wide_z = PacketParams::new(1.0, 0.5, 1.0, 2.0, 5.0).unwrap();
        let e = max_abs_delta_vx(&wide_z, 2.0, 1.0).unwrap();
        assert!(e.location.0 > 0.0 && e.location.1 < 0.0);
        let (y, z) = e.location;
        assert!(delta_v(&wide_z, &SpacePoint::new(0.0, y, z, 2.0).unwrap(), 1.0).vx < 0.0);
    }

    #[test]
    fn late_time_decay_is_quartic() {
        let params = PacketParams::default();
        let t = 1e4;
        let m = max_abs_delta_vx(&params, t, 1.0).unwrap().max_abs_dvx;
        // Leading term: a |b^2 - c^2| / (pi^1.5 e) exp(-a^2 k^2) t^-4.
        let lead = params.a * 0.75 / (PI.powf(1.5) * E) * (-4.0f64).exp() / t.powi(4);
        assert!((m / lead - 1.0).abs() < 0.01, "{}", m / lead);
    }

    #[test]
    fn threshold_rejects_round_packet() {
        let round = PacketParams::new(1.0, 1.0, 1.0, 2.0, 5.0).unwrap();
        assert_eq!(
            lambda_critical(&round, 10.0, GridSpec::default()),
            Err(Error::ThresholdUndefined)
        );
    }

    #[test]
    fn threshold_bracket_is_ordered() {
        let params = PacketParams::default();
        let th = lambda_critical(
            &params,
            default_threshold_horizon(&params),
            GridSpec::default(),
        )
        .unwrap();
        assert!(th.lambda_crit > 0.0 && th.lambda_crit.is_finite());
        assert!(th.bracket.0 <= th.bracket.1);
        assert!(th.t_worst > 0.0 && th.t_worst < th.t_max);
    }

    #[test]
    fn negative_region_empty_at_start() {
        let params = PacketParams::default();
        let plane = PlaneGrid {
            half_width: 6.0,
            n: 41,
        };
        assert!(negative_region(&params, 1e9, 0.0, &plane).is_empty());
    }
}
