//! Guidance velocity fields and probability currents.
//!
//! The Bohmian field is the phase gradient `grad S` of `psi = R exp(iS)`.
//! The Bohm-like field adds `delta_v = lambda (grad |psi|^2) x v_b`, whose
//! density-weighted divergence vanishes identically, so both fields carry the
//! same density forward in time. `delta_v` is a pseudo-vector: it is defined
//! in this fixed coordinate frame only.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::wavepacket::{
    density, density_gradient, density_parts, psi, ComplexWidths, PacketParams, SpacePoint,
};

/// Velocity law for the trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    Bohmian,
    BohmLike { lambda: f64 },
}

impl FieldKind {
    /// `lambda` must be finite and strictly positive; zero is `Bohmian`.
    pub fn bohm_like(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bohm-like lambda must be finite and positive, got {lambda}"
            )));
        }
        Ok(FieldKind::BohmLike { lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            FieldKind::Bohmian => 0.0,
            FieldKind::BohmLike { lambda } => lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity3 {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl Velocity3 {
    pub fn new(vx: f64, vy: f64, vz: f64) -> Self {
        Self { vx, vy, vz }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vx, self.vy, self.vz]
    }

    pub fn norm(self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.vz * self.vz).sqrt()
    }

    pub fn cross(self, o: Self) -> Self {
        Self {
            vx: self.vy * o.vz - self.vz * o.vy,
            vy: self.vz * o.vx - self.vx * o.vz,
            vz: self.vx * o.vy - self.vy * o.vx,
        }
    }
}

impl From<[f64; 3]> for Velocity3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl Add for Velocity3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.vx + o.vx, self.vy + o.vy, self.vz + o.vz)
    }
}

impl Sub for Velocity3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.vx - o.vx, self.vy - o.vy, self.vz - o.vz)
    }
}

impl Mul<Velocity3> for f64 {
    type Output = Velocity3;
    fn mul(self, v: Velocity3) -> Velocity3 {
        Velocity3::new(self * v.vx, self * v.vy, self * v.vz)
    }
}

/// `grad S` from the closed-form phase:
/// `v_x = k + t (x + x1 - k t) / |alpha|^4`, `v_y = y t / |beta|^4`,
/// `v_z = z t / |gamma|^4`.
pub fn bohmian_velocity(params: &PacketParams, p: &SpacePoint) -> Velocity3 {
    let t = p.t();
    let [fa, fb, fc] = ComplexWidths::at(params, t).abs4();
    let u = p.x() + params.x1 - params.k * t;
    Velocity3::new(params.k + t * u / fa, p.y() * t / fb, p.z() * t / fc)
}

/// `lambda (grad |psi|^2) x v_b`.
pub fn delta_v(params: &PacketParams, p: &SpacePoint, lambda: f64) -> Velocity3 {
    if lambda == 0.0 {
        return Velocity3::default();
    }
    let grad = Velocity3::from(density_gradient(params, p));
    lambda * grad.cross(bohmian_velocity(params, p))
}

pub fn velocity(params: &PacketParams, p: &SpacePoint, kind: FieldKind) -> Velocity3 {
    match kind {
        FieldKind::Bohmian => bohmian_velocity(params, p),
        FieldKind::BohmLike { lambda } => {
            let (rho, [fa, fb, fc], u) = density_parts(params, p);
            let t = p.t();
            let vb = Velocity3::new(params.k + t * u / fa, p.y() * t / fb, p.z() * t / fc);
            let grad = Velocity3::new(
                -2.0 * params.a * params.a * u / fa * rho,
                -2.0 * params.b * params.b * p.y() / fb * rho,
                -2.0 * params.c * params.c * p.z() / fc * rho,
            );
            vb + lambda * grad.cross(vb)
        }
    }
}

/// Probability current `|psi|^2 v`: `J_c` for `Bohmian`, `J_l` otherwise.
pub fn current(params: &PacketParams, p: &SpacePoint, kind: FieldKind) -> Velocity3 {
    density(params, p) * velocity(params, p, kind)
}

fn step_lengths(params: &PacketParams) -> [f64; 4] {
    [
        fd::step(params.a),
        fd::step(params.b),
        fd::step(params.c),
        fd::step(1.0),
    ]
}

/// Finite-difference divergence of a vector field, with the termwise sum of
/// magnitudes as a cancellation scale.
fn fd_divergence<F: Fn(&SpacePoint) -> Velocity3>(
    params: &PacketParams,
    p: &SpacePoint,
    field: F,
) -> (f64, f64) {
    let h = step_lengths(params);
    let mut div = 0.0;
    let mut scale = 0.0;
    for (axis, &step) in h.iter().take(3).enumerate() {
        let term = fd::partial(|q| field(q).to_array()[axis], p, axis, step);
        div += term;
        scale += term.abs();
    }
    (div, scale)
}

/// Finite-difference estimate of `div(|psi|^2 delta_v)`; zero up to
/// truncation and rounding.
pub fn divergence_check(params: &PacketParams, p: &SpacePoint, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    fd_divergence(params, p, |q| {
        density(params, q) * delta_v(params, q, lambda)
    })
    .0
}

/// Local scale for [`divergence_check`]: sum of `|d_i J_c,i|` at `p`.
pub fn divergence_scale(params: &PacketParams, p: &SpacePoint) -> f64 {
    fd_divergence(params, p, |q| current(params, q, FieldKind::Bohmian)).1
}

/// Continuity residual `div J + d|psi|^2/dt` and its termwise scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityResidual {
    pub residual: f64,
    pub scale: f64,
}

impl ContinuityResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

pub fn continuity_residual(
    params: &PacketParams,
    p: &SpacePoint,
    kind: FieldKind,
) -> ContinuityResidual {
    let (div, div_scale) = fd_divergence(params, p, |q| current(params, q, kind));
    let drho_dt = fd::partial(|q| density(params, q), p, 3, step_lengths(params)[3]);
    ContinuityResidual {
        residual: div + drho_dt,
        scale: div_scale + drho_dt.abs(),
    }
}

/// Phase gradient by central differences of `arg psi`, taken as
/// `arg(psi(p + h) / psi(p - h))` so no `2 pi` branch jump enters.
pub fn phase_gradient_fd(params: &PacketParams, p: &SpacePoint) -> Velocity3 {
    let h = step_lengths(params);
    let mut out = [0.0; 3];
    for (axis, v) in out.iter_mut().enumerate() {
        let fwd = psi(params, &p.shifted(axis, h[axis]));
        let bwd = psi(params, &p.shifted(axis, -h[axis]));
        *v = (fwd / bwd).arg() / (2.0 * h[axis]);
    }
    out.into()
}

/// Both candidate arrival densities at one point of the plane `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneCurrent {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub density: f64,
    /// x-component of `J_c`.
    pub jcx: f64,
    /// x-component of `J_l`.
    pub jlx: f64,
    pub vbx: f64,
    pub vblx: f64,
}

pub fn plane_current(params: &PacketParams, y: f64, z: f64, t: f64, lambda: f64) -> PlaneCurrent {
    let p = SpacePoint::raw(0.0, y, z, t);
    let rho = density(params, &p);
    let vb = bohmian_velocity(params, &p);
    let vbl = vb + delta_v(params, &p, lambda);
    PlaneCurrent {
        t,
        y,
        z,
        density: rho,
        jcx: rho * vb.vx,
        jlx: rho * vbl.vx,
        vbx: vb.vx,
        vblx: vbl.vx,
    }
}
