//! Central finite differences used by the verification oracles.

use crate::wavepacket::SpacePoint;

/// `eps^(1/3) * scale`, balancing truncation against rounding for a
/// second-order central difference.
pub fn step(scale: f64) -> f64 {
    f64::EPSILON.cbrt() * scale
}

/// Partial derivative of `f` along `axis` (0..3 spatial, 3 for time).
///
/// Time derivatives closer than one step to `t = 0` switch to the
/// second-order forward stencil so no evaluation lands before the start.
pub fn partial<F: Fn(&SpacePoint) -> f64>(f: F, p: &SpacePoint, axis: usize, h: f64) -> f64 {
    if axis == 3 && p.t() < h {
        let f0 = f(p);
        let f1 = f(&p.shifted(3, h));
        let f2 = f(&p.shifted(3, 2.0 * h));
        return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
    }
    (f(&p.shifted(axis, h)) - f(&p.shifted(axis, -h))) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quadratics() {
        let p = SpacePoint::new(0.3, -1.2, 2.0, 0.0).unwrap();
        let f = |q: &SpacePoint| q.x() * q.x() + 3.0 * q.y() + q.t() * q.t() + 2.0 * q.t();
        assert!((partial(f, &p, 0, step(1.0)) - 0.6).abs() < 1e-9);
        assert!((partial(f, &p, 1, step(1.0)) - 3.0).abs() < 1e-9);
        assert!((partial(f, &p, 3, step(1.0)) - 2.0).abs() < 1e-9);
    }
}
