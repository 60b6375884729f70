//! Shared fixtures for the criterion benchmarks.

use arrival_core::{
    lambda_critical, GridSpec, IntegratorSettings, PacketParams, SpacePoint, TimeGrid,
};

pub fn params() -> PacketParams {
    PacketParams::default()
}

/// A spread of evaluation points around the packet at mid-flight.
pub fn points() -> Vec<SpacePoint> {
    let p = params();
    (0..64)
        .map(|i| {
            let f = i as f64 / 64.0;
            SpacePoint::new(p.center_x(2.5) + 2.0 * f - 1.0, f - 0.5, 0.5 - f, 2.5).unwrap()
        })
        .collect()
}

pub fn settings() -> IntegratorSettings {
    IntegratorSettings::default()
}

pub fn grid() -> TimeGrid {
    TimeGrid {
        t_max: 20.0,
        n_points: 201,
    }
}

/// Twice the critical `lambda` for the default packet.
pub fn strong_lambda() -> f64 {
    let p = params();
    2.0 * lambda_critical(&p, 4.0 * p.x1 / p.k, GridSpec::default())
        .expect("default packet has b != c")
        .lambda_crit
}
