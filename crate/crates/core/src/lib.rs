//! Arrival-time statistics for a free Gaussian packet under Bohmian and
//! Bohm-like guidance.
//!
//! [`wavepacket`] holds the closed-form state and the exact occupancy of the
//! half-space `x >= 0`; [`fields`] the guidance velocities and probability
//! currents; [`analysis`] the threshold in `lambda` above which the
//! Bohm-like velocity turns negative on the plane `x = 0`; [`trajectories`]
//! and [`ensemble`] integrate particles and estimate first-arrival curves.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod fd;
pub mod fields;
pub mod ode;
pub mod output;
pub mod quadrature;
pub mod special;
pub mod trajectories;
pub mod verify;
pub mod wavepacket;

pub use analysis::{
    lambda_critical, max_abs_delta_vx, negative_region, GridSpec, LambdaThreshold, PlaneExtremum,
    PlaneGrid, ScanGrid,
};
pub use ensemble::{
    mean_arrival_time, run_ensemble, sample_initial, ArrivalCurves, EnsembleRun, RunConfig,
    RunOptions, TimeGrid,
};
pub use error::{Error, Result};
pub use fields::{
    bohmian_velocity, current, delta_v, divergence_check, velocity, FieldKind, Velocity3,
};
pub use trajectories::{
    first_arrival, integrate, occupancy_at, CrossingEvent, Direction, FirstArrival,
    IntegratorSettings, Side, TrajectoryRecord,
};
pub use wavepacket::{
    density, density_gradient, psi, q_exact, q_quadrature, ComplexWidths, PacketParams, SpacePoint,
};
