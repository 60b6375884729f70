//! Single-particle trajectories `dr/dt = v(r, t)` with plane-crossing events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{velocity, FieldKind};
use crate::ode::{self, DenseStep, Step, Tolerance};
use crate::wavepacket::{PacketParams, SpacePoint};

/// Side of the plane `x = 0`; `x >= 0` counts as inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn of(x: f64) -> Self {
        if x >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    fn flip(self) -> Self {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `x < 0` to `x >= 0`.
    Entering,
    /// `x >= 0` to `x < 0`.
    Leaving,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Entering => "entering",
            Direction::Leaving => "leaving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t_cross: f64,
    pub y: f64,
    pub z: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub max_step: f64,
    /// Width of the time bracket left by crossing bisection.
    pub event_tol: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_max: 20.0,
            max_step: 0.5,
            event_tol: 1e-9,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "integrator.{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same settings with both tolerances halved.
    pub fn halved(&self) -> Self {
        Self {
            rel_tol: self.rel_tol / 2.0,
            abs_tol: self.abs_tol / 2.0,
            ..*self
        }
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            abs: self.abs_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps: u64,
    pub rejected: u64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub r0: [f64; 3],
    pub events: Vec<CrossingEvent>,
    pub t_max: f64,
    pub r_final: [f64; 3],
    pub stats: TrajectoryStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstArrival {
    At(f64),
    /// No arrival before the horizon; censored, not proven.
    NeverArrived,
}

impl TrajectoryRecord {
    pub fn started_inside(&self) -> bool {
        Side::of(self.r0[0]) == Side::Plus
    }

    pub fn leaving_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.direction == Direction::Leaving)
            .count()
    }
}

/// Side of the plane at time `t`, from the start side and the event list.
pub fn occupancy_at(record: &TrajectoryRecord, t: f64) -> Side {
    let crossings = record.events.iter().take_while(|e| e.t_cross <= t).count();
    let start = Side::of(record.r0[0]);
    if crossings % 2 == 0 {
        start
    } else {
        start.flip()
    }
}

/// First entry into `x >= 0`; zero for trajectories that start there.
pub fn first_arrival(record: &TrajectoryRecord) -> FirstArrival {
    if record.started_inside() {
        return FirstArrival::At(0.0);
    }
    record
        .events
        .iter()
        .find(|e| e.direction == Direction::Entering)
        .map_or(FirstArrival::NeverArrived, |e| FirstArrival::At(e.t_cross))
}

fn max_step_fn(params: &PacketParams, settings: &IntegratorSettings) -> impl Fn(f64) -> f64 {
    let narrow = params.b.min(params.c).powi(2);
    let early = params.b.max(params.c).powi(2);
    let cap = settings.max_step;
    move |t: f64| {
        if t < early {
            cap.min(narrow / 4.0)
        } else {
            cap
        }
    }
}

fn rhs(params: &PacketParams, kind: FieldKind) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] + '_ {
    move |t, r| velocity(params, &SpacePoint::raw(r[0], r[1], r[2], t), kind).to_array()
}

struct EventScan {
    events: Vec<CrossingEvent>,
    event_tol: f64,
}

impl EventScan {
    const PROBES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

    fn scan(&mut self, step: &mut Step<3>) {
        // A crossing needs x to reach zero within the step; away from the
        // plane the endpoint slopes bound how far x can travel.
        let reach = 2.0 * step.h.abs() * step.f0[0].abs().max(step.f1[0].abs());
        let near = step.y0[0].abs().min(step.y1[0].abs()) <= reach;
        if !near && Side::of(step.y0[0]) == Side::of(step.y1[0]) {
            return;
        }
        let dense = step.dense();
        let mut prev = (0.0, dense.y0);
        for &theta in &Self::PROBES[1..] {
            let y = if theta == 1.0 {
                dense.y1
            } else {
                dense.at_fraction(theta)
            };
            if Side::of(prev.1[0]) != Side::of(y[0]) {
                self.locate(dense, prev.0, theta);
            }
            prev = (theta, y);
        }
    }

    fn locate(&mut self, step: &DenseStep<3>, mut lo: f64, mut hi: f64) {
        let from = Side::of(step.at_fraction(lo)[0]);
        let width = self.event_tol / step.h.abs();
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            if Side::of(step.at_fraction(mid)[0]) == from {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let r = step.at_fraction(theta);
        let event = CrossingEvent {
            t_cross: step.t0 + theta * step.h,
            y: r[1],
            z: r[2],
            direction: match from {
                Side::Minus => Direction::Entering,
                Side::Plus => Direction::Leaving,
            },
        };
        match self.events.last() {
            // Grazing chatter: a pair closer than the event tolerance cancels.
            Some(last) if event.t_cross - last.t_cross < self.event_tol => {
                self.events.pop();
            }
            _ => self.events.push(event),
        }
    }
}

/// Integrates one trajectory from `r0` at `t = 0` to `settings.t_max`.
pub fn integrate(
    params: &PacketParams,
    kind: FieldKind,
    r0: [f64; 3],
    settings: &IntegratorSettings,
) -> Result<TrajectoryRecord> {
    integrate_sampled(params, kind, r0, settings, &[]).map(|(record, _)| record)
}

/// [`integrate`], also returning positions at the ascending `samples` times
/// read from the dense output.
pub fn integrate_sampled(
    params: &PacketParams,
    kind: FieldKind,
    r0: [f64; 3],
    settings: &IntegratorSettings,
    samples: &[f64],
) -> Result<(TrajectoryRecord, Vec<[f64; 3]>)> {
    let mut scan = EventScan {
        events: Vec::new(),
        event_tol: settings.event_tol,
    };
    let mut positions = Vec::with_capacity(samples.len());
    let mut pending = samples.iter().copied().peekable();
    while let Some(&s) = pending.peek() {
        if s > 0.0 {
            break;
        }
        positions.push(r0);
        pending.next();
    }
    let (r_final, stats) = ode::solve(
        rhs(params, kind),
        0.0,
        r0,
        settings.t_max,
        &settings.tolerance(),
        max_step_fn(params, settings),
        |step: &mut Step<3>| {
            scan.scan(step);
            while let Some(&s) = pending.peek() {
                if s > step.t1() {
                    break;
                }
                positions.push(step.dense().at(s));
                pending.next();
            }
        },
    )?;
    let record = TrajectoryRecord {
        r0,
        events: scan.events,
        t_max: settings.t_max,
        r_final,
        stats: TrajectoryStats {
            steps: stats.accepted,
            rejected: stats.rejected,
            max_error: stats.max_error,
        },
    };
    Ok((record, positions))
}

/// Carries a position from `t0` to `t1` (either direction, both `>= 0`).
pub fn advance(
    params: &PacketParams,
    kind: FieldKind,
    r: [f64; 3],
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<[f64; 3]> {
    if t0 < 0.0 || t1 < 0.0 {
        return Err(Error::NegativeTime(t0.min(t1)));
    }
    ode::solve(
        rhs(params, kind),
        t0,
        r,
        t1,
        &settings.tolerance(),
        max_step_fn(params, settings),
        |_: &mut Step<3>| {},
    )
    .map(|(r, _)| r)
}
