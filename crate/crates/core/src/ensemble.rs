//! Monte Carlo ensembles of trajectories and the arrival statistics built
//! from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldKind;
use crate::quadrature;
use crate::trajectories::{
    first_arrival, integrate, occupancy_at, FirstArrival, IntegratorSettings, Side,
    TrajectoryRecord,
};
use crate::wavepacket::{q_exact, q_limit, PacketParams, SpacePoint};

/// Uniform grid `t_i = t_max * i / (n_points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid.n_points must be at least 2, got {}",
                self.n_points
            )));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid.t_max must be finite and positive, got {}",
                self.t_max
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i == self.n_points - 1 {
                    self.t_max
                } else {
                    self.t_max * i as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: PacketParams,
    pub kind: FieldKind,
    pub n: usize,
    pub seed: u64,
    pub settings: IntegratorSettings,
    pub grid: TimeGrid,
}

impl RunConfig {
    /// Defaults everywhere, with the integration horizon matched to `grid`.
    pub fn new(params: PacketParams, kind: FieldKind, n: usize, seed: u64, grid: TimeGrid) -> Self {
        Self {
            params,
            kind,
            n,
            seed,
            settings: IntegratorSettings {
                t_max: grid.t_max,
                ..IntegratorSettings::default()
            },
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.settings.validate()?;
        self.grid.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidConfig("run.n must be at least 1".into()));
        }
        if let FieldKind::BohmLike { lambda } = self.kind {
            FieldKind::bohm_like(lambda)?;
        }
        if self.grid.t_max > self.settings.t_max {
            return Err(Error::InvalidConfig(format!(
                "grid.t_max = {} exceeds the integration horizon {}",
                self.grid.t_max, self.settings.t_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; the global pool when unset.
    pub workers: Option<usize>,
    pub keep_records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCurves {
    pub t_grid: Vec<f64>,
    pub q_exact: Vec<f64>,
    pub q_emp: Vec<f64>,
    pub p_emp: Vec<f64>,
    pub se_q: Vec<f64>,
    pub se_p: Vec<f64>,
    /// Trajectories that integrated successfully.
    pub n: usize,
    pub n_failed: usize,
    pub n_started_inside: usize,
    pub n_arrived: usize,
    pub leaving_events: usize,
    /// Trajectories with at least one `Leaving` event.
    pub returning_trajectories: usize,
    /// Fraction arrived by the horizon.
    pub p_inf_emp: f64,
    pub t_bar_emp: Option<f64>,
    /// Standard error of `t_bar_emp`.
    pub t_bar_se: Option<f64>,
    /// Exact mean arrival time conditioned on arrival before the horizon,
    /// with `P = Q`. Unset when the exact arrival mass underflows.
    pub t_bar_exact: Option<f64>,
    /// `1 - erfc(-a k) / 2`.
    pub never_arrive_exact: f64,
    /// `Q(inf) - Q(t_max)`: how much of the exact arrival mass lies beyond
    /// the horizon.
    pub censoring_bound: f64,
}

impl ArrivalCurves {
    /// `max_t (p_emp - q_emp)`: the fraction that arrived and has left again.
    pub fn max_gap(&self) -> (f64, f64) {
        self.t_grid
            .iter()
            .zip(self.p_emp.iter().zip(&self.q_emp))
            .map(|(&t, (p, q))| (t, p - q))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub curves: ArrivalCurves,
    pub records: Option<Vec<TrajectoryRecord>>,
}

/// Independent draws from `|psi(., 0)|^2`: normals with means `(-x1, 0, 0)`
/// and standard deviations `(a, b, c) / sqrt 2`.
pub fn sample_initial(params: &PacketParams, n: usize, seed: u64) -> Vec<SpacePoint> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let nx = Normal::new(-params.x1, params.a * s).expect("validated width");
    let ny = Normal::new(0.0, params.b * s).expect("validated width");
    let nz = Normal::new(0.0, params.c * s).expect("validated width");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = nx.sample(&mut rng);
            let y = ny.sample(&mut rng);
            let z = nz.sample(&mut rng);
            SpacePoint::raw(x, y, z, 0.0)
        })
        .collect()
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `E[T | T <= t_max]` for the exact occupancy curve,
/// `integral_0^t_max [Q(t_max) - Q(t)] dt / Q(t_max)`.
///
/// The unconditioned mean diverges: `Q(inf) - Q(t)` decays only like `1/t`.
pub fn horizon_mean_exact(params: &PacketParams, t_max: f64) -> Result<f64> {
    let q_end = q_exact(params, t_max);
    if q_end <= 0.0 {
        return Err(Error::NoArrivals);
    }
    let mut breaks = vec![0.0];
    if params.k > 0.0 {
        let t_mid = params.x1 / params.k;
        if t_mid > 0.0 && t_mid < t_max {
            breaks.push(t_mid);
        }
    }
    breaks.push(t_max);
    let est =
        quadrature::integrate_breaks(&mut |t| q_end - q_exact(params, t), &breaks, 1e-13, 1e-13);
    let est = quadrature::require(est, 1e-9 * t_max.max(1.0))?;
    Ok(est.value / q_end)
}

/// Mean of a tabulated CDF via `integral [P_end - P(t)] dt / P_end`, with `P`
/// held constant from each grid point to the next.
pub fn cdf_mean(t_grid: &[f64], p: &[f64]) -> Option<f64> {
    let p_end = *p.last()?;
    if p_end <= 0.0 {
        return None;
    }
    let area: f64 = t_grid
        .windows(2)
        .zip(p)
        .map(|(w, &pi)| (w[1] - w[0]) * (p_end - pi))
        .sum();
    Some(t_grid[0] + area / p_end)
}

/// Empirical and exact mean arrival times.
pub fn mean_arrival_time(curves: &ArrivalCurves) -> Result<(f64, f64)> {
    match (curves.t_bar_emp, curves.t_bar_exact) {
        (Some(emp), Some(exact)) if curves.p_inf_emp > 0.0 => Ok((emp, exact)),
        _ => Err(Error::NoArrivals),
    }
}

/// Builds the arrival curves from integrated records.
pub fn summarize(
    params: &PacketParams,
    grid: &TimeGrid,
    records: &[TrajectoryRecord],
    n_failed: usize,
) -> Result<ArrivalCurves> {
    let n = records.len();
    if n == 0 {
        return Err(Error::InvalidConfig("no trajectories to summarize".into()));
    }
    let t_grid = grid.times();
    let mut arrivals: Vec<f64> = records
        .iter()
        .filter_map(|r| match first_arrival(r) {
            FirstArrival::At(t) => Some(t),
            FirstArrival::NeverArrived => None,
        })
        .collect();
    arrivals.sort_by(f64::total_cmp);

    let p_emp: Vec<f64> = t_grid
        .iter()
        .map(|&t| arrivals.partition_point(|&a| a <= t) as f64 / n as f64)
        .collect();
    let mut inside = vec![0usize; t_grid.len()];
    for r in records {
        for (count, &t) in inside.iter_mut().zip(&t_grid) {
            if occupancy_at(r, t) == Side::Plus {
                *count += 1;
            }
        }
    }
    let q_emp: Vec<f64> = inside.iter().map(|&c| c as f64 / n as f64).collect();

    let n_arrived = arrivals.len();
    let (t_bar_emp, t_bar_se) = if n_arrived > 0 {
        let mean = arrivals.iter().sum::<f64>() / n_arrived as f64;
        let se = if n_arrived > 1 {
            let var =
                arrivals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n_arrived - 1) as f64;
            (var / n_arrived as f64).sqrt()
        } else {
            f64::INFINITY
        };
        (Some(mean), Some(se))
    } else {
        (None, None)
    };

    Ok(ArrivalCurves {
        q_exact: t_grid.iter().map(|&t| q_exact(params, t)).collect(),
        se_q: q_emp.iter().map(|&q| binomial_se(q, n)).collect(),
        se_p: p_emp.iter().map(|&p| binomial_se(p, n)).collect(),
        t_grid,
        q_emp,
        p_emp,
        n,
        n_failed,
        n_started_inside: records.iter().filter(|r| r.started_inside()).count(),
        n_arrived,
        leaving_events: records.iter().map(|r| r.leaving_events()).sum(),
        returning_trajectories: records.iter().filter(|r| r.leaving_events() > 0).count(),
        p_inf_emp: n_arrived as f64 / n as f64,
        t_bar_emp,
        t_bar_se,
        t_bar_exact: horizon_mean_exact(params, grid.t_max).ok(),
        never_arrive_exact: 1.0 - q_limit(params),
        censoring_bound: q_limit(params) - q_exact(params, grid.t_max),
    })
}

/// Samples, integrates, and summarises one ensemble. Results depend only on
/// the config, never on the worker count.
pub fn run_ensemble(config: &RunConfig, options: RunOptions) -> Result<EnsembleRun> {
    config.validate()?;
    let starts = sample_initial(&config.params, config.n, config.seed);
    let work = || -> Vec<Result<TrajectoryRecord>> {
        starts
            .par_iter()
            .map(|p| integrate(&config.params, config.kind, p.position(), &config.settings))
            .collect()
    };
    let results = match options.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut records = Vec::with_capacity(results.len());
    let mut failed = 0;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(Error::StepFailure { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if failed * 1000 > config.n {
        return Err(Error::TooManyFailures {
            failed,
            n: config.n,
        });
    }
    let curves = summarize(&config.params, &config.grid, &records, failed)?;
    Ok(EnsembleRun {
        curves,
        records: options.keep_records.then_some(records),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erfc;

    #[test]
    fn sample_moments() {
        let params = PacketParams::default();
        let n = 100_000;
        let pts = sample_initial(&params, n, 7);
        let mean_x = pts.iter().map(|p| p.x()).sum::<f64>() / n as f64;
        let sd = params.a / 2f64.sqrt();
        assert!((mean_x + params.x1).abs() < 4.0 * sd / (n as f64).sqrt());
        let var_y = pts.iter().map(|p| p.y() * p.y()).sum::<f64>() / n as f64;
        assert!((var_y / (params.b * params.b / 2.0) - 1.0).abs() < 0.05);
        assert!(pts.iter().all(|p| p.t() == 0.0));
    }

    #[test]
    fn initial_tail_fraction() {
        // x1/a = 1.5: Q(0) = erfc(1.5)/2 ~ 0.017, large enough to count.
        let params = PacketParams::new(1.0, 1.0, 0.5, 2.0, 1.5).unwrap();
        let n = 100_000;
        let inside = sample_initial(&params, n, 3)
            .iter()
            .filter(|p| p.x() >= 0.0)
            .count();
        let q0 = 0.5 * erfc(1.5);
        let frac = inside as f64 / n as f64;
        assert!(
            (frac - q0).abs() < 4.0 * binomial_se(q0, n),
            "{frac} vs {q0}"
        );
    }

    #[test]
    fn sampling_is_seeded() {
        let params = PacketParams::default();
        assert_eq!(
            sample_initial(&params, 10, 1),
            sample_initial(&params, 10, 1)
        );
        assert_ne!(
            sample_initial(&params, 10, 1),
            sample_initial(&params, 10, 2)
        );
    }

    #[test]
    fn cdf_mean_of_point_mass() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|&x| if x >= 3.0 - 1e-12 { 0.8 } else { 0.0 })
            .collect();
        assert!((cdf_mean(&t, &p).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(cdf_mean(&t, &vec![0.0; t.len()]), None);
    }

    #[test]
    fn ballistic_limit_of_mean() {
        let params = PacketParams::new(1.0, 1.0, 0.5, 10.0, 5.0).unwrap();
        let t_bar = horizon_mean_exact(&params, 8.0 * params.x1 / params.k).unwrap();
        assert!((t_bar / 0.5 - 1.0).abs() < 0.1, "{t_bar}");
    }

    #[test]
    fn horizon_mean_matches_cdf_mean() {
        let params = PacketParams::default();
        let grid = TimeGrid {
            t_max: 20.0,
            n_points: 200_001,
        };
        let t = grid.times();
        let q: Vec<f64> = t.iter().map(|&s| q_exact(&params, s)).collect();
        let exact = horizon_mean_exact(&params, 20.0).unwrap();
        let riemann = cdf_mean(&t, &q).unwrap();
        assert!((exact - riemann).abs() < 1e-3, "{exact} vs {riemann}");
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid {
            t_max: 1.0,
            n_points: 1
        }
        .validate()
        .is_err());
        assert!(TimeGrid {
            t_max: 0.0,
            n_points: 5
        }
        .validate()
        .is_err());
        let g = TimeGrid {
            t_max: 2.0,
            n_points: 5,
        };
        assert_eq!(g.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn single_trajectory_is_deterministic() {
        let cfg = RunConfig::new(
            PacketParams::default(),
            FieldKind::Bohmian,
            1,
            42,
            TimeGrid {
                t_max: 8.0,
                n_points: 17,
            },
        );
        let opts = RunOptions {
            workers: Some(1),
            keep_records: true,
        };
        let a = run_ensemble(&cfg, opts).unwrap();
        let b = run_ensemble(&cfg, opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.unwrap().len(), 1);
    }

    #[test]
    fn mean_requires_arrivals() {
        let cfg = RunConfig::new(
            PacketParams::new(1.0, 1.0, 0.5, 0.1, 20.0).unwrap(),
            FieldKind::Bohmian,
            5,
            1,
            TimeGrid {
                t_max: 1.0,
                n_points: 3,
            },
        );
        let run = run_ensemble(&cfg, RunOptions::default()).unwrap();
        assert_eq!(run.curves.n_arrived, 0);
        assert_eq!(mean_arrival_time(&run.curves), Err(Error::NoArrivals));
    }
}
