//! The five subcommands. Each one writes its files plus `manifest.toml` into
//! the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use arrival_core::analysis::{plane_minimum, plane_vbx, PlaneMinimum};
use arrival_core::ensemble::horizon_mean_exact;
use arrival_core::fields::plane_current;
use arrival_core::output;
use arrival_core::verify::{run_suite, CheckResult, VerifyOptions};
use arrival_core::wavepacket::{q_initial, q_limit};
use arrival_core::{
    max_abs_delta_vx, q_exact, run_ensemble, ArrivalCurves, FieldKind, PlaneGrid, RunOptions,
    ScanGrid,
};
use serde::Serialize;

use crate::config::{Config, LambdaChoice, ManifestInfo};

/// Raised when `verify` completes but some check is out of tolerance.
#[derive(Debug)]
pub struct VerificationFailed {
    pub failed: Vec<String>,
}

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.failed.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

pub struct Env {
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl Env {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn write_manifest(&self, command: &str, config: &Config) -> Result<()> {
        let mut echo = config.clone();
        echo.manifest = Some(ManifestInfo {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        });
        let text = toml::to_string(&echo).context("serialising manifest")?;
        fs::write(self.out.join("manifest.toml"), text).context("writing manifest.toml")?;
        Ok(())
    }

    fn options(&self, keep_records: bool) -> RunOptions {
        RunOptions {
            workers: self.workers,
            keep_records,
        }
    }
}

fn prepare(env: &Env, config: &mut Config) -> Result<()> {
    config.resolve()?;
    fs::create_dir_all(&env.out).with_context(|| format!("creating {}", env.out.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct ExactSummary {
    q_initial: f64,
    q_limit: f64,
    t_max: f64,
    q_at_t_max: f64,
    t_bar_exact: Option<f64>,
    censoring_bound: f64,
}

pub fn exact(env: &Env, mut config: Config) -> Result<()> {
    prepare(env, &mut config)?;
    let params = config.packet.params()?;
    let grid = config.time_grid();
    grid.validate()?;
    let t = grid.times();
    let q: Vec<f64> = t.iter().map(|&t| q_exact(&params, t)).collect();

    let mut w = env.create("exact.csv")?;
    output::write_exact_csv(&mut w, &t, &q)?;
    w.flush()?;
    let summary = ExactSummary {
        q_initial: q_initial(&params),
        q_limit: q_limit(&params),
        t_max: grid.t_max,
        q_at_t_max: q_exact(&params, grid.t_max),
        t_bar_exact: horizon_mean_exact(&params, grid.t_max).ok(),
        censoring_bound: q_limit(&params) - q_exact(&params, grid.t_max),
    };
    env.write_json("summary.json", &summary)?;
    env.write_manifest("exact", &config)?;
    println!("Q(0) = {:e}", summary.q_initial);
    println!("Q(inf) = {:e}", summary.q_limit);
    match summary.t_bar_exact {
        Some(t) => println!("mean arrival time (t <= {}) = {t}", grid.t_max),
        None => println!(
            "mean arrival time undefined: no arrivals by t = {}",
            grid.t_max
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    kind: &'static str,
    lambda: Option<LambdaChoice>,
    n: usize,
    n_failed: usize,
    n_started_inside: usize,
    n_arrived: usize,
    leaving_events: usize,
    returning_trajectories: usize,
    p_inf_emp: f64,
    never_arrive_emp: f64,
    never_arrive_exact: f64,
    censoring_bound: f64,
    t_bar_emp: Option<f64>,
    t_bar_se: Option<f64>,
    t_bar_exact: Option<f64>,
    max_gap_t: f64,
    max_gap: f64,
    config: &'a Config,
}

fn kind_name(kind: FieldKind) -> &'static str {
    match kind {
        FieldKind::Bohmian => "bohmian",
        FieldKind::BohmLike { .. } => "bohm-like",
    }
}

fn run_summary<'a>(
    curves: &ArrivalCurves,
    kind: FieldKind,
    lambda: Option<LambdaChoice>,
    config: &'a Config,
) -> RunSummary<'a> {
    let (max_gap_t, max_gap) = curves.max_gap();
    RunSummary {
        kind: kind_name(kind),
        lambda,
        n: curves.n,
        n_failed: curves.n_failed,
        n_started_inside: curves.n_started_inside,
        n_arrived: curves.n_arrived,
        leaving_events: curves.leaving_events,
        returning_trajectories: curves.returning_trajectories,
        p_inf_emp: curves.p_inf_emp,
        never_arrive_emp: 1.0 - curves.p_inf_emp,
        never_arrive_exact: curves.never_arrive_exact,
        censoring_bound: curves.censoring_bound,
        t_bar_emp: curves.t_bar_emp,
        t_bar_se: curves.t_bar_se,
        t_bar_exact: curves.t_bar_exact,
        max_gap_t,
        max_gap,
        config,
    }
}

pub fn simulate(env: &Env, mut config: Config) -> Result<()> {
    prepare(env, &mut config)?;
    let params = config.packet.params()?;
    let (kind, lambda) = config.field_kind(&params)?;
    let run_config = config.run_config(params, kind)?;
    let run = run_ensemble(&run_config, env.options(config.events.log))?;

    let mut w = env.create("curves.csv")?;
    output::write_curves_csv(&mut w, &run.curves)?;
    w.flush()?;
    if let Some(records) = &run.records {
        let mut w = env.create("events.csv")?;
        output::write_events_csv(&mut w, records)?;
        w.flush()?;
    }
    let summary = run_summary(&run.curves, kind, lambda, &config);
    env.write_json("summary.json", &summary)?;
    env.write_manifest("simulate", &config)?;

    let c = &run.curves;
    println!(
        "kind = {}, n = {}, failed = {}",
        summary.kind, c.n, c.n_failed
    );
    if let Some(l) = lambda {
        println!("lambda = {}", l.lambda);
    }
    println!("arrived by t_max: {}", c.p_inf_emp);
    println!(
        "leaving events: {} (trajectories: {})",
        c.leaving_events, c.returning_trajectories
    );
    Ok(())
}

#[derive(Serialize)]
struct PairedRun {
    multiple: f64,
    lambda: f64,
    n: usize,
    leaving_events: usize,
    returning_trajectories: usize,
    max_gap_t: f64,
    max_gap: f64,
    p_inf_emp: f64,
    curves: String,
}

#[derive(Serialize)]
struct ThresholdReport<'a> {
    lambda_crit: f64,
    bracket: (f64, f64),
    t_worst: f64,
    t_max: f64,
    /// Lowest plane velocity on the scan grid just below the threshold.
    below: PlaneMinimum,
    /// Lowest plane velocity on the scan grid just above the threshold.
    above: PlaneMinimum,
    runs: Vec<PairedRun>,
    /// A run with no leaving events at finite `n` does not rule returns out.
    note: &'static str,
    config: &'a Config,
}

pub fn lambda_scan(env: &Env, mut config: Config) -> Result<()> {
    prepare(env, &mut config)?;
    let params = config.packet.params()?;
    if params.b == params.c {
        bail!("lambda-scan needs b != c: the plane perturbation vanishes for b = c");
    }
    let th = config.threshold(&params)?;
    let grid = ScanGrid::for_threshold(&params, &th);
    let below = plane_minimum(&params, 0.999 * th.lambda_crit, &grid);
    let above = plane_minimum(&params, 1.001 * th.lambda_crit, &grid);

    let mut w = env.create("scan.csv")?;
    writeln!(w, "t,vbx,max_dvx_per_lambda,ratio")?;
    let n_t = th.grid.n_t.max(1);
    for i in 1..=n_t {
        let t = th.t_max * i as f64 / n_t as f64;
        let vbx = plane_vbx(&params, t);
        let unit = max_abs_delta_vx(&params, t, 1.0)?.max_abs_dvx;
        let row = [t, vbx, unit, vbx / unit];
        let cells: Vec<String> = row.iter().map(|&v| output::fmt_num(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;

    let mut runs = Vec::new();
    for &m in &config.scan.multiples {
        let kind = FieldKind::bohm_like(m * th.lambda_crit)
            .with_context(|| format!("scan.multiples entry {m}"))?;
        let run_config = config.run_config(params, kind)?;
        let run = run_ensemble(&run_config, env.options(false))?;
        let name = format!("curves_x{m}.csv");
        let mut w = env.create(&name)?;
        output::write_curves_csv(&mut w, &run.curves)?;
        w.flush()?;
        let (max_gap_t, max_gap) = run.curves.max_gap();
        println!(
            "{m} x lambda_crit: leaving events {}, max(p_emp - q_emp) = {max_gap}",
            run.curves.leaving_events
        );
        runs.push(PairedRun {
            multiple: m,
            lambda: m * th.lambda_crit,
            n: run.curves.n,
            leaving_events: run.curves.leaving_events,
            returning_trajectories: run.curves.returning_trajectories,
            max_gap_t,
            max_gap,
            p_inf_emp: run.curves.p_inf_emp,
            curves: name,
        });
    }

    let report = ThresholdReport {
        lambda_crit: th.lambda_crit,
        bracket: th.bracket,
        t_worst: th.t_worst,
        t_max: th.t_max,
        below,
        above,
        runs,
        note: "zero leaving events in a finite ensemble is inconclusive",
        config: &config,
    };
    env.write_json("threshold.json", &report)?;
    env.write_manifest("lambda-scan", &config)?;
    println!("lambda_crit = {} (t = {})", th.lambda_crit, th.t_worst);
    println!("bracket = [{}, {}]", th.bracket.0, th.bracket.1);
    Ok(())
}

pub fn currents(env: &Env, mut config: Config) -> Result<()> {
    prepare(env, &mut config)?;
    let params = config.packet.params()?;
    let (kind, _) = config.field_kind(&params)?;
    let c = &config.currents;
    if c.times.is_empty() {
        bail!("currents.times is empty");
    }
    if let Some(t) = c.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        bail!("currents.times entries must be finite and >= 0, got {t}");
    }
    if c.n_plane < 1 {
        bail!("currents.n_plane must be at least 1");
    }
    let plane = PlaneGrid {
        half_width: c.half_width.unwrap_or(f64::NAN),
        n: c.n_plane,
    };
    if !(plane.half_width.is_finite() && plane.half_width > 0.0) {
        bail!("currents.half_width must be finite and positive");
    }
    let lambda = kind.lambda();
    let mut samples = Vec::new();
    for &t in &c.times {
        for y in plane.nodes() {
            for z in plane.nodes() {
                samples.push(plane_current(&params, y, z, t, lambda));
            }
        }
    }
    let mut w = env.create("currents.csv")?;
    output::write_currents_csv(&mut w, &samples)?;
    w.flush()?;
    env.write_manifest("currents", &config)?;
    println!("{} plane samples written", samples.len());
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    all_passed: bool,
    checks: &'a [CheckResult],
}

pub fn verify(env: &Env, mut config: Config) -> Result<()> {
    prepare(env, &mut config)?;
    let params = config.packet.params()?;
    let v = &config.verify;
    let opts = VerifyOptions {
        n_points: v.n_points,
        seed: v.seed,
        lambda: v.lambda,
        erfc_perturbation: v.erfc_perturbation,
    };
    if opts.n_points == 0 {
        bail!("verify.n_points must be at least 1");
    }
    let checks = run_suite(&params, &opts);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .collect();
    env.write_json(
        "verify.json",
        &VerifyReport {
            all_passed: failed.is_empty(),
            checks: &checks,
        },
    )?;
    env.write_manifest("verify", &config)?;
    for c in &checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        println!(
            "{status:4}  {:36} {:.3e} (tol {:.0e})",
            c.name, c.residual, c.tolerance
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed { failed }.into())
    }
}
