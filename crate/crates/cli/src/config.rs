//! Run configuration: TOML sections, dotted-key overrides, and the derived
//! defaults that depend on the packet parameters.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use arrival_core::analysis::default_threshold_horizon;
use arrival_core::{
    ComplexWidths, FieldKind, GridSpec, IntegratorSettings, PacketParams, RunConfig, TimeGrid,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Written into manifests; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
    pub packet: PacketSection,
    pub field: FieldSection,
    pub run: RunSection,
    pub integrator: IntegratorSection,
    pub grid: GridSection,
    pub scan: ScanSection,
    pub currents: CurrentsSection,
    pub events: EventsSection,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub command: String,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub x1: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        let p = PacketParams::default();
        Self {
            a: p.a,
            b: p.b,
            c: p.c,
            k: p.k,
            x1: p.x1,
        }
    }
}

impl PacketSection {
    pub fn params(&self) -> Result<PacketParams> {
        PacketParams::new(self.a, self.b, self.c, self.k, self.x1).context("invalid [packet]")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    #[default]
    Bohmian,
    BohmLike,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub kind: KindName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `lambda` as a multiple of the computed threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_multiple: Option<f64>,
}

/// How the coupling of a Bohm-like run was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaChoice {
    pub lambda: f64,
    pub multiple: Option<f64>,
    pub lambda_crit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n: 20_000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let s = IntegratorSettings::default();
        Self {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            max_step: s.max_step,
            event_tol: s.event_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Defaults to `8 x1 / k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            t_max: None,
            n_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Defaults to `4 x1 / k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub n_t: usize,
    pub n_t_plane: usize,
    pub n_plane: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Multiples of the threshold at which to run paired ensembles.
    pub multiples: Vec<f64>,
}

impl Default for ScanSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            t_max: None,
            n_t: g.n_t,
            n_t_plane: g.n_t_plane,
            n_plane: g.n_plane,
            half_width: None,
            multiples: Vec::new(),
        }
    }
}

impl ScanSection {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            n_t: self.n_t,
            n_t_plane: self.n_t_plane,
            n_plane: self.n_plane,
            half_width: self.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentsSection {
    pub times: Vec<f64>,
    /// Defaults to five transverse widths at the latest time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub n_plane: usize,
}

impl Default for CurrentsSection {
    fn default() -> Self {
        Self {
            times: vec![0.5, 1.0, 2.0, 5.0],
            half_width: None,
            n_plane: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsSection {
    pub log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n_points: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Relative error injected into erfc, to exercise the failure path.
    pub erfc_perturbation: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let o = arrival_core::verify::VerifyOptions::default();
        Self {
            n_points: o.n_points,
            seed: o.seed,
            lambda: o.lambda,
            erfc_perturbation: o.erfc_perturbation,
        }
    }
}

/// Reads `path` (defaults only when absent) and applies `key.path=value`
/// overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
    let (text, origin) = match path {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    if overrides.is_empty() {
        return toml::from_str(&text).with_context(|| format!("invalid config {origin}"));
    }
    let mut table: toml::Table =
        toml::from_str(&text).with_context(|| format!("invalid config {origin}"))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let merged = toml::to_string(&table)?;
    toml::from_str(&merged).with_context(|| format!("invalid config {origin} after overrides"))
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key.path=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override `{assignment}` has an empty key segment");
    }
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{assignment}`: `{s}` is not a section"))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Fills every parameter-dependent default so the echoed config is
    /// complete.
    pub fn resolve(&mut self) -> Result<()> {
        let params = self.packet.params()?;
        if self.grid.t_max.is_none() {
            self.grid.t_max = Some(if params.k > 0.0 && params.x1 > 0.0 {
                8.0 * params.x1 / params.k
            } else {
                IntegratorSettings::default().t_max
            });
        }
        if self.scan.t_max.is_none() {
            self.scan.t_max = Some(default_threshold_horizon(&params));
        }
        if self.currents.half_width.is_none() {
            let t = self.currents.times.iter().copied().fold(0.0, f64::max);
            let [_, bb, gg] = ComplexWidths::at(&params, t).abs2();
            self.currents.half_width = Some(5.0 * bb.max(gg).sqrt());
        }
        Ok(())
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid {
            t_max: self.grid.t_max.unwrap_or(f64::NAN),
            n_points: self.grid.n_points,
        }
    }

    pub fn run_config(&self, params: PacketParams, kind: FieldKind) -> Result<RunConfig> {
        let grid = self.time_grid();
        let i = &self.integrator;
        let config = RunConfig {
            params,
            kind,
            n: self.run.n,
            seed: self.run.seed,
            settings: IntegratorSettings {
                rel_tol: i.rel_tol,
                abs_tol: i.abs_tol,
                t_max: grid.t_max,
                max_step: i.max_step,
                event_tol: i.event_tol,
            },
            grid,
        };
        config.validate()?;
        Ok(config)
    }

    /// Field kind for a run; a `lambda_multiple` is turned into a coupling by
    /// computing the threshold first.
    pub fn field_kind(&self, params: &PacketParams) -> Result<(FieldKind, Option<LambdaChoice>)> {
        let f = &self.field;
        match f.kind {
            KindName::Bohmian => {
                if f.lambda.is_some() || f.lambda_multiple.is_some() {
                    bail!("field.lambda and field.lambda_multiple need field.kind = \"bohm-like\"");
                }
                Ok((FieldKind::Bohmian, None))
            }
            KindName::BohmLike => {
                let choice = match (f.lambda, f.lambda_multiple) {
                    (Some(lambda), None) => LambdaChoice {
                        lambda,
                        multiple: None,
                        lambda_crit: None,
                    },
                    (None, Some(m)) => {
                        let th = self.threshold(params)?;
                        LambdaChoice {
                            lambda: m * th.lambda_crit,
                            multiple: Some(m),
                            lambda_crit: Some(th.lambda_crit),
                        }
                    }
                    _ => bail!(
                        "field.kind = \"bohm-like\" needs exactly one of field.lambda, field.lambda_multiple"
                    ),
                };
                let kind = FieldKind::bohm_like(choice.lambda).context("invalid [field]")?;
                Ok((kind, Some(choice)))
            }
        }
    }

    pub fn threshold(&self, params: &PacketParams) -> Result<arrival_core::LambdaThreshold> {
        let t_max = self
            .scan
            .t_max
            .unwrap_or_else(|| default_threshold_horizon(params));
        let th = arrival_core::lambda_critical(params, t_max, self.scan.grid_spec())?;
        Ok(th)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = load(None, &[]).unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn overrides_nest_and_type() {
        let c = load(
            None,
            &[
                "packet.a=1.5".into(),
                "run.n=10".into(),
                "field.kind=bohm-like".into(),
                "field.lambda=3".into(),
                "scan.multiples=[0.5, 2.0]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.packet.a, 1.5);
        assert_eq!(c.run.n, 10);
        assert_eq!(c.field.kind, KindName::BohmLike);
        assert_eq!(c.field.lambda, Some(3.0));
        assert_eq!(c.scan.multiples, vec![0.5, 2.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load(None, &["packet.q=1".into()]).is_err());
        assert!(load(None, &["nonsense.a=1".into()]).is_err());
        assert!(load(None, &["packet=1".into()]).is_err());
        assert!(load(None, &["novalue".into()]).is_err());
    }

    #[test]
    fn resolve_fills_horizons() {
        let mut c = Config::default();
        c.resolve().unwrap();
        assert_eq!(c.grid.t_max, Some(20.0));
        assert_eq!(c.scan.t_max, Some(10.0));
        assert!(c.currents.half_width.unwrap() > 0.0);
    }

    #[test]
    fn manifest_round_trips() {
        let mut c = Config::default();
        c.resolve().unwrap();
        c.manifest = Some(ManifestInfo {
            command: "simulate".into(),
            version: "0".into(),
        });
        let text = toml::to_string(&c).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lambda_needs_bohm_like() {
        let c = load(None, &["field.lambda=2".into()]).unwrap();
        assert!(c.field_kind(&PacketParams::default()).is_err());
        let c = load(None, &["field.kind=bohm-like".into()]).unwrap();
        assert!(c.field_kind(&PacketParams::default()).is_err());
    }
}
