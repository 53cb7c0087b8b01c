//! Flat key=value run configuration.
//!
//! One `key = value` pair per line, `#` starts a comment. Flags override
//! file values, unknown keys are errors, and the effective configuration is
//! echoed back in the same format with 17-significant-digit reals so a run
//! can be reproduced byte-for-byte from its own echo.

use std::collections::BTreeMap;

use crate::criterion::ProblemParams;
use crate::dynamics::{GridSpec, RunConfig};
use crate::error::{Error, Result};
use crate::radial::Spacing;

/// Every addressable simulation setting, all optional so that file values
/// and flag values can be merged before defaults apply.
#[derive(Debug, Clone, Default)]
pub struct SimulateSpec {
    pub n: Option<u32>,
    pub m: Option<f64>,
    pub epsilon: Option<f64>,
    pub r_max: Option<f64>,
    pub cells: Option<usize>,
    pub spacing: Option<String>,
    pub ratio: Option<f64>,
    pub t_end: Option<f64>,
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub cfl: Option<f64>,
    pub output_every: Option<u64>,
    pub attraction: Option<bool>,
    pub blowup_lm_factor: Option<f64>,
    pub tail_mass_tol: Option<f64>,
    pub max_steps: Option<u64>,
    pub scenario: Option<String>,
    pub snapshot: Option<String>,
    pub k_mult: Option<f64>,
    pub eps0: Option<f64>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

impl SimulateSpec {
    /// Applies one key=value assignment; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = Some(parse(key, value)?),
            "m" => self.m = Some(parse(key, value)?),
            "epsilon" => self.epsilon = Some(parse(key, value)?),
            "r_max" => self.r_max = Some(parse(key, value)?),
            "cells" => self.cells = Some(parse(key, value)?),
            "spacing" => {
                let v = value.trim();
                if v != "uniform" && v != "geometric" {
                    return Err(Error::Config(format!(
                        "spacing must be `uniform` or `geometric`, got `{v}`"
                    )));
                }
                self.spacing = Some(v.to_string());
            }
            "ratio" => self.ratio = Some(parse(key, value)?),
            "t_end" => self.t_end = Some(parse(key, value)?),
            "dt_init" => self.dt_init = Some(parse(key, value)?),
            "dt_min" => self.dt_min = Some(parse(key, value)?),
            "cfl" => self.cfl = Some(parse(key, value)?),
            "output_every" => self.output_every = Some(parse(key, value)?),
            "attraction" => self.attraction = Some(parse(key, value)?),
            "blowup_lm_factor" => self.blowup_lm_factor = Some(parse(key, value)?),
            "tail_mass_tol" => self.tail_mass_tol = Some(parse(key, value)?),
            "max_steps" => self.max_steps = Some(parse(key, value)?),
            "scenario" => self.scenario = Some(value.trim().to_string()),
            "snapshot" => self.snapshot = Some(value.trim().to_string()),
            "k_mult" => self.k_mult = Some(parse(key, value)?),
            "eps0" => self.eps0 = Some(parse(key, value)?),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a whole config file body.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    idx + 1
                ))
            })?;
            spec.set(key.trim(), value)?;
        }
        Ok(spec)
    }

    /// Overlays `self` (flag values) on top of `base` (file values).
    pub fn over(self, base: Self) -> Self {
        Self {
            n: self.n.or(base.n),
            m: self.m.or(base.m),
            epsilon: self.epsilon.or(base.epsilon),
            r_max: self.r_max.or(base.r_max),
            cells: self.cells.or(base.cells),
            spacing: self.spacing.or(base.spacing),
            ratio: self.ratio.or(base.ratio),
            t_end: self.t_end.or(base.t_end),
            dt_init: self.dt_init.or(base.dt_init),
            dt_min: self.dt_min.or(base.dt_min),
            cfl: self.cfl.or(base.cfl),
            output_every: self.output_every.or(base.output_every),
            attraction: self.attraction.or(base.attraction),
            blowup_lm_factor: self.blowup_lm_factor.or(base.blowup_lm_factor),
            tail_mass_tol: self.tail_mass_tol.or(base.tail_mass_tol),
            max_steps: self.max_steps.or(base.max_steps),
            scenario: self.scenario.or(base.scenario),
            snapshot: self.snapshot.or(base.snapshot),
            k_mult: self.k_mult.or(base.k_mult),
            eps0: self.eps0.or(base.eps0),
        }
    }

    /// Resolves into a validated [`RunConfig`] plus the data source
    /// (scenario name or snapshot path) and scenario knobs.
    pub fn resolve(&self) -> Result<ResolvedSimulate> {
        let n = self.n.unwrap_or(3);
        let m = self.m.unwrap_or(1.25);
        let params = ProblemParams::new(n, m, 1.0)?;
        let spacing = match self.spacing.as_deref() {
            None | Some("uniform") => Spacing::Uniform,
            Some("geometric") => Spacing::Geometric {
                ratio: self.ratio.unwrap_or(1.05),
            },
            Some(other) => {
                return Err(Error::Config(format!("unknown spacing `{other}`")));
            }
        };
        let source = match (&self.scenario, &self.snapshot) {
            (Some(s), None) => DataSource::Scenario(s.clone()),
            (None, Some(p)) => DataSource::Snapshot(p.clone()),
            (None, None) => DataSource::Scenario("wide-subcritical".to_string()),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either a scenario or a snapshot, not both".into(),
                ))
            }
        };
        // grid defaults track the default scenario so a bare `simulate` runs
        let grid = GridSpec {
            r_max: self.r_max.unwrap_or(12.0),
            cells: self.cells.unwrap_or(512),
            spacing,
        };
        let config = RunConfig {
            params,
            epsilon: self.epsilon.unwrap_or(0.0),
            grid,
            t_end: self.t_end.unwrap_or(5e-3),
            dt_init: self.dt_init.unwrap_or(1e-3),
            dt_min: self.dt_min.unwrap_or(1e-9),
            cfl: self.cfl.unwrap_or(0.4),
            output_every: self.output_every.unwrap_or(50),
            attraction_enabled: self.attraction.unwrap_or(true),
            blowup_lm_factor: self.blowup_lm_factor.unwrap_or(10.0),
            tail_mass_tol: self.tail_mass_tol.unwrap_or(1e-8),
            max_steps: self.max_steps.unwrap_or(2_000_000),
        };
        config.validate()?;
        Ok(ResolvedSimulate {
            config,
            source,
            grid_given: self.r_max.is_some() || self.cells.is_some() || self.spacing.is_some(),
            k_mult: self.k_mult.unwrap_or(2.0),
            eps0: self.eps0.unwrap_or(1.0),
        })
    }

    /// Echo of the effective configuration, parseable by
    /// [`SimulateSpec::from_kv_text`] and stable byte-for-byte.
    pub fn effective_text(resolved: &ResolvedSimulate) -> String {
        let c = &resolved.config;
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("n", c.params.n().to_string());
        map.insert("m", format!("{:.16e}", c.params.m()));
        map.insert("epsilon", format!("{:.16e}", c.epsilon));
        map.insert("r_max", format!("{:.16e}", c.grid.r_max));
        map.insert("cells", c.grid.cells.to_string());
        match c.grid.spacing {
            Spacing::Uniform => {
                map.insert("spacing", "uniform".to_string());
            }
            Spacing::Geometric { ratio } => {
                map.insert("spacing", "geometric".to_string());
                map.insert("ratio", format!("{:.16e}", ratio));
            }
        }
        map.insert("t_end", format!("{:.16e}", c.t_end));
        map.insert("dt_init", format!("{:.16e}", c.dt_init));
        map.insert("dt_min", format!("{:.16e}", c.dt_min));
        map.insert("cfl", format!("{:.16e}", c.cfl));
        map.insert("output_every", c.output_every.to_string());
        map.insert("attraction", c.attraction_enabled.to_string());
        map.insert("blowup_lm_factor", format!("{:.16e}", c.blowup_lm_factor));
        map.insert("tail_mass_tol", format!("{:.16e}", c.tail_mass_tol));
        map.insert("max_steps", c.max_steps.to_string());
        match &resolved.source {
            DataSource::Scenario(s) => {
                map.insert("scenario", s.clone());
            }
            DataSource::Snapshot(p) => {
                map.insert("snapshot", p.clone());
            }
        }
        map.insert("k_mult", format!("{:.16e}", resolved.k_mult));
        map.insert("eps0", format!("{:.16e}", resolved.eps0));
        let mut out = String::new();
        for (k, v) in map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Where the initial density comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Scenario(String),
    Snapshot(String),
}

#[derive(Debug, Clone)]
pub struct ResolvedSimulate {
    pub config: RunConfig,
    pub source: DataSource,
    /// Whether any grid field was set explicitly (scenarios otherwise pick
    /// their own default grids).
    pub grid_given: bool,
    pub k_mult: f64,
    pub eps0: f64,
}
