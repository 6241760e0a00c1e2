//! Flat `key = value` configuration with `HYPERSTOKES_*` environment overrides.
//!
//! Radii are geodesic. Lists are comma separated. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hyperstokes::divsolve::DivSolveOptions;
use hyperstokes::fields::{CutoffSpec, HarmonicSpec};
use hyperstokes::navierstokes::{ExhaustionSchedule, SolverOptions};
use hyperstokes::{AnnulusGrid, DomainSpec, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub r0: f64,
    pub n: u32,
    pub c: f64,
    pub phase: f64,
    pub n_r: usize,
    pub n_th: usize,
    pub r_max: f64,
    /// Exhaustion radii; empty means a single annulus out to `r_max`.
    pub schedule: Vec<f64>,
    /// Radial cells per unit geodesic length on exhaustion stages.
    pub cells_per_unit: f64,
    pub lambda_schedule: Vec<f64>,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub damping: f64,
    pub div_tol: f64,
    /// Probes for the constants of the smallness threshold.
    pub constant_samples: usize,
    /// Probes for the inequality suite.
    pub probes: usize,
    pub seed: u64,
    /// Rescale `c` so that `‖dF‖ = df_fraction · threshold`.
    pub df_fraction: Option<f64>,
    pub allow_large_data: bool,
    pub reproducible: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            r0: 1.0,
            n: 1,
            c: 1.0,
            phase: 0.0,
            n_r: 256,
            n_th: 256,
            r_max: 12.0,
            schedule: Vec::new(),
            cells_per_unit: 16.0,
            lambda_schedule: vec![0.5, 1.0],
            picard_tol: 1e-10,
            picard_max_iters: 50,
            damping: 1.0,
            div_tol: 1e-12,
            constant_samples: 100,
            probes: 100,
            seed: 1,
            df_fraction: None,
            allow_large_data: false,
            reproducible: false,
            out: PathBuf::from("hyperstokes-out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "a",
    "r0",
    "n",
    "c",
    "phase",
    "n_r",
    "n_th",
    "r_max",
    "schedule",
    "cells_per_unit",
    "lambda_schedule",
    "picard_tol",
    "picard_max_iters",
    "damping",
    "div_tol",
    "constant_samples",
    "probes",
    "seed",
    "df_fraction",
    "allow_large_data",
    "reproducible",
    "out",
];

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidInput(format!("config key `{key}`: cannot parse `{value}`"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(key, v))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v)),
    }
}

/// Parse `key = value` lines into a map; unknown keys are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let k = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::InvalidInput(format!(
                "config line {}: unknown key `{k}`",
                lineno + 1
            )));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

/// `HYPERSTOKES_<KEY>` values for every known key.
pub fn env_pairs(vars: impl Iterator<Item = (String, String)>) -> BTreeMap<String, String> {
    vars.filter_map(|(k, v)| {
        let key = k.strip_prefix("HYPERSTOKES_")?.to_ascii_lowercase();
        KEYS.contains(&key.as_str()).then_some((key, v))
    })
    .collect()
}

impl RunConfig {
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            let k = k.as_str();
            match k {
                "a" => self.a = num(k, v)?,
                "r0" => self.r0 = num(k, v)?,
                "n" => self.n = num(k, v)?,
                "c" => self.c = num(k, v)?,
                "phase" => self.phase = num(k, v)?,
                "n_r" => self.n_r = num(k, v)?,
                "n_th" => self.n_th = num(k, v)?,
                "r_max" => self.r_max = num(k, v)?,
                "schedule" => self.schedule = list(k, v)?,
                "cells_per_unit" => self.cells_per_unit = num(k, v)?,
                "lambda_schedule" => self.lambda_schedule = list(k, v)?,
                "picard_tol" => self.picard_tol = num(k, v)?,
                "picard_max_iters" => self.picard_max_iters = num(k, v)?,
                "damping" => self.damping = num(k, v)?,
                "div_tol" => self.div_tol = num(k, v)?,
                "constant_samples" => self.constant_samples = num(k, v)?,
                "probes" => self.probes = num(k, v)?,
                "seed" => self.seed = num(k, v)?,
                "df_fraction" => {
                    self.df_fraction = if v.trim().is_empty() {
                        None
                    } else {
                        Some(num(k, v)?)
                    }
                }
                "allow_large_data" => self.allow_large_data = flag(k, v)?,
                "reproducible" => self.reproducible = flag(k, v)?,
                "out" => self.out = PathBuf::from(v.trim()),
                _ => unreachable!("keys are filtered on parse"),
            }
        }
        Ok(())
    }

    /// Defaults, then the file, then the environment.
    pub fn load(path: Option<&Path>, env: impl Iterator<Item = (String, String)>) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::InvalidInput(format!("cannot read config {}: {e}", p.display()))
            })?;
            cfg.apply(&parse_pairs(&text)?)?;
        }
        cfg.apply(&env_pairs(env))?;
        Ok(cfg)
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.a, self.r0)
    }

    pub fn harmonic(&self) -> Result<HarmonicSpec> {
        HarmonicSpec::new(self.n, self.c, self.phase)
    }

    pub fn cutoff(&self) -> Result<CutoffSpec> {
        Ok(CutoffSpec::new(self.domain()?))
    }

    pub fn grid(&self) -> Result<std::sync::Arc<AnnulusGrid>> {
        AnnulusGrid::build(self.domain()?, self.r0, self.r_max, self.n_r, self.n_th)
    }

    pub fn div_options(&self) -> DivSolveOptions {
        DivSolveOptions {
            tol: self.div_tol,
            ..DivSolveOptions::default()
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            lambda_schedule: self.lambda_schedule.clone(),
            picard_tol: self.picard_tol,
            picard_max_iters: self.picard_max_iters,
            damping: self.damping,
            allow_large_data: self.allow_large_data,
        }
    }

    pub fn exhaustion(&self) -> ExhaustionSchedule {
        ExhaustionSchedule {
            radii: self.schedule.clone(),
            cells_per_unit: self.cells_per_unit,
            n_th: self.n_th,
        }
    }

    /// Check every precondition before any solve starts.
    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        self.harmonic()?;
        if !(self.r_max >= 4.0 * self.r0) {
            return Err(Error::InvalidInput(format!(
                "R_max = {} must be at least 4R0 = {} so the cutoff transition [2R0, 4R0] lies inside the grid",
                self.r_max,
                4.0 * self.r0
            )));
        }
        self.grid()?;
        if !self.schedule.is_empty() {
            self.exhaustion().validate(domain)?;
        }
        self.solver_options().validate()?;
        if let Some(f) = self.df_fraction {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "df_fraction must be positive, got {f}"
                )));
            }
        }
        if !(self.div_tol > 0.0) || self.constant_samples == 0 || self.probes == 0 {
            return Err(Error::InvalidInput(
                "div_tol, constant_samples and probes must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env_precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply(
            &parse_pairs("a = 0.5 # curvature\nschedule = 6, 8,10\n\nreproducible = true").unwrap(),
        )
        .unwrap();
        cfg.apply(&env_pairs(
            [
                ("HYPERSTOKES_A".to_string(), "2".to_string()),
                ("OTHER".into(), "x".into()),
            ]
            .into_iter(),
        ))
        .unwrap();
        assert_eq!(cfg.a, 2.0);
        assert_eq!(cfg.schedule, vec![6.0, 8.0, 10.0]);
        assert!(cfg.reproducible);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_pairs("bogus = 1").is_err());
        assert!(parse_pairs("a 1").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.apply(&parse_pairs("n_r = many").unwrap()).is_err());
    }

    #[test]
    fn short_outer_radius_fails_validation() {
        let cfg = RunConfig {
            r_max: 3.0,
            ..RunConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("4R0"), "{msg}");
    }
}
