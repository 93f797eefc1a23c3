//! Experiment plans.
//!
//! ```toml
//! name = "desk_m"
//! drops = 50
//! methods = ["proposed/ris_optimized", "gain_based/ris_none"]
//! record_wall_time = false       # optional
//! precoder_policy = "recompute"  # optional, or "reuse"
//!
//! [sweep]
//! var = "M"                      # "M", "N" or "K"
//! values = [8, 16, 32]
//!
//! [solver]                       # optional, every key optional
//! outer_tol = 1e-4
//! max_outer_iters = 100
//! phase_sweeps_per_outer = 1
//! phase_tol = 1e-6
//!
//! [scenario]
//! # same keys as a scenario file
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::Method;
use crate::association::PrecoderPolicy;
use crate::error::{Error, Result};
use crate::ris_optimizer::SolverSettings;
use crate::scenario::ScenarioFile;
use crate::system_model::{validate_config, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    /// BS antennas.
    M,
    /// RIS elements.
    N,
    /// Users.
    K,
}

impl SweepVar {
    pub fn apply(self, cfg: &SystemConfig, value: usize) -> SystemConfig {
        let mut cfg = cfg.clone();
        match self {
            SweepVar::M => cfg.bs_antennas = value,
            SweepVar::N => cfg.ris_elements = value,
            SweepVar::K => cfg.num_users = value,
        }
        cfg
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::M => "M",
            SweepVar::N => "N",
            SweepVar::K => "K",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub name: String,
    pub base: SystemConfig,
    pub sweep_var: SweepVar,
    pub values: Vec<usize>,
    pub drops: usize,
    pub methods: Vec<Method>,
    pub settings: SolverSettings,
    pub policy: PrecoderPolicy,
    /// Write measured times into the main CSV. Off by default so that the CSV
    /// is byte-identical across runs; times always go to the timing file.
    pub record_wall_time: bool,
    /// Default output directory, overridable from the command line.
    pub output: Option<PathBuf>,
}

impl ExperimentPlan {
    /// Configuration at one sweep point.
    pub fn config_at(&self, value: usize) -> SystemConfig {
        self.sweep_var.apply(&self.base, value)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    name: String,
    drops: usize,
    methods: Vec<String>,
    #[serde(default)]
    record_wall_time: bool,
    #[serde(default)]
    precoder_policy: Option<String>,
    #[serde(default)]
    output: Option<PathBuf>,
    sweep: SweepFile,
    #[serde(default)]
    solver: SolverFile,
    scenario: ScenarioFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    var: String,
    values: Vec<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    outer_tol: Option<f64>,
    max_outer_iters: Option<usize>,
    phase_sweeps_per_outer: Option<usize>,
    phase_tol: Option<f64>,
}

impl PlanFile {
    fn into_plan(self) -> Result<ExperimentPlan> {
        let bad = |msg: String| Err(Error::Plan(msg));
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad(format!("plan name {:?} must be non-empty [A-Za-z0-9_-]", self.name));
        }
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        let sweep_var = match self.sweep.var.as_str() {
            "M" => SweepVar::M,
            "N" => SweepVar::N,
            "K" => SweepVar::K,
            other => return bad(format!("sweep var must be M, N or K, got {other:?}")),
        };
        let values = self.sweep.values;
        if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sweep values must be non-empty and strictly increasing: {values:?}"));
        }
        if self.methods.is_empty() {
            return bad("no methods listed".into());
        }
        let methods = self.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
        if methods.iter().collect::<BTreeSet<_>>().len() != methods.len() {
            return bad("duplicate method".into());
        }
        let policy = match self.precoder_policy.as_deref() {
            None | Some("recompute") => PrecoderPolicy::Recompute,
            Some("reuse") => PrecoderPolicy::Reuse,
            Some(other) => return bad(format!("unknown precoder_policy {other:?}")),
        };
        let d = SolverSettings::default();
        let settings = SolverSettings {
            outer_tol: self.solver.outer_tol.unwrap_or(d.outer_tol),
            max_outer_iters: self.solver.max_outer_iters.unwrap_or(d.max_outer_iters),
            phase_sweeps_per_outer: self.solver.phase_sweeps_per_outer.unwrap_or(d.phase_sweeps_per_outer),
            phase_tol: self.solver.phase_tol.unwrap_or(d.phase_tol),
        };
        settings.validate()?;
        let base = self.scenario.into_config()?;
        for &v in &values {
            validate_config(sweep_var.apply(&base, v))
                .map_err(|e| Error::Plan(format!("at {sweep_var} = {v}: {e}")))?;
        }
        Ok(ExperimentPlan {
            name: self.name,
            base,
            sweep_var,
            values,
            drops: self.drops,
            methods,
            settings,
            policy,
            record_wall_time: self.record_wall_time,
            output: self.output,
        })
    }
}

pub fn parse_plan(text: &str) -> Result<ExperimentPlan> {
    let file: PlanFile =
        toml::from_str(text).map_err(|e| Error::Parse { path: "<plan>".into(), message: e.to_string() })?;
    file.into_plan()
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let file: PlanFile =
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
    file.into_plan()
}
