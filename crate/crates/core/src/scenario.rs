//! Scenario files: a flat TOML table mirroring [`SystemConfig`].
//!
//! ```toml
//! num_bs = 4
//! num_users = 25
//! bs_antennas = 32
//! ris_elements = 64
//! bs_positions = [[0.0, 200.0], [-150.0, 0.0], [250.0, 0.0], [0.0, -300.0]]
//! ris_position = [0.0, 0.0]
//! user_center = [25.0, -25.0]
//! user_radius = 150.0
//! p_max_dbm = 50.0            # or p_max_watts
//! noise_power_dbm = -80.0     # or noise_power_watts
//! pathloss_ref_gain_db = -30.0  # or pathloss_ref_gain (linear)
//! pathloss_ref_dist = 1.0
//! alpha_direct = 3.9
//! alpha_bs_ris = 2.5
//! alpha_ris_user = 2.7
//! rician_bs_ris = "los"       # "los" or a non-negative number
//! rician_ris_user = 1.0
//! antenna_rule = "global"     # "global" (M >= K) or "per_bs" (J*M >= K)
//! seed = 1
//! ```
//!
//! Unknown keys are rejected. Each power-like quantity must be given in
//! exactly one unit.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::system_model::{
    db_to_linear, dbm_to_watts, validate_config, AntennaRule, Disk, Point, RicianFactor, SystemConfig,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RicianSpec {
    Word(String),
    Value(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    num_bs: usize,
    num_users: usize,
    bs_antennas: usize,
    ris_elements: usize,
    bs_positions: Vec<[f64; 2]>,
    ris_position: [f64; 2],
    user_center: [f64; 2],
    user_radius: f64,
    p_max_dbm: Option<f64>,
    p_max_watts: Option<f64>,
    noise_power_dbm: Option<f64>,
    noise_power_watts: Option<f64>,
    pathloss_ref_gain_db: Option<f64>,
    pathloss_ref_gain: Option<f64>,
    pathloss_ref_dist: f64,
    alpha_direct: f64,
    alpha_bs_ris: f64,
    alpha_ris_user: f64,
    rician_bs_ris: RicianSpec,
    rician_ris_user: RicianSpec,
    #[serde(default)]
    antenna_rule: Option<String>,
    seed: u64,
}

fn one_of(name: &str, log_form: Option<f64>, linear: Option<f64>, convert: fn(f64) -> f64) -> Result<f64> {
    match (log_form, linear) {
        (Some(x), None) => Ok(convert(x)),
        (None, Some(x)) => Ok(x),
        (Some(_), Some(_)) => Err(Error::Plan(format!("{name} given in two units"))),
        (None, None) => Err(Error::Plan(format!("{name} is missing"))),
    }
}

fn rician(name: &str, spec: &RicianSpec) -> Result<RicianFactor> {
    match spec {
        RicianSpec::Value(k) => Ok(RicianFactor::Finite(*k)),
        RicianSpec::Word(w) if w.eq_ignore_ascii_case("los") || w.eq_ignore_ascii_case("inf") => {
            Ok(RicianFactor::PureLos)
        }
        RicianSpec::Word(w) => Err(Error::Plan(format!("{name}: expected \"los\" or a number, got {w:?}"))),
    }
}

impl ScenarioFile {
    /// Converts to a validated [`SystemConfig`].
    pub fn into_config(self) -> Result<SystemConfig> {
        let pt = |p: [f64; 2]| Point::new(p[0], p[1]);
        let antenna_rule = match self.antenna_rule.as_deref() {
            None | Some("global") => AntennaRule::Global,
            Some("per_bs") => AntennaRule::PerBs,
            Some(other) => return Err(Error::Plan(format!("unknown antenna_rule {other:?}"))),
        };
        let cfg = SystemConfig {
            num_bs: self.num_bs,
            num_users: self.num_users,
            bs_antennas: self.bs_antennas,
            ris_elements: self.ris_elements,
            bs_positions: self.bs_positions.iter().copied().map(pt).collect(),
            ris_position: pt(self.ris_position),
            user_region: Disk { center: pt(self.user_center), radius: self.user_radius },
            p_max: one_of("p_max", self.p_max_dbm, self.p_max_watts, dbm_to_watts)?,
            noise_power: one_of("noise_power", self.noise_power_dbm, self.noise_power_watts, dbm_to_watts)?,
            pathloss_ref_gain: one_of(
                "pathloss_ref_gain",
                self.pathloss_ref_gain_db,
                self.pathloss_ref_gain,
                db_to_linear,
            )?,
            pathloss_ref_dist: self.pathloss_ref_dist,
            alpha_direct: self.alpha_direct,
            alpha_bs_ris: self.alpha_bs_ris,
            alpha_ris_user: self.alpha_ris_user,
            rician_bs_ris: rician("rician_bs_ris", &self.rician_bs_ris)?,
            rician_ris_user: rician("rician_ris_user", &self.rician_ris_user)?,
            antenna_rule,
            seed: self.seed,
        };
        Ok(validate_config(cfg)?)
    }
}

pub fn parse_scenario(text: &str) -> Result<SystemConfig> {
    let file: ScenarioFile = toml::from_str(text)
        .map_err(|e| Error::Parse { path: "<scenario>".into(), message: e.to_string() })?;
    file.into_config()
}

pub fn load_scenario(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
    file.into_config()
}
