//! Experiment configuration: a nested, serializable parameter tree with
//! file loading, environment-variable overrides, and conversion into the
//! runtime structs the simulator and learner consume.
//!
//! Any key can be overridden without touching the file through variables of
//! the form `SARADC_<SECTION>__<KEY>` (for example
//! `SARADC_SCENARIO__N_VEHICLES=7`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::learner::LearnerConfig;
use crate::mdp::{EnvConfig, ScoringMode};
use crate::netsim::TopologyConfig;
use crate::semantics::XiModel;

pub const ENV_PREFIX: &str = "SARADC_";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_vehicles: usize,
    pub area_side_m: f64,
    pub speed_mps: f64,
    /// One environment step advances this much time; channels redraw every
    /// step.
    pub step_dt_s: f64,
    pub mab_count: usize,
    pub mib_count: usize,
    pub wifi_ap_count: usize,
    pub rb_count_mab: usize,
    pub rb_count_mib: usize,
    pub rb_bandwidth_hz: f64,
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    pub noise_figure_db: f64,
    pub p_max_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 5,
            area_side_m: 1000.0,
            speed_mps: 10.0,
            step_dt_s: 0.005,
            mab_count: 1,
            mib_count: 2,
            wifi_ap_count: 2,
            rb_count_mab: 12,
            rb_count_mib: 12,
            rb_bandwidth_hz: 15_000.0,
            bs_height_m: 25.0,
            vehicle_height_m: 1.5,
            noise_figure_db: 9.0,
            p_max_dbm: 23.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticsConfig {
    /// `parametric` or `table`.
    pub mode: String,
    /// Grid file used when `mode = "table"`.
    pub table_path: String,
    pub sat_rate: f64,
    pub slope: f64,
    pub midpoint_db: f64,
    pub i_over_l: f64,
    pub u_max: u32,
    pub xi_threshold: f64,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        Self {
            mode: "parametric".into(),
            table_path: String::new(),
            sat_rate: 0.3,
            slope: 0.5,
            midpoint_db: 5.0,
            i_over_l: 1.0,
            u_max: 20,
            xi_threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CoexistConfig {
    pub wifi_rate_bits_s: f64,
    pub o_total_s: f64,
    pub o1_min: f64,
    pub o1_max: f64,
    /// Explicit per-vehicle throughput floor; auto-calibrated when absent.
    pub st_vehicle_floor: Option<f64>,
    /// Explicit per-group WiFi floor; auto-calibrated when absent.
    pub st_wifi_floor: Option<f64>,
}

impl Default for CoexistConfig {
    fn default() -> Self {
        Self {
            wifi_rate_bits_s: 143.0e6,
            o_total_s: 1.0,
            o1_min: 0.05,
            o1_max: 0.95,
            st_vehicle_floor: None,
            st_wifi_floor: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    pub episodes: usize,
    pub t_max: usize,
    pub update_interval: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub init_std: f64,
    pub collision_penalty: f64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            gamma: 0.99,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            episodes: 1000,
            t_max: 100,
            update_interval: 5,
            epochs: 5,
            minibatch: 32,
            init_std: 0.1,
            collision_penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Episodes per evaluation or sweep invocation.
    pub eval_episodes: usize,
    /// Checkpoint file name; relative paths resolve against the output
    /// directory.
    pub checkpoint: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            eval_episodes: 20,
            checkpoint: "checkpoint.txt".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mu_min: u32,
    pub mu_max: u32,
    /// Reference operating point for the bits-per-word sweep.
    pub reference_sinr_db: f64,
    pub reference_u: u32,
    /// Pinned duty-cycle fraction for the fixed-DC comparison.
    pub dc_fixed_o1: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mu_min: 5,
            mu_max: 25,
            reference_sinr_db: 10.0,
            reference_u: 2,
            dc_fixed_o1: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Refuse joint grids larger than this.
    pub max_points: u64,
    /// Power grid size (log-spaced up to the power budget).
    pub power_grid_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_points: 10_000_000,
            power_grid_points: 5,
        }
    }
}

/// The full experiment configuration tree.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub semantics: SemanticsConfig,
    pub coexist: CoexistConfig,
    pub learner: LearnerSection,
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub oracle: OracleConfig,
}

impl ExperimentConfig {
    /// Loads a config: the defaults, optionally overlaid with a TOML file,
    /// then overlaid with `SARADC_*` environment variables.
    pub fn load(path: Option<&Path>) -> Result<Self, HarnessError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| HarnessError::Config(format!("parse {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let env_vars: Vec<(String, String)> = std::env::vars()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        apply_env_overrides(&mut table, &env_vars)?;
        let config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.semantics.mode != "parametric" && self.semantics.mode != "table" {
            return Err(HarnessError::Config(format!(
                "semantics.mode must be \"parametric\" or \"table\", got {:?}",
                self.semantics.mode
            )));
        }
        if self.semantics.mode == "table" && self.semantics.table_path.is_empty() {
            return Err(HarnessError::Config(
                "semantics.mode = \"table\" requires semantics.table_path".into(),
            ));
        }
        if self.scenario.n_vehicles == 0 {
            return Err(HarnessError::Config("scenario.n_vehicles must be >= 1".into()));
        }
        if self.semantics.u_max == 0 {
            return Err(HarnessError::Config("semantics.u_max must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.coexist.o1_min)
            || !(0.0..=1.0).contains(&self.coexist.o1_max)
            || self.coexist.o1_min > self.coexist.o1_max
        {
            return Err(HarnessError::Config(
                "coexist.o1_min/o1_max must satisfy 0 <= min <= max <= 1".into(),
            ));
        }
        if self.learner.t_max == 0 || self.learner.update_interval == 0 {
            return Err(HarnessError::Config(
                "learner.t_max and learner.update_interval must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn xi_model(&self) -> Result<XiModel, HarnessError> {
        if self.semantics.mode == "table" {
            XiModel::load_table(Path::new(&self.semantics.table_path))
                .map_err(|e| HarnessError::Config(e.to_string()))
        } else {
            let model = XiModel::Parametric {
                sat_rate: self.semantics.sat_rate,
                slope: self.semantics.slope,
                midpoint_db: self.semantics.midpoint_db,
            };
            model
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(model)
        }
    }

    /// Builds the runtime environment config (semantic scoring).
    pub fn env_config(&self) -> Result<EnvConfig, HarnessError> {
        self.env_config_scored(ScoringMode::Semantic)
    }

    pub fn env_config_scored(&self, scoring: ScoringMode) -> Result<EnvConfig, HarnessError> {
        Ok(EnvConfig {
            topology: TopologyConfig {
                mab_count: self.scenario.mab_count,
                mib_count: self.scenario.mib_count,
                wifi_ap_count: self.scenario.wifi_ap_count,
                rb_count_mab: self.scenario.rb_count_mab,
                rb_count_mib: self.scenario.rb_count_mib,
                rb_bandwidth_hz: self.scenario.rb_bandwidth_hz,
                bs_height_m: self.scenario.bs_height_m,
                vehicle_height_m: self.scenario.vehicle_height_m,
                area_side_m: self.scenario.area_side_m,
            },
            n_vehicles: self.scenario.n_vehicles,
            speed_mps: self.scenario.speed_mps,
            step_dt_s: self.scenario.step_dt_s,
            noise_figure_db: self.scenario.noise_figure_db,
            p_max_w: 10f64.powf((self.scenario.p_max_dbm - 30.0) / 10.0),
            xi_model: self.xi_model()?,
            xi_threshold: self.semantics.xi_threshold,
            i_over_l: self.semantics.i_over_l,
            u_max: self.semantics.u_max,
            wifi_rate_bits_s: self.coexist.wifi_rate_bits_s,
            o_total_s: self.coexist.o_total_s,
            o1_min: self.coexist.o1_min,
            o1_max: self.coexist.o1_max,
            st_vehicle_floor: self.coexist.st_vehicle_floor,
            st_wifi_floor: self.coexist.st_wifi_floor,
            collision_penalty: self.learner.collision_penalty,
            t_max: self.learner.t_max,
            scoring,
        })
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            hidden: self.learner.hidden.clone(),
            lr: self.learner.lr,
            betas: (self.learner.beta1, self.learner.beta2),
            gamma: self.learner.gamma,
            clip_eps: self.learner.clip_eps,
            entropy_coef: self.learner.entropy_coef,
            episodes: self.learner.episodes,
            update_interval: self.learner.update_interval,
            epochs: self.learner.epochs,
            minibatch: self.learner.minibatch,
            init_std: self.learner.init_std,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Applies `SARADC_SECTION__KEY=value` pairs onto a TOML table. Values are
/// parsed as TOML (so numbers, booleans, and arrays work); anything that
/// fails to parse is taken as a string.
fn apply_env_overrides(
    table: &mut toml::Table,
    vars: &[(String, String)],
) -> Result<(), HarnessError> {
    let mut sorted: Vec<&(String, String)> = vars.iter().collect();
    sorted.sort();
    for (key, raw) in sorted {
        let path = key.trim_start_matches(ENV_PREFIX).to_lowercase();
        let segments: Vec<&str> = path.split("__").collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(HarnessError::Config(format!("malformed override {key}")));
        }
        let value: toml::Value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let mut node = &mut *table;
        for segment in &segments[..segments.len() - 1] {
            node = node
                .entry(segment.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    HarnessError::Config(format!("override {key} descends into a non-table"))
                })?;
        }
        node.insert(segments.last().unwrap().to_string(), value);
    }
    Ok(())
}
