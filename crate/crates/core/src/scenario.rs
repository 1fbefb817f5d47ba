//! Scenario files: TOML with strict schema, defaults for everything optional.
//!
//! Unknown keys are fatal so a typo like `thw` fails loudly instead of
//! silently running with default tuning. Relative file references resolve
//! against the scenario file's own directory.

use crate::channel::ChannelParams;
use crate::controller::ControllerMode;
use crate::error::SimError;
use crate::idm::{IdmParams, SetSpeedEntry};
use crate::perception::{MountingGeometry, RadarNoise};
use crate::plant::{GainSchedule, PlantParams};
use crate::road::RoadGeometry;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Integration step, duration, and the seed every stochastic draw derives from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 0.01, duration: 60.0, seed: 42 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::config(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(SimError::config(format!(
                "sim.duration must be at least dt, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    /// Number of records a full run produces (t = 0 included).
    pub fn n_records(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }
}

/// What drives the lead vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadDriver {
    #[default]
    Idm,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeadConfig {
    pub driver: LeadDriver,
    pub v_init: f64,
    pub length: f64,
    pub idm: IdmParams,
    /// Piecewise-constant set-speed switches for the idm driver.
    pub set_speed: Vec<SetSpeedEntry>,
    /// Speed trace for the replay driver, CSV with a `t,v,a` header.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

impl Default for LeadConfig {
    fn default() -> Self {
        LeadConfig {
            driver: LeadDriver::Idm,
            v_init: 0.0,
            length: 4.8,
            idm: IdmParams::default(),
            set_speed: Vec::new(),
            trace: None,
        }
    }
}

impl LeadConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.v_init.is_finite() && self.v_init >= 0.0) {
            return Err(SimError::config("lead.v_init must be non-negative"));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(SimError::config("lead.length must be positive"));
        }
        match self.driver {
            LeadDriver::Idm => {
                self.idm.validate()?;
                self.schedule().validate()?;
            }
            LeadDriver::Replay => {
                if self.trace.is_none() {
                    return Err(SimError::config(
                        "lead.driver = \"replay\" requires lead.trace pointing at a speed CSV",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The set-speed entries as a schedule object.
    pub fn schedule(&self) -> crate::idm::SetSpeedSchedule {
        crate::idm::SetSpeedSchedule { entries: self.set_speed.clone() }
    }
}

/// Low-level acceleration loop fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowLevelMode {
    #[default]
    IdealLag,
    Pi,
}

/// Where the controller's gap measurement comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    #[default]
    Truth,
    Perception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FollowerConfig {
    pub mode: ControllerMode,
    pub t_hw: f64,
    /// Standstill clearance still demanded at v = 0, m.
    pub d0: f64,
    pub length: f64,
    /// Feedback bandwidth; kp = w_k², kd = w_k.
    pub w_k: f64,
    /// Low-level loop time constant, also the feedforward numerator constant.
    pub tau: f64,
    pub low_level: LowLevelMode,
    pub measurement: MeasurementMode,
    /// Set speed held when no in-lane target exists.
    pub cruise_speed: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_init: f64,
    /// Initial clearance to the vehicle ahead; equilibrium spacing if omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_init: Option<f64>,
    pub plant: PlantParams,
    pub pi_gains: GainSchedule,
    /// PI integrator clamp, m/s².
    pub integrator_limit: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig {
            mode: ControllerMode::Acc,
            t_hw: 1.0,
            d0: 2.0,
            length: 4.8,
            w_k: 1.0,
            tau: 0.4,
            low_level: LowLevelMode::IdealLag,
            measurement: MeasurementMode::Truth,
            cruise_speed: 15.0,
            a_min: -4.0,
            a_max: 2.0,
            v_init: 0.0,
            gap_init: None,
            plant: PlantParams::default(),
            pi_gains: GainSchedule::default(),
            integrator_limit: 2.0,
        }
    }
}

impl FollowerConfig {
    pub fn validate(&self, idx: usize) -> Result<(), SimError> {
        let ctx = |msg: &str| SimError::config(format!("follower {idx}: {msg}"));
        if !(self.t_hw.is_finite() && self.t_hw > 0.0) {
            return Err(ctx("t_hw must be positive"));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(ctx("d0 must be positive"));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(ctx("length must be positive"));
        }
        if !(self.w_k.is_finite() && self.w_k > 0.0) {
            return Err(ctx("w_k must be positive"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ctx("tau must be positive"));
        }
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return Err(ctx("command limits must straddle zero: a_min < 0 < a_max"));
        }
        if !(self.cruise_speed.is_finite() && self.cruise_speed >= 0.0) {
            return Err(ctx("cruise_speed must be non-negative"));
        }
        if !(self.v_init.is_finite() && self.v_init >= 0.0) {
            return Err(ctx("v_init must be non-negative"));
        }
        if let Some(g) = self.gap_init {
            if !(g.is_finite() && g > 0.0) {
                return Err(ctx("gap_init must be positive"));
            }
        }
        if !(self.integrator_limit.is_finite() && self.integrator_limit > 0.0) {
            return Err(ctx("integrator_limit must be positive"));
        }
        self.plant.validate().map_err(|e| ctx(&e.to_string()))?;
        self.pi_gains.validate().map_err(|e| ctx(&e.to_string()))?;
        Ok(())
    }
}

/// Extra vehicle placed on the road for perception scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Initial front-bumper arc position, m.
    pub s: f64,
    /// Lateral offset, m, positive right.
    pub lat: f64,
    /// Constant speed along the road, m/s.
    pub v: f64,
    pub length: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig { s: 30.0, lat: 0.0, v: 10.0, length: 4.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    /// Object-list frame interval, s.
    pub radar_period: f64,
    /// Lane-line frame interval, s.
    pub camera_period: f64,
    /// Lane-line fit distance ahead of the camera, m.
    pub fit_range: f64,
    pub left_visible: bool,
    pub right_visible: bool,
    pub road: RoadGeometry,
    pub mounting: MountingGeometry,
    pub noise: RadarNoise,
    /// Adjacent-lane or in-lane extras beyond the platoon itself.
    pub traffic: Vec<TrafficConfig>,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            radar_period: 0.05,
            camera_period: 0.1,
            fit_range: 80.0,
            left_visible: true,
            right_visible: true,
            road: RoadGeometry::default(),
            mounting: MountingGeometry::default(),
            noise: RadarNoise::default(),
            traffic: Vec::new(),
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.radar_period.is_finite() && self.radar_period > 0.0) {
            return Err(SimError::config("perception.radar_period must be positive"));
        }
        if !(self.camera_period.is_finite() && self.camera_period > 0.0) {
            return Err(SimError::config("perception.camera_period must be positive"));
        }
        if !(self.fit_range.is_finite() && self.fit_range > 1.0) {
            return Err(SimError::config("perception.fit_range must exceed 1 m"));
        }
        if !(self.noise.sigma_r >= 0.0 && self.noise.sigma_alpha_deg >= 0.0) {
            return Err(SimError::config("perception.noise sigmas must be non-negative"));
        }
        self.road.validate()?;
        self.mounting.validate()?;
        for (i, t) in self.traffic.iter().enumerate() {
            if !(t.v.is_finite() && t.v >= 0.0 && t.length > 0.0) {
                return Err(SimError::config(format!("perception.traffic {i}: bad speed or length")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), plots: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Startup interval excluded from scalar metrics, s.
    pub window_start: f64,
    pub norm: crate::metrics::SignalNorm,
    pub settle_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window_start: crate::metrics::DEFAULT_WINDOW_START,
            norm: crate::metrics::SignalNorm::LInf,
            settle_threshold: crate::metrics::DEFAULT_SETTLE_THRESHOLD,
        }
    }
}

/// One complete run description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    pub lead: LeadConfig,
    #[serde(rename = "follower")]
    pub followers: Vec<FollowerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perception: Option<PerceptionConfig>,
    pub output: OutputConfig,
    pub metrics: MetricsConfig,
}

impl ScenarioConfig {
    /// Cross-field checks; per-section numeric checks included.
    pub fn validate(&self) -> Result<(), SimError> {
        self.sim.validate()?;
        self.lead.validate()?;
        if self.followers.is_empty() {
            return Err(SimError::config("scenario needs at least one [[follower]]"));
        }
        for (i, f) in self.followers.iter().enumerate() {
            f.validate(i)?;
            if f.mode == ControllerMode::Cacc && self.channel.is_none() {
                return Err(SimError::config(format!(
                    "follower {i} is cacc but the scenario has no [channel] section"
                )));
            }
            if f.measurement == MeasurementMode::Perception && self.perception.is_none() {
                return Err(SimError::config(format!(
                    "follower {i} uses perception measurement but the scenario has no [perception] section"
                )));
            }
        }
        if let Some(ch) = &self.channel {
            ch.validate()?;
        }
        if let Some(p) = &self.perception {
            p.validate()?;
        }
        Ok(())
    }
}

/// Parse a scenario from TOML text; `base_dir` anchors relative file references.
pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig, SimError> {
    let mut cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| SimError::config(e.to_string()))?;
    if let Some(trace) = &cfg.lead.trace {
        if trace.is_relative() {
            cfg.lead.trace = Some(base_dir.join(trace));
        }
    }
    cfg.validate()?;
    if let Some(trace) = &cfg.lead.trace {
        if cfg.lead.driver == LeadDriver::Replay && !trace.is_file() {
            return Err(SimError::config(format!(
                "lead.trace file not found: {}",
                trace.display()
            )));
        }
    }
    Ok(cfg)
}

/// Read and parse a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        SimError::config(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario_str(&text, base)
}

/// Fully-populated default scenario as TOML; `parse` of this round-trips.
pub fn emit_default_config() -> String {
    let cfg = ScenarioConfig {
        followers: vec![FollowerConfig::default()],
        channel: Some(ChannelParams::default()),
        perception: Some(PerceptionConfig::default()),
        ..ScenarioConfig::default()
    };
    toml::to_string_pretty(&cfg).expect("default config serializes")
}
