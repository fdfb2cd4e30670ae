//! Scenario configuration: randomization bounds, vehicle and actuator
//! parameters, target and divert settings, episode rules and reward weights.
//!
//! Files are sectioned TOML with units in the key names. Every key has a
//! default, so a file only needs to list what it changes. Angles are degrees
//! in the file and radians everywhere else.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{self, ConstraintLimits};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{}", format_issues(.path, .issues))]
    Invalid { path: String, issues: Vec<ConfigIssue> },
}

fn format_issues(path: &str, issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("{path}:{i}")).collect::<Vec<_>>().join("\n")
}

/// A semantic validation failure tied to a key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub section: &'static str,
    pub key: &'static str,
    pub message: String,
    /// 1-based line of the key in the source file, when it appears there.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{l}: [{}] {}: {}", self.section, self.key, self.message),
            None => write!(f, " [{}] {}: {}", self.section, self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationMode {
    /// End when the closing velocity turns negative.
    ClosingVelocity,
    /// End when the vehicle altitude falls below zero.
    GroundImpact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    TerminateOnViolation,
    MonitorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBounds {
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub azimuth_min_deg: f64,
    pub azimuth_max_deg: f64,
    pub heading_error_min_deg: f64,
    pub heading_error_max_deg: f64,
    pub altitude_min_m: f64,
    pub altitude_max_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub flight_path_min_deg: f64,
    pub flight_path_max_deg: f64,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
    pub bank_min_deg: f64,
    pub bank_max_deg: f64,
    pub sideslip_min_deg: f64,
    pub sideslip_max_deg: f64,
}

impl Default for InitialBounds {
    fn default() -> Self {
        Self {
            range_min_m: 200_000.0,
            range_max_m: 200_000.0,
            azimuth_min_deg: -10.0,
            azimuth_max_deg: 10.0,
            heading_error_min_deg: -10.0,
            heading_error_max_deg: 10.0,
            altitude_min_m: 24_800.0,
            altitude_max_m: 25_200.0,
            speed_min_mps: 2900.0,
            speed_max_mps: 3100.0,
            flight_path_min_deg: -5.0,
            flight_path_max_deg: 0.0,
            alpha_min_deg: 1.0,
            alpha_max_deg: 3.0,
            bank_min_deg: -2.0,
            bank_max_deg: 2.0,
            sideslip_min_deg: -2.0,
            sideslip_max_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub mass_kg: f64,
    pub reference_area_m2: f64,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
    pub sideslip_limit_deg: f64,
    pub bank_limit_deg: f64,
    pub bank_rate_limit_dps: f64,
    pub alpha_rate_limit_dps: f64,
    pub sideslip_rate_limit_dps: f64,
    pub actuator_tau_s: f64,
    pub speed_of_sound_mps: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass_kg: 1361.0,
            reference_area_m2: 3.347,
            alpha_min_deg: 0.0,
            alpha_max_deg: 12.0,
            sideslip_limit_deg: 12.0,
            bank_limit_deg: 180.0,
            bank_rate_limit_dps: 10.0,
            alpha_rate_limit_dps: 4.0,
            sideslip_rate_limit_dps: 4.0,
            actuator_tau_s: 0.1,
            speed_of_sound_mps: aero::SPEED_OF_SOUND,
        }
    }
}

impl VehicleParams {
    /// Rate limits in action-channel order (bank, alpha, sideslip), rad/s.
    pub fn rate_limits(&self) -> [f64; 3] {
        [
            self.bank_rate_limit_dps.to_radians(),
            self.alpha_rate_limit_dps.to_radians(),
            self.sideslip_rate_limit_dps.to_radians(),
        ]
    }
}

/// Per-episode multiplicative variation bounds; each factor is drawn as
/// `1 + U(-v, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub lift_fraction: f64,
    pub side_force_fraction: f64,
    pub drag_fraction: f64,
    pub density_fraction: f64,
    pub mass_fraction: f64,
    pub area_fraction: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            lift_fraction: 0.1,
            side_force_fraction: 0.1,
            drag_fraction: 0.1,
            density_fraction: 0.1,
            mass_fraction: 0.0,
            area_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorModel {
    pub failure_probability: f64,
    pub failure_bias_min: f64,
    pub failure_bias_max: f64,
    pub noise_std_dps: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self { failure_probability: 0.5, failure_bias_min: -0.3, failure_bias_max: 0.0, noise_std_dps: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub scale_factor_error: f64,
    /// Redraw the scale factors every guidance step instead of once per
    /// episode.
    pub redraw_each_step: bool,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { scale_factor_error: 0.005, redraw_each_step: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetModel {
    pub max_speed_mps: f64,
    pub max_accel_mps2: f64,
    /// Keep target velocity and acceleration horizontal (ground target).
    pub planar: bool,
}

impl Default for TargetModel {
    fn default() -> Self {
        Self { max_speed_mps: 30.0, max_accel_mps2: 0.5, planar: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivertModel {
    pub probability: f64,
    pub trigger_min_m: f64,
    pub trigger_max_m: f64,
    /// Lateral offset bound as a fraction of the trigger range.
    pub fraction: f64,
    /// Replace the single divert with an evasion chain ending on the true
    /// target.
    pub evasion: bool,
    pub evasion_start_m: f64,
    pub evasion_end_m: f64,
    pub evasion_min_spacing_m: f64,
    pub evasion_max_spacing_m: f64,
}

impl Default for DivertModel {
    fn default() -> Self {
        Self {
            probability: 0.5,
            trigger_min_m: 30_000.0,
            trigger_max_m: 150_000.0,
            fraction: 0.05,
            evasion: false,
            evasion_start_m: 150_000.0,
            evasion_end_m: 25_000.0,
            evasion_min_spacing_m: 30_000.0,
            evasion_max_spacing_m: 40_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeRules {
    pub guidance_period_s: f64,
    pub time_limit_s: f64,
    pub termination: TerminationMode,
    pub constraints: ConstraintMode,
    pub heating_limit_w_m2: f64,
    pub dynamic_pressure_limit_pa: f64,
    pub load_limit_mps2: f64,
}

impl Default for EpisodeRules {
    fn default() -> Self {
        Self {
            guidance_period_s: 0.2,
            time_limit_s: 120.0,
            termination: TerminationMode::ClosingVelocity,
            constraints: ConstraintMode::TerminateOnViolation,
            heating_limit_w_m2: aero::HEATING_LIMIT,
            dynamic_pressure_limit_pa: aero::DYNAMIC_PRESSURE_LIMIT,
            load_limit_mps2: aero::LOAD_LIMIT,
        }
    }
}

impl EpisodeRules {
    pub fn limits(&self) -> ConstraintLimits {
        ConstraintLimits {
            heating_rate: self.heating_limit_w_m2,
            dynamic_pressure: self.dynamic_pressure_limit_pa,
            load: self.load_limit_mps2,
        }
    }

    /// Number of base integration steps per guidance period.
    pub fn substeps(&self) -> usize {
        (self.guidance_period_s / crate::dynamics::BASE_DT).round() as usize
    }

    pub fn max_steps(&self) -> usize {
        (self.time_limit_s / self.guidance_period_s - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub shaping_scale: f64,
    pub control_penalty: f64,
    pub bonus: f64,
    pub miss_limit_m: f64,
    pub speed_limit_mps: f64,
    pub omega_sigma_rps: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            shaping_scale: 1.0,
            control_penalty: -0.01,
            bonus: 20.0,
            miss_limit_m: 50.0,
            speed_limit_mps: 1700.0,
            omega_sigma_rps: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub initial: InitialBounds,
    pub vehicle: VehicleParams,
    pub perturbation: Perturbation,
    pub actuator: ActuatorModel,
    pub sensor: SensorModel,
    pub target: TargetModel,
    pub divert: DivertModel,
    pub episode: EpisodeRules,
    pub reward: RewardWeights,
}

fn issue(section: &'static str, key: &'static str, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { section, key, message: message.into(), line: None }
}

impl ScenarioConfig {
    /// All semantic problems with the configuration (empty when valid).
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut ordered = |section, key: &'static str, lo: f64, hi: f64| {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                out.push(issue(section, key, format!("bounds must be finite with min <= max, got [{lo}, {hi}]")));
            }
        };
        let i = &self.initial;
        ordered("initial", "range_max_m", i.range_min_m, i.range_max_m);
        ordered("initial", "azimuth_max_deg", i.azimuth_min_deg, i.azimuth_max_deg);
        ordered("initial", "heading_error_max_deg", i.heading_error_min_deg, i.heading_error_max_deg);
        ordered("initial", "altitude_max_m", i.altitude_min_m, i.altitude_max_m);
        ordered("initial", "speed_max_mps", i.speed_min_mps, i.speed_max_mps);
        ordered("initial", "flight_path_max_deg", i.flight_path_min_deg, i.flight_path_max_deg);
        ordered("initial", "alpha_max_deg", i.alpha_min_deg, i.alpha_max_deg);
        ordered("initial", "bank_max_deg", i.bank_min_deg, i.bank_max_deg);
        ordered("initial", "sideslip_max_deg", i.sideslip_min_deg, i.sideslip_max_deg);
        ordered("actuator", "failure_bias_max", self.actuator.failure_bias_min, self.actuator.failure_bias_max);
        ordered("divert", "trigger_max_m", self.divert.trigger_min_m, self.divert.trigger_max_m);
        ordered(
            "divert",
            "evasion_max_spacing_m",
            self.divert.evasion_min_spacing_m,
            self.divert.evasion_max_spacing_m,
        );

        if !(i.speed_min_mps > 0.0) {
            out.push(issue("initial", "speed_min_mps", "initial speed must be positive"));
        }
        if !(i.altitude_min_m >= 0.0 && i.altitude_max_m < i.range_min_m) {
            out.push(issue("initial", "altitude_max_m", "altitude must lie in [0, range_min_m)"));
        }
        if i.flight_path_min_deg <= -90.0 || i.flight_path_max_deg >= 90.0 {
            out.push(issue("initial", "flight_path_min_deg", "flight path angle must be inside (-90, 90) deg"));
        }

        let v = &self.vehicle;
        let positive = [
            ("mass_kg", v.mass_kg),
            ("reference_area_m2", v.reference_area_m2),
            ("bank_rate_limit_dps", v.bank_rate_limit_dps),
            ("alpha_rate_limit_dps", v.alpha_rate_limit_dps),
            ("sideslip_rate_limit_dps", v.sideslip_rate_limit_dps),
            ("actuator_tau_s", v.actuator_tau_s),
            ("speed_of_sound_mps", v.speed_of_sound_mps),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                out.push(issue("vehicle", key, format!("must be positive, got {value}")));
            }
        }
        if !(v.alpha_min_deg <= v.alpha_max_deg) {
            out.push(issue("vehicle", "alpha_max_deg", "alpha limits must satisfy min <= max"));
        }

        let fractions = [
            ("perturbation", "lift_fraction", self.perturbation.lift_fraction),
            ("perturbation", "side_force_fraction", self.perturbation.side_force_fraction),
            ("perturbation", "drag_fraction", self.perturbation.drag_fraction),
            ("perturbation", "density_fraction", self.perturbation.density_fraction),
            ("perturbation", "mass_fraction", self.perturbation.mass_fraction),
            ("perturbation", "area_fraction", self.perturbation.area_fraction),
            ("sensor", "scale_factor_error", self.sensor.scale_factor_error),
            ("divert", "fraction", self.divert.fraction),
            ("actuator", "noise_std_dps", self.actuator.noise_std_dps),
        ];
        for (section, key, value) in fractions {
            if !(value >= 0.0 && value.is_finite()) {
                out.push(issue(section, key, format!("must be a non-negative number, got {value}")));
            }
        }
        for (section, key, value) in [
            ("actuator", "failure_probability", self.actuator.failure_probability),
            ("divert", "probability", self.divert.probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                out.push(issue(section, key, format!("probability must lie in [0, 1], got {value}")));
            }
        }
        if self.actuator.failure_bias_min < -1.0 || self.actuator.failure_bias_max > 0.0 {
            out.push(issue("actuator", "failure_bias_min", "failure bias range must lie inside [-1, 0]"));
        }
        if !(self.target.max_speed_mps >= 0.0 && self.target.max_accel_mps2 >= 0.0) {
            out.push(issue("target", "max_speed_mps", "target limits must be non-negative"));
        }
        if self.divert.evasion && !(self.divert.evasion_min_spacing_m > 0.0) {
            out.push(issue("divert", "evasion_min_spacing_m", "evasion spacing must be positive"));
        }
        if self.divert.evasion && self.divert.evasion_end_m > self.divert.evasion_start_m {
            out.push(issue("divert", "evasion_end_m", "evasion chain must end below where it starts"));
        }

        let e = &self.episode;
        let ratio = e.guidance_period_s / crate::dynamics::BASE_DT;
        if !(e.guidance_period_s > 0.0) || ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            out.push(issue(
                "episode",
                "guidance_period_s",
                format!("must be a positive multiple of the {} s integration step", crate::dynamics::BASE_DT),
            ));
        }
        if !(e.time_limit_s > 0.0) {
            out.push(issue("episode", "time_limit_s", "must be positive"));
        }
        for (key, value) in [
            ("heating_limit_w_m2", e.heating_limit_w_m2),
            ("dynamic_pressure_limit_pa", e.dynamic_pressure_limit_pa),
            ("load_limit_mps2", e.load_limit_mps2),
        ] {
            if !(value > 0.0) {
                out.push(issue("episode", key, "constraint limits must be positive"));
            }
        }
        if !(self.reward.omega_sigma_rps > 0.0) {
            out.push(issue("reward", "omega_sigma_rps", "must be positive"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Vec<ConfigIssue>> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self, ConfigError> {
        let table: toml::Table =
            toml::from_str(src).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })?;
        Self::from_table(table, src, origin)
    }

    pub(crate) fn from_table(table: toml::Table, src: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: origin.into(),
            message: with_key_line(src, &e.to_string()),
        })?;
        cfg.validate().map_err(|issues| ConfigError::Invalid {
            path: origin.into(),
            issues: issues.into_iter().map(|i| locate(src, i)).collect(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = read_config(path)?;
        Self::from_toml_str(&src, &path.display().to_string())
    }
}

pub(crate) fn read_config(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

/// Fills in the source line of an issue's key, if the key is present.
pub(crate) fn locate(src: &str, mut issue: ConfigIssue) -> ConfigIssue {
    issue.line = find_key_line(src, issue.section, issue.key);
    issue
}

pub(crate) fn find_key_line(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

/// Errors from typed deserialization of an already-parsed table lose their
/// span; recover the line of an unknown or mistyped key when possible.
fn with_key_line(src: &str, message: &str) -> String {
    let key =
        message.split('`').nth(1).filter(|k| !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
    if let Some(key) = key {
        for (n, raw) in src.lines().enumerate() {
            if raw.trim().split_once('=').is_some_and(|(k, _)| k.trim() == key) {
                return format!("line {}: {}", n + 1, message.trim());
            }
        }
    }
    message.trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(ScenarioConfig::default().validate().is_ok());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml(), "mem").unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ScenarioConfig::from_toml_str("[divert]\nprobability = 0.0\n", "mem").unwrap();
        assert_eq!(cfg.divert.probability, 0.0);
        assert_eq!(cfg.vehicle.mass_kg, 1361.0);
    }

    #[test]
    fn invalid_value_reports_line() {
        let src = "[initial]\nspeed_min_mps = 2900\n\n[actuator]\nfailure_probability = 1.5\n";
        let err = ScenarioConfig::from_toml_str(src, "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg.toml:5:"), "{msg}");
        assert!(msg.contains("failure_probability"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let src = "[vehicle]\nmass_kg = 1000\nmass_lb = 3\n";
        let msg = ScenarioConfig::from_toml_str(src, "cfg.toml").unwrap_err().to_string();
        assert!(msg.contains("mass_lb"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn guidance_period_must_be_step_multiple() {
        let mut cfg = ScenarioConfig::default();
        cfg.episode.guidance_period_s = 0.25;
        assert!(cfg.validate().is_err());
        cfg.episode.guidance_period_s = 0.5;
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.episode.substeps(), 5);
    }

    #[test]
    fn step_cap() {
        assert_eq!(ScenarioConfig::default().episode.max_steps(), 600);
    }
}
