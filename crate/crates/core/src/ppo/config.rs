use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{find_key_line, read_config, ConfigError, ConfigIssue, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingParams {
    pub updates: u64,
    pub episodes_per_batch: usize,
    pub gamma_shaping: f64,
    pub gamma_terminal: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub clip: f64,
    pub kl_target: f64,
    /// Policy passes stop once the measured KL exceeds this multiple of the
    /// target.
    pub kl_stop_factor: f64,
    /// A pass that pushes the KL above this multiple of the target is undone.
    pub kl_limit_factor: f64,
    pub revert_over_limit: bool,
    pub policy_passes: usize,
    pub value_passes: usize,
    pub servo_high_factor: f64,
    pub servo_low_factor: f64,
    pub lr_decrease: f64,
    pub lr_increase: f64,
    pub clip_decrease: f64,
    pub clip_increase: f64,
    pub clip_min: f64,
    pub clip_max: f64,
    pub normalize_advantages: bool,
    pub entropy_coef: f64,
    pub checkpoint_every: u64,
    pub policy_seed: u64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self {
            updates: 1000,
            episodes_per_batch: 60,
            gamma_shaping: 0.90,
            gamma_terminal: 0.995,
            lr_policy: 1e-4,
            lr_value: 1e-3,
            clip: 0.2,
            kl_target: 0.001,
            kl_stop_factor: 4.0,
            kl_limit_factor: 5.0,
            revert_over_limit: true,
            policy_passes: 3,
            value_passes: 10,
            servo_high_factor: 2.0,
            servo_low_factor: 0.5,
            lr_decrease: 0.5,
            lr_increase: 1.5,
            clip_decrease: 0.9,
            clip_increase: 1.1,
            clip_min: 0.01,
            clip_max: 0.3,
            normalize_advantages: true,
            entropy_coef: 0.0,
            checkpoint_every: 10,
            policy_seed: 0,
        }
    }
}

fn issue(key: &'static str, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { section: "training", key, message: message.into(), line: None }
}

impl TrainingParams {
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut positive = |key, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(issue(key, format!("must be positive, got {v}")));
            }
        };
        positive("lr_policy", self.lr_policy);
        positive("lr_value", self.lr_value);
        positive("kl_target", self.kl_target);
        positive("kl_stop_factor", self.kl_stop_factor);
        positive("kl_limit_factor", self.kl_limit_factor);
        positive("lr_decrease", self.lr_decrease);
        positive("lr_increase", self.lr_increase);
        positive("clip_decrease", self.clip_decrease);
        positive("clip_increase", self.clip_increase);
        for (key, g) in [("gamma_shaping", self.gamma_shaping), ("gamma_terminal", self.gamma_terminal)] {
            if !(0.0..=1.0).contains(&g) {
                out.push(issue(key, format!("must lie in [0, 1], got {g}")));
            }
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            out.push(issue("clip", format!("must lie in (0, 1), got {}", self.clip)));
        }
        if !(self.clip_min > 0.0 && self.clip_min <= self.clip_max && self.clip_max < 1.0) {
            out.push(issue("clip_max", "need 0 < clip_min <= clip_max < 1"));
        }
        if self.servo_low_factor >= self.servo_high_factor {
            out.push(issue("servo_low_factor", "must be below servo_high_factor"));
        }
        if self.episodes_per_batch == 0 {
            out.push(issue("episodes_per_batch", "must be at least 1"));
        }
        if self.policy_passes == 0 {
            out.push(issue("policy_passes", "must be at least 1"));
        }
        if self.entropy_coef < 0.0 {
            out.push(issue("entropy_coef", "must be non-negative"));
        }
        if self.checkpoint_every == 0 {
            out.push(issue("checkpoint_every", "must be at least 1"));
        }
        out
    }
}

/// Training run configuration: scenario sections plus a `[training]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub training: TrainingParams,
}

impl RunConfig {
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(src).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })?;
        let training = match table.remove("training") {
            None => TrainingParams::default(),
            Some(t) => t.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
                path: origin.into(),
                message: format!("[training] {}", e.message().trim()),
            })?,
        };
        let scenario = ScenarioConfig::from_table(table, src, origin)?;
        let issues: Vec<_> = training
            .issues()
            .into_iter()
            .map(|mut i| {
                i.line = find_key_line(src, "training", i.key);
                i
            })
            .collect();
        if !issues.is_empty() {
            return Err(ConfigError::Invalid { path: origin.into(), issues });
        }
        Ok(Self { scenario, training })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = read_config(path)?;
        Self::from_toml_str(&src, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }
}
