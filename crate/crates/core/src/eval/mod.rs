//! Monte Carlo evaluation of guidance laws over experiment cases.

pub mod cases;
pub mod export;
pub mod pn;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aero::ConstraintKind;
use crate::config::{ConstraintMode, ScenarioConfig};
use crate::env::trace::TraceRow;
use crate::env::{EnvError, Environment};
use crate::guidance::{Guidance, NeuralGuidance};
use crate::net::checkpoint::{Checkpoint, CheckpointError};
use crate::ppo::episode_seed;
use crate::vec3::Vec3;

pub use cases::{CaseError, ExperimentCase, CASE_LABELS};
pub use pn::{pn_command, PnGains, PnGuidance};

/// Stream index separating evaluation seeds from training seeds.
const EVAL_STREAM: u64 = 0xE7A1;

/// Success needs this terminal speed, m/s.
pub const SUCCESS_SPEED: f64 = 1700.0;

pub fn eval_seed(seed: u64, episode: u64) -> u64 {
    episode_seed(seed, EVAL_STREAM, episode)
}

#[derive(Debug, Clone)]
pub enum PolicySource<'a> {
    Network { checkpoint: &'a Checkpoint, stochastic: bool },
    Pn(PnGains),
}

impl PolicySource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Network { .. } => "network",
            Self::Pn(_) => "pn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: u64,
    pub seed: u64,
    pub reason: String,
    pub miss_distance: f64,
    /// Vehicle minus target position at closest approach.
    pub miss_vector: Vec3,
    pub terminal_speed: f64,
    /// Horizontal direction of travel at the end, for downrange/crossrange.
    pub terminal_heading: f64,
    pub time_of_flight: f64,
    pub steps: usize,
    pub total_reward: f64,
    pub bonus: bool,
    pub target_position: Vec3,
    pub diverts: usize,
    /// Kinds violated at any step.
    pub violations: Vec<ConstraintKind>,
    pub first_violation: Option<ConstraintKind>,
    pub max_heating_rate: f64,
    pub max_dynamic_pressure: f64,
    pub max_load: f64,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

impl EpisodeRecord {
    pub fn success(&self, radius: f64) -> bool {
        self.miss_distance < radius && self.terminal_speed >= SUCCESS_SPEED
    }

    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

/// Runs one episode to completion with `guidance`.
pub fn run_episode(
    env: &mut Environment,
    guidance: &mut dyn Guidance,
    index: u64,
    seed: u64,
) -> Result<EpisodeRecord, EnvError> {
    let mut obs = env.reset(seed)?;
    guidance.reset(seed);
    let limits = env.config().episode.limits();
    let mut rec = EpisodeRecord {
        index,
        seed,
        reason: String::new(),
        miss_distance: f64::NAN,
        miss_vector: Vec3::ZERO,
        terminal_speed: f64::NAN,
        terminal_heading: 0.0,
        time_of_flight: 0.0,
        steps: 0,
        total_reward: 0.0,
        bonus: false,
        target_position: Vec3::ZERO,
        diverts: 0,
        violations: Vec::new(),
        first_violation: None,
        max_heating_rate: 0.0,
        max_dynamic_pressure: 0.0,
        max_load: 0.0,
        trace: None,
    };
    loop {
        let u = guidance.act(&obs);
        let step = env.step(&u)?;
        rec.steps += 1;
        rec.total_reward += step.reward;
        rec.diverts += step.info.diverts.len();
        let c = &step.info.constraints;
        rec.max_heating_rate = rec.max_heating_rate.max(c.heating_rate);
        rec.max_dynamic_pressure = rec.max_dynamic_pressure.max(c.dynamic_pressure);
        rec.max_load = rec.max_load.max(c.load);
        for kind in ConstraintKind::ALL {
            if c.value(kind) > limits.value(kind) && !rec.violations.contains(&kind) {
                rec.violations.push(kind);
            }
        }
        if rec.first_violation.is_none() {
            rec.first_violation = step.info.violation;
        }
        obs = step.observation;
        if let Some(t) = step.info.terminal {
            rec.reason = t.reason.label();
            rec.miss_distance = t.miss_distance;
            rec.miss_vector = t.miss_vector;
            rec.terminal_speed = t.terminal_speed;
            rec.time_of_flight = t.time;
            rec.target_position = t.target_position;
            rec.bonus = step.components.bonus > 0.0;
            let v = env.vehicle().velocity;
            rec.terminal_heading = v.y.atan2(v.x);
            break;
        }
    }
    rec.trace = env.take_trace();
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        if xs.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN, min: f64::NAN, max: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, sd, min, max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: String,
    pub policy: String,
    pub episodes: usize,
    pub miss: Stats,
    pub terminal_speed: Stats,
    pub success_5m_pct: f64,
    pub success_10m_pct: f64,
    pub violation_pct: f64,
    /// Episodes per first-violated constraint label.
    pub violation_types: BTreeMap<String, usize>,
    /// Per-episode peak heating rate, W/m^2.
    pub heating_rate: Stats,
    /// Per-episode peak dynamic pressure, Pa.
    pub dynamic_pressure: Stats,
    /// Per-episode peak load, m/s^2.
    pub load: Stats,
    pub time_of_flight: Stats,
    pub terminations: BTreeMap<String, usize>,
}

impl CaseSummary {
    pub fn from_records(case: &str, policy: &str, records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        let mut violation_types = BTreeMap::new();
        let mut terminations = BTreeMap::new();
        for r in records {
            if let Some(k) = r.first_violation {
                *violation_types.entry(k.label().to_string()).or_insert(0) += 1;
            }
            *terminations.entry(r.reason.clone()).or_insert(0) += 1;
        }
        Self {
            case: case.to_string(),
            policy: policy.to_string(),
            episodes: n,
            miss: Stats::of(records.iter().map(|r| r.miss_distance)),
            terminal_speed: Stats::of(records.iter().map(|r| r.terminal_speed)),
            success_5m_pct: pct(records.iter().filter(|r| r.success(5.0)).count()),
            success_10m_pct: pct(records.iter().filter(|r| r.success(10.0)).count()),
            violation_pct: pct(records.iter().filter(|r| r.violated()).count()),
            violation_types,
            heating_rate: Stats::of(records.iter().map(|r| r.max_heating_rate)),
            dynamic_pressure: Stats::of(records.iter().map(|r| r.max_dynamic_pressure)),
            load: Stats::of(records.iter().map(|r| r.max_load)),
            time_of_flight: Stats::of(records.iter().map(|r| r.time_of_flight)),
            terminations,
        }
    }

    /// Most frequent violation label, or "-".
    pub fn dominant_violation(&self) -> String {
        self.violation_types.iter().max_by_key(|(_, c)| **c).map(|(k, _)| k.clone()).unwrap_or_else(|| "-".into())
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub summary: CaseSummary,
    pub records: Vec<EpisodeRecord>,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("episode {index}: {source}")]
    Env { index: u64, source: EnvError },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Record full traces for the first this-many episodes.
    pub traces: usize,
}

/// The scenario a case is evaluated under: the base config with the case
/// overrides applied and constraints monitored instead of enforced.
pub fn case_scenario(base: &ScenarioConfig, case: ExperimentCase) -> ScenarioConfig {
    let mut cfg = base.clone();
    case.apply(&mut cfg);
    cfg.episode.constraints = ConstraintMode::MonitorOnly;
    cfg
}

/// Monte Carlo run of one case. Deterministic in (case, policy, options).
pub fn run_case(
    case: ExperimentCase,
    base: &ScenarioConfig,
    policy: &PolicySource<'_>,
    opts: RunOptions,
) -> Result<CaseResult, EvalError> {
    if let PolicySource::Network { checkpoint, .. } = policy {
        checkpoint.expect_dims(crate::env::OBS_DIM, crate::env::ACT_DIM)?;
    }
    let scenario = case_scenario(base, case);
    let outcomes: Vec<Result<EpisodeRecord, EvalError>> = (0..opts.episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = Environment::new(scenario.clone());
            if (i as usize) < opts.traces {
                env = env.with_trace();
            }
            let seed = eval_seed(opts.seed, i);
            let run = match policy {
                PolicySource::Network { checkpoint, stochastic } => {
                    let mut g = NeuralGuidance::new(&checkpoint.policy, &checkpoint.scaler, *stochastic);
                    run_episode(&mut env, &mut g, i, seed)
                }
                PolicySource::Pn(gains) => run_episode(&mut env, &mut PnGuidance::new(*gains), i, seed),
            };
            run.map_err(|source| EvalError::Env { index: i, source })
        })
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        records.push(o?);
    }
    let summary = CaseSummary::from_records(&case.to_string(), policy.name(), &records);
    Ok(CaseResult { summary, records, scenario })
}
