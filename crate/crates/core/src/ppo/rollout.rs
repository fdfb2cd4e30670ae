use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::env::{ActionCommand, Environment, TerminalInfo, ACT_DIM, OBS_DIM};
use crate::net::{log_prob, sample, ObservationScaler, PolicyNet};

/// One stochastic training episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeRollout {
    pub seed: u64,
    /// Unscaled observations, `len x OBS_DIM`.
    pub raw_obs: Vec<f64>,
    /// Observations as the policy saw them (scaler frozen for the batch).
    pub scaled_obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Shaping plus control reward per step.
    pub running: Vec<f64>,
    /// Terminal bonus per step (non-zero only at the last step).
    pub bonus: Vec<f64>,
    pub terminal: Option<TerminalInfo>,
    pub violation: bool,
    /// Set when the episode could not be started.
    pub error: Option<String>,
}

impl EpisodeRollout {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.running.iter().sum::<f64>() + self.bonus.iter().sum::<f64>()
    }

    pub fn got_bonus(&self) -> bool {
        self.bonus.iter().any(|b| *b > 0.0)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Environment seed of episode `episode` in update `update`.
pub fn episode_seed(base: u64, update: u64, episode: u64) -> u64 {
    splitmix(splitmix(splitmix(base) ^ update) ^ episode)
}

/// Seed of the action-noise stream paired with an environment seed.
pub fn action_seed(env_seed: u64) -> u64 {
    splitmix(env_seed ^ 0x00AC_7105_EED5_0000)
}

pub fn collect_episode(
    scenario: &ScenarioConfig,
    policy: &PolicyNet,
    scaler: &ObservationScaler,
    seed: u64,
) -> EpisodeRollout {
    let mut out = EpisodeRollout { seed, ..Default::default() };
    let mut env = Environment::new(scenario.clone());
    let mut obs = match env.reset(seed) {
        Ok(o) => o,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let log_std = policy.0.log_std().expect("policy has log-std").to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed(seed));
    let mut h = policy.0.zero_hidden();
    let mut scaled = [0.0; OBS_DIM];
    let cap = scenario.episode.max_steps();
    for _ in 0..cap {
        scaler.scale_into(&obs.0, &mut scaled);
        let (mean, h_next) = policy.0.step(&scaled, &h).expect("policy matches observation size");
        h = h_next;
        let u = sample(&mean, &log_std, &mut rng);
        out.log_probs.push(log_prob(&mean, &log_std, &u));
        out.raw_obs.extend_from_slice(&obs.0);
        out.scaled_obs.extend_from_slice(&scaled);
        out.actions.extend_from_slice(&u);
        let step =
            env.step(&ActionCommand(std::array::from_fn::<f64, ACT_DIM, _>(|i| u[i]))).expect("episode is active");
        out.running.push(step.components.running());
        out.bonus.push(step.components.bonus);
        out.violation |= step.info.violation.is_some();
        obs = step.observation;
        if step.done {
            out.terminal = step.info.terminal;
            break;
        }
    }
    out
}

/// Runs one episode per seed; results are in seed order regardless of how
/// the work is scheduled.
pub fn collect_batch(
    scenario: &ScenarioConfig,
    policy: &PolicyNet,
    scaler: &ObservationScaler,
    seeds: &[u64],
) -> Vec<EpisodeRollout> {
    seeds.par_iter().map(|s| collect_episode(scenario, policy, scaler, *s)).collect()
}
