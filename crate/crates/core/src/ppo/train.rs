use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::{ACT_DIM, OBS_DIM};
use crate::net::adam::Adam;
use crate::net::checkpoint::{Checkpoint, CheckpointError, TrainerSnapshot};
use crate::net::{ObservationScaler, PolicyNet, ValueNet};

use super::config::RunConfig;
use super::returns::{dual_discount_returns, normalize};
use super::rollout::{collect_batch, episode_seed, EpisodeRollout};
use super::update::{evaluate_policy, kl_servo, predict_values, value_loss_and_grad, ServoState};

pub const METRICS_HEADER: &str = "update,Mean R,SD R,Min R,Max R,Mean Steps,Max Steps,Mean Miss,SD Miss,Max Miss,\
Terminal Reward Rate,Violation Rate,KL,Policy Passes,Clip,LR Policy,LR Value,Value Loss,Clip Fraction,Reverted KL";

/// Warm-up batch that seeds the observation statistics before the first
/// update uses this pseudo update index.
const WARMUP_UPDATE: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMetrics {
    /// Completed updates after this one.
    pub update: u64,
    pub mean_reward: f64,
    pub sd_reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub mean_steps: f64,
    pub max_steps: usize,
    pub mean_miss: f64,
    pub sd_miss: f64,
    pub max_miss: f64,
    pub terminal_reward_rate: f64,
    pub violation_rate: f64,
    /// KL between the collecting and the updated policy.
    pub kl: f64,
    pub policy_passes: usize,
    pub clip: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    /// KL of a pass that went over the limit and was undone, if any.
    pub reverted_kl: Option<f64>,
    /// Update skipped because a gradient was not finite.
    pub skipped: bool,
}

impl UpdateMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.update,
            self.mean_reward,
            self.sd_reward,
            self.min_reward,
            self.max_reward,
            self.mean_steps,
            self.max_steps,
            self.mean_miss,
            self.sd_miss,
            self.max_miss,
            self.terminal_reward_rate,
            self.violation_rate,
            self.kl,
            self.policy_passes,
            self.clip,
            self.lr_policy,
            self.lr_value,
            self.value_loss,
            self.clip_fraction,
            self.reverted_kl.map(|k| k.to_string()).unwrap_or_default()
        )
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub struct Trainer {
    pub run: RunConfig,
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub scaler: ObservationScaler,
    pub policy_adam: Adam,
    pub value_adam: Adam,
    pub servo: ServoState,
    pub lr_value: f64,
    pub update: u64,
    pub seed: u64,
}

impl Trainer {
    pub fn new(run: RunConfig, seed: u64) -> Self {
        let t = &run.training;
        let init_seed = episode_seed(seed, t.policy_seed, u64::MAX - 1);
        let policy = PolicyNet::init(OBS_DIM, ACT_DIM, init_seed);
        let value = ValueNet::init(OBS_DIM, init_seed.wrapping_add(1));
        Self {
            policy_adam: Adam::new(policy.0.params().len()),
            value_adam: Adam::new(value.0.params().len()),
            policy,
            value,
            scaler: ObservationScaler::new(OBS_DIM),
            servo: ServoState { lr_policy: t.lr_policy, clip: t.clip, lr_policy_max: t.lr_policy },
            lr_value: t.lr_value,
            update: 0,
            seed,
            run,
        }
    }

    /// Resumes from a checkpoint. Without saved trainer state the networks
    /// and scaler are reused with fresh optimizer state.
    pub fn from_checkpoint(run: RunConfig, ckpt: Checkpoint, seed: Option<u64>) -> Result<Self, CheckpointError> {
        ckpt.expect_dims(OBS_DIM, ACT_DIM)?;
        let mut t = Self::new(run, seed.unwrap_or(0));
        t.policy = ckpt.policy;
        t.value = ckpt.value;
        t.scaler = ckpt.scaler;
        t.policy_adam = Adam::new(t.policy.0.params().len());
        t.value_adam = Adam::new(t.value.0.params().len());
        if let Some(s) = ckpt.trainer {
            t.seed = seed.unwrap_or(s.seed);
            t.update = s.update;
            t.servo = ServoState { lr_policy: s.lr_policy, clip: s.clip, lr_policy_max: s.lr_policy_max };
            t.lr_value = s.lr_value;
            t.policy_adam = s.policy_adam;
            t.value_adam = s.value_adam;
        }
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            policy: self.policy.clone(),
            value: self.value.clone(),
            scaler: self.scaler.clone(),
            trainer: Some(TrainerSnapshot {
                seed: self.seed,
                update: self.update,
                lr_policy: self.servo.lr_policy,
                lr_value: self.lr_value,
                clip: self.servo.clip,
                lr_policy_max: self.servo.lr_policy_max,
                policy_adam: self.policy_adam.clone(),
                value_adam: self.value_adam.clone(),
            }),
        }
    }

    pub fn batch_seeds(&self, update: u64) -> Vec<u64> {
        (0..self.run.training.episodes_per_batch as u64).map(|i| episode_seed(self.seed, update, i)).collect()
    }

    fn absorb_observations(&mut self, episodes: &[EpisodeRollout]) {
        for ep in episodes {
            for obs in ep.raw_obs.chunks_exact(OBS_DIM) {
                self.scaler.update(obs);
            }
        }
    }

    /// Fills the observation statistics once before the first update.
    pub fn warm_up(&mut self) {
        if self.scaler.count > 0 {
            return;
        }
        let seeds = self.batch_seeds(WARMUP_UPDATE);
        let episodes = collect_batch(&self.run.scenario, &self.policy, &self.scaler, &seeds);
        self.absorb_observations(&episodes);
    }

    pub fn collect(&self) -> Vec<EpisodeRollout> {
        collect_batch(&self.run.scenario, &self.policy, &self.scaler, &self.batch_seeds(self.update))
    }

    /// Collects one batch and performs one update.
    pub fn step(&mut self) -> UpdateMetrics {
        self.warm_up();
        let episodes = self.collect();
        self.update_with(episodes)
    }

    pub fn update_with(&mut self, episodes: Vec<EpisodeRollout>) -> UpdateMetrics {
        let p = self.run.training.clone();
        let returns: Vec<Vec<f64>> = episodes
            .iter()
            .map(|e| dual_discount_returns(&e.running, &e.bonus, p.gamma_shaping, p.gamma_terminal))
            .collect();
        let values = predict_values(&self.value, &episodes);
        let mut flat: Vec<f64> =
            returns.iter().zip(&values).flat_map(|(g, v)| g.iter().zip(v).map(|(g, v)| g - v)).collect();
        if p.normalize_advantages {
            normalize(&mut flat);
        }
        let mut advantages = Vec::with_capacity(episodes.len());
        let mut at = 0;
        for e in &episodes {
            advantages.push(flat[at..at + e.len()].to_vec());
            at += e.len();
        }

        let stop = p.kl_stop_factor * p.kl_target;
        let limit = p.kl_limit_factor * p.kl_target;
        let mut skipped = false;
        let mut passes = 0;
        let mut eval = evaluate_policy(&self.policy, &episodes, &advantages, self.servo.clip, p.entropy_coef, true);
        let mut kl = eval.kl;
        let mut clip_fraction = eval.clip_fraction;
        let mut rejected_kl = None;
        for pass in 0..p.policy_passes {
            let grad = eval.grad.take().expect("gradient requested");
            if grad.iter().any(|g| !g.is_finite()) {
                skipped = true;
                break;
            }
            let saved = (self.policy.0.params().to_vec(), self.policy_adam.clone());
            self.policy_adam.apply(self.policy.0.params_mut(), &grad, self.servo.lr_policy);
            let more = pass + 1 < p.policy_passes;
            let next = evaluate_policy(&self.policy, &episodes, &advantages, self.servo.clip, p.entropy_coef, more);
            if p.revert_over_limit && !(next.kl <= limit) {
                self.policy.0.set_params(&saved.0).expect("same shape");
                self.policy_adam = saved.1;
                rejected_kl = Some(next.kl);
                break;
            }
            passes += 1;
            kl = next.kl;
            clip_fraction = next.clip_fraction;
            eval = next;
            if !(kl <= stop) {
                break;
            }
        }

        let mut value_loss = f64::NAN;
        for pass in 0..p.value_passes {
            let (loss, grad) = value_loss_and_grad(&self.value, &episodes, &returns);
            if pass == 0 {
                value_loss = loss;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                skipped = true;
                break;
            }
            self.value_adam.apply(self.value.0.params_mut(), &grad, self.lr_value);
        }

        self.servo = kl_servo(&p, self.servo, rejected_kl.unwrap_or(kl));
        self.absorb_observations(&episodes);
        self.update += 1;

        let started: Vec<&EpisodeRollout> = episodes.iter().filter(|e| !e.is_empty()).collect();
        let rewards: Vec<f64> = started.iter().map(|e| e.total_reward()).collect();
        let misses: Vec<f64> = started.iter().filter_map(|e| e.terminal.as_ref().map(|t| t.miss_distance)).collect();
        let steps: Vec<f64> = started.iter().map(|e| e.len() as f64).collect();
        let n = started.len().max(1) as f64;
        let (mean_reward, sd_reward) = mean_sd(&rewards);
        let (mean_miss, sd_miss) = mean_sd(&misses);
        UpdateMetrics {
            update: self.update,
            mean_reward,
            sd_reward,
            min_reward: rewards.iter().copied().fold(f64::INFINITY, f64::min),
            max_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_steps: mean_sd(&steps).0,
            max_steps: started.iter().map(|e| e.len()).max().unwrap_or(0),
            mean_miss,
            sd_miss,
            max_miss: misses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            terminal_reward_rate: started.iter().filter(|e| e.got_bonus()).count() as f64 / n,
            violation_rate: started.iter().filter(|e| e.violation).count() as f64 / n,
            kl,
            policy_passes: passes,
            clip: self.servo.clip,
            lr_policy: self.servo.lr_policy,
            lr_value: self.lr_value,
            value_loss,
            clip_fraction,
            reverted_kl: rejected_kl,
            skipped,
        }
    }
}

pub fn checkpoint_path(dir: &Path, update: u64) -> PathBuf {
    dir.join(format!("ckpt_{update:06}.bin"))
}

/// Runs `updates` more updates, appending to `metrics.csv` and writing
/// checkpoints into `out` every `checkpoint_every` updates and at the end.
/// Returns the metrics rows and the checkpoint paths written.
pub fn train(
    trainer: &mut Trainer,
    updates: u64,
    out: &Path,
    mut on_update: impl FnMut(&UpdateMetrics),
) -> Result<(Vec<UpdateMetrics>, Vec<PathBuf>), TrainError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| TrainError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let metrics_path = out.join("metrics.csv");
    let fresh = !metrics_path.exists();
    let mut metrics_file =
        OpenOptions::new().create(true).append(true).open(&metrics_path).map_err(io(&metrics_path))?;
    if fresh {
        writeln!(metrics_file, "{METRICS_HEADER}").map_err(io(&metrics_path))?;
    }
    let mut rows = Vec::new();
    let mut written = Vec::new();
    let every = trainer.run.training.checkpoint_every;
    for i in 0..updates {
        let m = trainer.step();
        writeln!(metrics_file, "{}", m.csv_row()).map_err(io(&metrics_path))?;
        metrics_file.flush().map_err(io(&metrics_path))?;
        on_update(&m);
        if m.update % every == 0 || i + 1 == updates {
            let path = checkpoint_path(out, m.update);
            trainer.checkpoint().save(&path)?;
            written.push(path);
        }
        rows.push(m);
    }
    if updates == 0 {
        let path = checkpoint_path(out, trainer.update);
        trainer.checkpoint().save(&path)?;
        written.push(path);
    }
    Ok((rows, written))
}
