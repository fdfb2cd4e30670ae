//! Clipped-surrogate policy gradient, value regression and the KL servo.

use rayon::prelude::*;

use crate::env::ACT_DIM;
use crate::net::{log_prob, log_prob_grad, PolicyNet, ValueNet};

use super::config::TrainingParams;
use super::rollout::EpisodeRollout;

/// Per-step surrogate `min(p A, clip(p, 1-eps, 1+eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    unclipped.min(clipped)
}

/// Derivative of the surrogate with respect to the ratio.
pub fn clipped_surrogate_slope(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if ratio * advantage <= clipped {
        advantage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    /// Mean clipped surrogate over all steps.
    pub surrogate: f64,
    /// Mean unclipped surrogate.
    pub unclipped: f64,
    /// Non-negative estimate `mean((p - 1) - ln p)` of KL(old || new) under
    /// old-policy samples, with `p = p_new / p_old`.
    pub kl: f64,
    /// Fraction of steps where the clipped branch is binding.
    pub clip_fraction: f64,
    pub ratios: Vec<f64>,
    /// Gradient of the loss `-surrogate - entropy_coef * entropy`.
    pub grad: Option<Vec<f64>>,
}

struct EpisodePolicyTerms {
    surrogate: f64,
    unclipped: f64,
    kl: f64,
    clipped: usize,
    ratios: Vec<f64>,
    grad: Option<Vec<f64>>,
}

/// Evaluates the surrogate objective at the current policy parameters.
/// `advantages[e][k]` pairs with step `k` of episode `e`.
pub fn evaluate_policy(
    policy: &PolicyNet,
    episodes: &[EpisodeRollout],
    advantages: &[Vec<f64>],
    clip: f64,
    entropy_coef: f64,
    want_grad: bool,
) -> PolicyEval {
    let net = &policy.0;
    let n_params = net.params().len();
    let log_std = net.log_std().expect("policy has log-std").to_vec();
    let ls_range = net.layout().log_std.clone().expect("policy has log-std");
    let total: usize = episodes.iter().map(|e| e.len()).sum();
    let inv_n = 1.0 / total.max(1) as f64;

    let terms: Vec<EpisodePolicyTerms> = episodes
        .par_iter()
        .zip(advantages)
        .map(|(ep, adv)| {
            let mut t = EpisodePolicyTerms {
                surrogate: 0.0,
                unclipped: 0.0,
                kl: 0.0,
                clipped: 0,
                ratios: Vec::with_capacity(ep.len()),
                grad: None,
            };
            if ep.is_empty() {
                return t;
            }
            let cache = net.forward_episode(&ep.scaled_obs).expect("rollout shapes match policy");
            let mut d_out = vec![0.0; ep.len() * ACT_DIM];
            let mut d_ls = [0.0; ACT_DIM];
            let mut dm = [0.0; ACT_DIM];
            let mut dl = [0.0; ACT_DIM];
            for k in 0..ep.len() {
                let mean = cache.output(k, ACT_DIM);
                let u = &ep.actions[k * ACT_DIM..(k + 1) * ACT_DIM];
                let lp = log_prob(mean, &log_std, u);
                let ratio = (lp - ep.log_probs[k]).exp();
                let a = adv[k];
                t.ratios.push(ratio);
                t.surrogate += clipped_surrogate(ratio, a, clip);
                t.unclipped += ratio * a;
                t.kl += (ratio - 1.0) - (lp - ep.log_probs[k]);
                let slope = clipped_surrogate_slope(ratio, a, clip);
                if slope == 0.0 && a != 0.0 {
                    t.clipped += 1;
                }
                if want_grad && slope != 0.0 {
                    log_prob_grad(mean, &log_std, u, &mut dm, &mut dl);
                    let coef = -inv_n * slope * ratio;
                    for i in 0..ACT_DIM {
                        d_out[k * ACT_DIM + i] = coef * dm[i];
                        d_ls[i] += coef * dl[i];
                    }
                }
            }
            if want_grad {
                let mut g = vec![0.0; n_params];
                net.backward(&cache, &d_out, &mut g);
                for (gi, d) in g[ls_range.clone()].iter_mut().zip(d_ls) {
                    *gi += d;
                }
                t.grad = Some(g);
            }
            t
        })
        .collect();

    let mut eval = PolicyEval {
        surrogate: 0.0,
        unclipped: 0.0,
        kl: 0.0,
        clip_fraction: 0.0,
        ratios: Vec::with_capacity(total),
        grad: want_grad.then(|| vec![0.0; n_params]),
    };
    let mut clipped = 0;
    for t in terms {
        eval.surrogate += t.surrogate;
        eval.unclipped += t.unclipped;
        eval.kl += t.kl;
        clipped += t.clipped;
        eval.ratios.extend(t.ratios);
        if let (Some(acc), Some(g)) = (eval.grad.as_mut(), t.grad) {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
    eval.surrogate *= inv_n;
    eval.unclipped *= inv_n;
    eval.kl *= inv_n;
    eval.clip_fraction = clipped as f64 * inv_n;
    if let Some(g) = eval.grad.as_mut() {
        // entropy of a diagonal Gaussian grows one-for-one with each log-std
        for gi in &mut g[ls_range] {
            *gi -= entropy_coef;
        }
    }
    eval
}

/// Value predictions for every step of every episode.
pub fn predict_values(value: &ValueNet, episodes: &[EpisodeRollout]) -> Vec<Vec<f64>> {
    episodes
        .par_iter()
        .map(|ep| {
            if ep.is_empty() {
                return Vec::new();
            }
            value.0.forward_episode(&ep.scaled_obs).expect("rollout shapes match value net").outputs
        })
        .collect()
}

/// `0.5 * mean((V - G)^2)` and its parameter gradient.
pub fn value_loss_and_grad(value: &ValueNet, episodes: &[EpisodeRollout], returns: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let net = &value.0;
    let n_params = net.params().len();
    let total: usize = episodes.iter().map(|e| e.len()).sum();
    let inv_n = 1.0 / total.max(1) as f64;
    let parts: Vec<(f64, Vec<f64>)> = episodes
        .par_iter()
        .zip(returns)
        .map(|(ep, g)| {
            let mut grad = vec![0.0; n_params];
            if ep.is_empty() {
                return (0.0, grad);
            }
            let cache = net.forward_episode(&ep.scaled_obs).expect("rollout shapes match value net");
            let d: Vec<f64> = cache.outputs.iter().zip(g).map(|(v, r)| (v - r) * inv_n).collect();
            let loss = cache.outputs.iter().zip(g).map(|(v, r)| 0.5 * (v - r).powi(2)).sum::<f64>() * inv_n;
            net.backward(&cache, &d, &mut grad);
            (loss, grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoState {
    pub lr_policy: f64,
    pub clip: f64,
    /// Upper bound for the learning rate (its initial value).
    pub lr_policy_max: f64,
}

/// Adjusts the policy learning rate and clip range toward the KL target.
pub fn kl_servo(p: &TrainingParams, s: ServoState, kl: f64) -> ServoState {
    let mut out = s;
    if !(kl <= p.servo_high_factor * p.kl_target) {
        out.lr_policy *= p.lr_decrease;
        out.clip = (out.clip * p.clip_decrease).max(p.clip_min);
    } else if kl < p.servo_low_factor * p.kl_target {
        out.lr_policy = (out.lr_policy * p.lr_increase).min(s.lr_policy_max);
        out.clip = (out.clip * p.clip_increase).min(p.clip_max);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipped_branch_selected() {
        assert!((clipped_surrogate(1.3, 2.0, 0.2) - 2.4).abs() < 1e-12);
        assert_eq!(clipped_surrogate_slope(1.3, 2.0, 0.2), 0.0);
        assert!((clipped_surrogate(0.7, -1.0, 0.2) + 0.8).abs() < 1e-12);
        assert_eq!(clipped_surrogate_slope(1.0, 3.0, 0.2), 3.0);
        // negative advantage with a large ratio stays unclipped
        assert_eq!(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
    }

    #[test]
    fn servo_rules() {
        let p = TrainingParams::default();
        let s = ServoState { lr_policy: 1e-4, clip: 0.2, lr_policy_max: 1e-4 };
        assert_eq!(kl_servo(&p, s, p.kl_target), s);
        let high = kl_servo(&p, s, 0.01);
        assert_eq!(high.lr_policy, 0.5e-4);
        assert!((high.clip - 0.18).abs() < 1e-15);
        let mut low = high;
        for _ in 0..20 {
            low = kl_servo(&p, low, 0.0);
        }
        assert_eq!(low.lr_policy, 1e-4);
        assert_eq!(low.clip, 0.3);
        let mut tight = s;
        for _ in 0..100 {
            tight = kl_servo(&p, tight, 1.0);
        }
        assert_eq!(tight.clip, 0.01);
        assert_eq!(kl_servo(&p, s, f64::NAN).lr_policy, 0.5e-4);
    }
}
