//! Diagonal Gaussian action distribution.

use rand::Rng;
use rand_distr::StandardNormal;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

pub fn log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(u)
        .map(|((m, ls), x)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_TAU
        })
        .sum()
}

/// Gradient of `log_prob` with respect to the mean and the log-std.
pub fn log_prob_grad(mean: &[f64], log_std: &[f64], u: &[f64], d_mean: &mut [f64], d_log_std: &mut [f64]) {
    for i in 0..mean.len() {
        let inv = (-log_std[i]).exp();
        let z = (u[i] - mean[i]) * inv;
        d_mean[i] = z * inv;
        d_log_std[i] = z * z - 1.0;
    }
}

pub fn sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let n: f64 = rng.sample(StandardNormal);
            m + ls.exp() * n
        })
        .collect()
}
