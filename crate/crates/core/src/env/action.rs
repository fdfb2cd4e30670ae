use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ACT_DIM;

/// Raw policy output for the bank, alpha and sideslip rate channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionCommand(pub [f64; ACT_DIM]);

/// Rates produced by the action pipeline, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProcessedAction {
    /// Scaled and clipped command (what the guidance asked for).
    pub commanded: [f64; ACT_DIM],
    /// After failure scaling and actuator noise; drives the lag filters.
    pub applied: [f64; ACT_DIM],
}

/// Scale by the rate limits, clip, apply failed-channel effectiveness loss and
/// add Gaussian actuator noise.
pub fn process_action<R: Rng + ?Sized>(
    u: &ActionCommand,
    rate_limits: &[f64; ACT_DIM],
    failure_bias: &[f64; ACT_DIM],
    noise_std: f64,
    rng: &mut R,
) -> ProcessedAction {
    let mut out = ProcessedAction::default();
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite noise std");
    for ch in 0..ACT_DIM {
        let max = rate_limits[ch];
        let c = (u.0[ch] * max).clamp(-max, max);
        out.commanded[ch] = c;
        let n = noise.sample(rng);
        out.applied[ch] = c * (1.0 + failure_bias[ch]) + n;
    }
    out
}
