//! Closed-loop guidance laws that map observations to rate commands.

use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionCommand, Observation, ACT_DIM};
use crate::net::{sample, ObservationScaler, PolicyNet};

pub trait Guidance {
    /// Clears any internal state at the start of an episode.
    fn reset(&mut self, seed: u64);
    fn act(&mut self, obs: &Observation) -> ActionCommand;
}

/// Recurrent network policy; acts with its mean unless `stochastic`.
pub struct NeuralGuidance<'a> {
    policy: Cow<'a, PolicyNet>,
    scaler: Cow<'a, ObservationScaler>,
    hidden: Vec<f64>,
    scaled: Vec<f64>,
    stochastic: bool,
    rng: ChaCha8Rng,
}

impl<'a> NeuralGuidance<'a> {
    pub fn new(policy: &'a PolicyNet, scaler: &'a ObservationScaler, stochastic: bool) -> Self {
        Self::from_cow(Cow::Borrowed(policy), Cow::Borrowed(scaler), stochastic)
    }

    fn from_cow(policy: Cow<'a, PolicyNet>, scaler: Cow<'a, ObservationScaler>, stochastic: bool) -> Self {
        Self {
            hidden: policy.0.zero_hidden(),
            scaled: vec![0.0; scaler.dim()],
            policy,
            scaler,
            stochastic,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl NeuralGuidance<'static> {
    pub fn owned(policy: PolicyNet, scaler: ObservationScaler, stochastic: bool) -> Self {
        Self::from_cow(Cow::Owned(policy), Cow::Owned(scaler), stochastic)
    }
}

impl Guidance for NeuralGuidance<'_> {
    fn reset(&mut self, seed: u64) {
        self.hidden.iter_mut().for_each(|v| *v = 0.0);
        self.rng = ChaCha8Rng::seed_from_u64(crate::ppo::action_seed(seed));
    }

    fn act(&mut self, obs: &Observation) -> ActionCommand {
        self.scaler.scale_into(&obs.0, &mut self.scaled);
        let (mean, h) = self.policy.0.step(&self.scaled, &self.hidden).expect("policy matches observation size");
        self.hidden = h;
        let u = if self.stochastic {
            sample(&mean, self.policy.0.log_std().expect("policy has log-std"), &mut self.rng)
        } else {
            mean
        };
        ActionCommand(std::array::from_fn(|i| u[i]))
    }
}

/// Zero rates every step.
pub struct NullGuidance;

impl Guidance for NullGuidance {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, _obs: &Observation) -> ActionCommand {
        ActionCommand([0.0; ACT_DIM])
    }
}
