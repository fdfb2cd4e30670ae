use serde::{Deserialize, Serialize};

use crate::config::RewardWeights;
use crate::vec3::Vec3;

use super::{TerminalInfo, Termination, ACT_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub shaping: f64,
    pub control: f64,
    pub bonus: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.shaping + self.control + self.bonus
    }

    /// Per-step part (shaping plus control effort).
    pub fn running(&self) -> f64 {
        self.shaping + self.control
    }
}

pub fn shaping_reward(w: &RewardWeights, omega: Vec3) -> f64 {
    w.shaping_scale * (-omega.norm_squared() / (w.omega_sigma_rps * w.omega_sigma_rps)).exp()
}

/// Control penalty on the Euclidean norm of the commanded rates normalized by
/// their limits.
pub fn control_reward(w: &RewardWeights, commanded: &[f64; ACT_DIM], limits: &[f64; ACT_DIM]) -> f64 {
    let n2: f64 = commanded.iter().zip(limits).map(|(c, m)| (c / m).powi(2)).sum();
    w.control_penalty * n2.sqrt()
}

/// Terminal bonus: below ground, inside the miss radius and faster than the
/// speed floor. Episodes cut short by a constraint violation earn nothing.
pub fn bonus_reward(w: &RewardWeights, terminal: Option<&TerminalInfo>) -> f64 {
    match terminal {
        Some(t)
            if !matches!(t.reason, Termination::ConstraintViolation(_) | Termination::DynamicsFailure)
                && t.altitude < 0.0
                && t.miss_distance < w.miss_limit_m
                && t.terminal_speed > w.speed_limit_mps =>
        {
            w.bonus
        }
        _ => 0.0,
    }
}

pub fn reward(
    w: &RewardWeights,
    omega: Vec3,
    commanded: &[f64; ACT_DIM],
    limits: &[f64; ACT_DIM],
    terminal: Option<&TerminalInfo>,
) -> RewardComponents {
    RewardComponents {
        shaping: shaping_reward(w, omega),
        control: control_reward(w, commanded, limits),
        bonus: bonus_reward(w, terminal),
    }
}
