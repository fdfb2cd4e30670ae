//! Proportional navigation with a simple bank-to-turn allocation.
//!
//! The commanded acceleration `N * v_c * (Ω × λ)` plus gravity compensation
//! is resolved normal to the estimated velocity direction. For a stationary
//! target the vehicle velocity follows from the observation as
//! `v_c λ - r (Ω × λ)`. Bank steers the lift vector toward the demand, the
//! angle-of-attack rate is proportional to the error between the demanded
//! and nominal-model lift acceleration (expressed as an angle-of-attack
//! error), and sideslip is driven to zero.

use serde::{Deserialize, Serialize};

use crate::aero;
use crate::config::VehicleParams;
use crate::dynamics::GRAVITY;
use crate::env::draw::wrap_pi;
use crate::env::{ActionCommand, Observation};
use crate::guidance::Guidance;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnGains {
    pub navigation_constant: f64,
    /// Bank rate per radian of bank error, 1/s.
    pub bank: f64,
    /// Angle-of-attack rate per radian of angle-of-attack error, 1/s.
    pub alpha: f64,
    /// Sideslip rate per radian of sideslip, 1/s.
    pub beta: f64,
    /// Demanded lift acceleration is capped here, m/s^2.
    pub max_accel: f64,
    /// Nominal vehicle used to turn acceleration into angle of attack.
    pub mass_kg: f64,
    pub reference_area_m2: f64,
    pub speed_of_sound_mps: f64,
    pub alpha_max: f64,
    /// Bank travel limit, rad. The bank never wraps through it.
    pub bank_limit: f64,
    /// Rate limits (bank, alpha, sideslip) used to normalize the command, rad/s.
    pub rate_limits: [f64; 3],
}

impl Default for PnGains {
    fn default() -> Self {
        Self::for_vehicle(&VehicleParams::default())
    }
}

impl PnGains {
    pub fn for_vehicle(v: &VehicleParams) -> Self {
        Self {
            navigation_constant: 4.0,
            bank: 2.0,
            alpha: 2.0,
            beta: 2.0,
            max_accel: 0.8 * aero::LOAD_LIMIT,
            mass_kg: v.mass_kg,
            reference_area_m2: v.reference_area_m2,
            speed_of_sound_mps: v.speed_of_sound_mps,
            alpha_max: v.alpha_max_deg.to_radians(),
            bank_limit: v.bank_limit_deg.to_radians(),
            rate_limits: v.rate_limits(),
        }
    }
}

pub fn pn_acceleration(obs: &Observation, n: f64) -> Vec3 {
    obs.omega().cross(obs.lambda()) * (n * obs.closing_velocity())
}

/// Vehicle velocity implied by the LOS kinematics of a stationary target.
pub fn velocity_estimate(obs: &Observation) -> Vec3 {
    let l = obs.lambda();
    l * obs.closing_velocity() - obs.omega().cross(l) * obs.range()
}

/// Velocity-normal frame: (vertical normal, horizontal normal).
fn normal_frame(v: Vec3) -> Option<(Vec3, Vec3)> {
    let d = v.normalized()?;
    let en = (Vec3::UNIT_Z - d * Vec3::UNIT_Z.dot(d)).normalized()?;
    Some((en, en.cross(d)))
}

/// Angle of attack whose nominal lift gives `accel`, clamped to `[0, alpha_max]`.
fn alpha_for_accel(accel: f64, altitude: f64, speed: f64, g: &PnGains) -> f64 {
    let qs = 0.5 * aero::density(altitude.max(0.0)) * speed * speed * g.reference_area_m2;
    let m = aero::mach_with(speed, g.speed_of_sound_mps);
    let lift = |a: f64| qs * aero::coeff_cl(m, a) / g.mass_kg;
    let (mut lo, mut hi) = (0.0, g.alpha_max);
    if lift(lo) >= accel {
        return lo;
    }
    if lift(hi) <= accel {
        return hi;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if lift(mid) < accel {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Shortest turn from `nu` to `target` that stays inside `[-limit, limit]`.
fn bank_error(target: f64, nu: f64, limit: f64) -> f64 {
    use std::f64::consts::TAU;
    let err = wrap_pi(target - nu);
    if (nu + err).abs() <= limit + 1e-9 {
        err
    } else {
        err - TAU.copysign(err)
    }
}

/// Rate command in rad/s for (bank, alpha, sideslip).
pub fn pn_rates(obs: &Observation, g: &PnGains) -> [f64; 3] {
    let beta_rate = -g.beta * obs.beta();
    if obs.omega() == Vec3::ZERO {
        return [0.0, 0.0, beta_rate];
    }
    let v = velocity_estimate(obs);
    let Some((en, eh)) = normal_frame(v) else {
        return [0.0, 0.0, beta_rate];
    };
    let demand = pn_acceleration(obs, g.navigation_constant) + Vec3::UNIT_Z * GRAVITY;
    let (an, ah) = (demand.dot(en), demand.dot(eh));
    let nu = obs.bank();
    let bank_rate = g.bank * bank_error(ah.atan2(an), nu, g.bank_limit);
    let lift_dir = en * nu.cos() + eh * nu.sin();
    let along = demand.dot(lift_dir).clamp(0.0, g.max_accel);
    let altitude = -obs.range() * obs.lambda().z;
    let alpha_des = alpha_for_accel(along, altitude, v.norm(), g);
    [bank_rate, g.alpha * (alpha_des - obs.alpha()), beta_rate]
}

pub fn pn_command(obs: &Observation, g: &PnGains) -> ActionCommand {
    let r = pn_rates(obs, g);
    ActionCommand(std::array::from_fn(|i| r[i] / g.rate_limits[i]))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PnGuidance {
    pub gains: PnGains,
}

impl PnGuidance {
    pub fn new(gains: PnGains) -> Self {
        Self { gains }
    }
}

impl Guidance for PnGuidance {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, obs: &Observation) -> ActionCommand {
        pn_command(obs, &self.gains)
    }
}
