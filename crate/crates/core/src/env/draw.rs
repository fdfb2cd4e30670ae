//! Per-episode random draws: initial conditions, model perturbations,
//! actuator failures, sensor scale factors and the divert schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{DivertModel, ScenarioConfig, TargetModel};
use crate::dynamics::{TargetState, VehicleState};
use crate::frames::{horizontal_heading, initial_position, s2c, FrameError, SphericalVel};
use crate::vec3::Vec3;

use super::OBS_DIM;

/// Multipliers applied to the nominal aerodynamic and mass model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFactors {
    pub lift: f64,
    pub drag: f64,
    pub side: f64,
    pub density: f64,
    pub mass: f64,
    pub area: f64,
}

impl Default for ModelFactors {
    fn default() -> Self {
        Self { lift: 1.0, drag: 1.0, side: 1.0, density: 1.0, mass: 1.0, area: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivertSchedule {
    /// Trigger ranges, strictly decreasing, m.
    pub triggers: Vec<f64>,
    /// The last trigger returns to the true target (evasion chains).
    pub ends_on_true_target: bool,
}

impl DivertSchedule {
    pub fn none() -> Self {
        Self { triggers: Vec::new(), ends_on_true_target: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDraw {
    pub vehicle: VehicleState,
    pub target: TargetState,
    pub heading_error: f64,
    pub factors: ModelFactors,
    /// Failed actuator channels (bank, alpha, sideslip).
    pub failed: [bool; 3],
    /// Failure bias per channel; commands are scaled by `1 + bias`. Zero for
    /// healthy channels.
    pub failure_bias: [f64; 3],
    pub sensor_factors: [f64; OBS_DIM],
    pub diverts: DivertSchedule,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        // still advance the stream so draws stay aligned across configs
        let _: f64 = rng.gen();
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    uniform(rng, -bound, bound)
}

/// Uniform direction from a normalized `U(-1, 1, 3)` draw; horizontal when
/// `planar`. Degenerate draws are repeated.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, planar: bool) -> Vec3 {
    loop {
        let mut z = Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        if planar {
            z.z = 0.0;
        }
        if z.norm() > 1e-9 {
            return z.normalized().expect("non-zero direction");
        }
    }
}

/// Fresh random velocity and acceleration for a target at `position`.
pub fn draw_target_motion<R: Rng + ?Sized>(rng: &mut R, model: &TargetModel, position: Vec3) -> TargetState {
    let speed = uniform(rng, 0.0, model.max_speed_mps);
    let v_dir = random_direction(rng, model.planar);
    let accel = uniform(rng, 0.0, model.max_accel_mps2);
    let a_dir = random_direction(rng, model.planar);
    TargetState { position, velocity: v_dir * speed, acceleration: a_dir * accel }
}

pub fn sensor_factors<R: Rng + ?Sized>(rng: &mut R, eps: f64) -> [f64; OBS_DIM] {
    std::array::from_fn(|_| 1.0 + symmetric(rng, eps))
}

pub fn draw_divert_schedule<R: Rng + ?Sized>(rng: &mut R, model: &DivertModel) -> DivertSchedule {
    if model.evasion {
        let mut triggers = Vec::new();
        let mut next = model.evasion_start_m;
        while next >= model.evasion_end_m {
            triggers.push(next);
            next -= uniform(rng, model.evasion_min_spacing_m, model.evasion_max_spacing_m);
        }
        return DivertSchedule { triggers, ends_on_true_target: true };
    }
    let happens = rng.gen::<f64>() < model.probability;
    let trigger = uniform(rng, model.trigger_min_m, model.trigger_max_m);
    if happens {
        DivertSchedule { triggers: vec![trigger], ends_on_true_target: false }
    } else {
        DivertSchedule::none()
    }
}

/// Lateral target jump for a divert triggered at `trigger_range`.
pub fn divert_offset<R: Rng + ?Sized>(rng: &mut R, fraction: f64, trigger_range: f64) -> Vec3 {
    let b = fraction * trigger_range;
    Vec3::new(symmetric(rng, b), symmetric(rng, b), 0.0)
}

/// Samples every per-episode quantity in a fixed order.
pub fn draw_episode<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<EpisodeDraw, FrameError> {
    let ib = &cfg.initial;
    let range = uniform(rng, ib.range_min_m, ib.range_max_m);
    let azimuth = uniform(rng, ib.azimuth_min_deg, ib.azimuth_max_deg).to_radians();
    let heading_error = uniform(rng, ib.heading_error_min_deg, ib.heading_error_max_deg).to_radians();
    let altitude = uniform(rng, ib.altitude_min_m, ib.altitude_max_m);
    let speed = uniform(rng, ib.speed_min_mps, ib.speed_max_mps);
    let gamma = uniform(rng, ib.flight_path_min_deg, ib.flight_path_max_deg).to_radians();
    let alpha = uniform(rng, ib.alpha_min_deg, ib.alpha_max_deg).to_radians();
    let nu = uniform(rng, ib.bank_min_deg, ib.bank_max_deg).to_radians();
    let beta = uniform(rng, ib.sideslip_min_deg, ib.sideslip_max_deg).to_radians();

    let position = initial_position(range, altitude, azimuth)?;
    let target = draw_target_motion(rng, &cfg.target, Vec3::ZERO);
    let psi_ideal = horizontal_heading(target.position - position);
    let psi = wrap_pi(psi_ideal + heading_error);
    let vehicle = VehicleState {
        position,
        velocity: s2c(SphericalVel::new(speed, gamma, psi)),
        speed,
        gamma,
        psi,
        alpha,
        beta,
        nu,
        lag: [0.0; 3],
        t: 0.0,
    };

    let p = &cfg.perturbation;
    let factors = ModelFactors {
        lift: 1.0 + symmetric(rng, p.lift_fraction),
        drag: 1.0 + symmetric(rng, p.drag_fraction),
        side: 1.0 + symmetric(rng, p.side_force_fraction),
        density: 1.0 + symmetric(rng, p.density_fraction),
        mass: 1.0 + symmetric(rng, p.mass_fraction),
        area: 1.0 + symmetric(rng, p.area_fraction),
    };

    let a = &cfg.actuator;
    let mut failed = [false; 3];
    let mut failure_bias = [0.0; 3];
    for ch in 0..3 {
        failed[ch] = rng.gen::<f64>() < a.failure_probability;
        let bias = uniform(rng, a.failure_bias_min, a.failure_bias_max);
        if failed[ch] {
            failure_bias[ch] = bias;
        }
    }

    let sensor_factors = sensor_factors(rng, cfg.sensor.scale_factor_error);
    let diverts = draw_divert_schedule(rng, &cfg.divert);

    Ok(EpisodeDraw { vehicle, target, heading_error, factors, failed, failure_bias, sensor_factors, diverts })
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn wrap_pi_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_pi(0.0), 0.0);
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn planar_directions_are_horizontal_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = random_direction(&mut rng, true);
            assert_eq!(d.z, 0.0);
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evasion_chain_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = DivertModel { evasion: true, ..Default::default() };
        for _ in 0..200 {
            let s = draw_divert_schedule(&mut rng, &model);
            assert!(s.ends_on_true_target);
            assert!(s.triggers.len() >= 2);
            assert!(s.triggers[0] <= 150_000.0);
            assert!(*s.triggers.last().unwrap() >= 25_000.0);
            for w in s.triggers.windows(2) {
                assert!(w[0] - w[1] >= 30_000.0);
            }
        }
    }

    #[test]
    fn divert_offset_is_lateral_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let d = divert_offset(&mut rng, 0.05, 100_000.0);
            assert_eq!(d.z, 0.0);
            assert!(d.x.abs() <= 5000.0 && d.y.abs() <= 5000.0);
        }
    }

    #[test]
    fn zero_heading_error_points_at_target() {
        let mut cfg = ScenarioConfig::default();
        cfg.initial.heading_error_min_deg = 0.0;
        cfg.initial.heading_error_max_deg = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let d = draw_episode(&cfg, &mut rng).unwrap();
            let to_target = (d.target.position - d.vehicle.position).horizontal().normalized().unwrap();
            let heading = d.vehicle.velocity.horizontal().normalized().unwrap();
            assert!((to_target.dot(heading) - 1.0).abs() < 1e-12);
        }
    }
}
