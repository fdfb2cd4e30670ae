//! Point-mass equations of motion in spherical velocity form, the first-order
//! actuator lag, target kinematics and a classical RK4 integrator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{s2c, SphericalVel};
use crate::vec3::Vec3;

pub const GRAVITY: f64 = 9.81;

/// Base integration step, s.
pub const BASE_DT: f64 = 0.1;
/// Range below which the integration step is refined, m.
pub const FINE_RANGE: f64 = 1200.0;
/// Number of fine substeps per base step once inside [`FINE_RANGE`].
pub const FINE_FACTOR: usize = 300;

/// Channel indices shared by actions, lag filters and rate limits.
pub const BANK: usize = 0;
pub const ALPHA: usize = 1;
pub const BETA: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("flight path angle too close to vertical (cos gamma = {0:e})")]
    VerticalFlight(f64),
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("actuator time constant must be positive, got {0}")]
    BadTimeConstant(f64),
    #[error("non-finite derivative component at index {0}")]
    NonFinite(usize),
    #[error("integration step must be positive, got {0}")]
    BadStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    /// Cartesian velocity, kept equal to `s2c(speed, gamma, psi)`.
    pub velocity: Vec3,
    pub speed: f64,
    pub gamma: f64,
    pub psi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    /// Lag filter outputs (bank, alpha, beta rates), rad/s.
    pub lag: [f64; 3],
    pub t: f64,
}

impl VehicleState {
    pub fn spherical(&self) -> SphericalVel {
        SphericalVel::new(self.speed, self.gamma, self.psi)
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    pub fn refresh_velocity(&mut self) {
        self.velocity = s2c(self.spherical());
    }
}

/// Time derivative of the vehicle state (excluding the lag filters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRates {
    pub position: Vec3,
    pub speed: f64,
    pub gamma: f64,
    pub psi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
}

/// Aerodynamic forces in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AeroForces {
    pub drag: f64,
    pub side: f64,
    pub lift: f64,
}

/// Gravity opposes the flight-path component of velocity (`-g sin(gamma)`).
pub fn vehicle_derivatives(
    state: &VehicleState,
    forces: AeroForces,
    mass: f64,
    rates: [f64; 3],
) -> Result<VehicleRates, DynamicsError> {
    let v = state.speed;
    if !(v > 0.0) {
        return Err(DynamicsError::NonPositiveSpeed(v));
    }
    let (sg, cg) = state.gamma.sin_cos();
    if cg.abs() < 1e-6 {
        return Err(DynamicsError::VerticalFlight(cg));
    }
    let (sn, cn) = state.nu.sin_cos();
    let AeroForces { drag, side, lift } = forces;
    Ok(VehicleRates {
        position: s2c(state.spherical()),
        speed: -drag / mass - GRAVITY * sg,
        gamma: (lift * cn - side * sn) / (mass * v) - GRAVITY * cg / v,
        psi: (lift * sn + side * cn) / (mass * v * cg),
        alpha: rates[ALPHA],
        beta: rates[BETA],
        nu: rates[BANK],
    })
}

pub fn actuator_lag_derivatives(filter: [f64; 3], command: [f64; 3], tau: f64) -> Result<[f64; 3], DynamicsError> {
    if !(tau > 0.0) {
        return Err(DynamicsError::BadTimeConstant(tau));
    }
    Ok(std::array::from_fn(|i| (command[i] - filter[i]) / tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// Returns (position rate, velocity rate).
pub fn target_derivatives(target: &TargetState) -> (Vec3, Vec3) {
    (target.velocity, target.acceleration)
}

/// Scales the target velocity back to `max_speed` if it is exceeded,
/// preserving direction.
pub fn clip_target_speed(target: &mut TargetState, max_speed: f64) {
    let s = target.velocity.norm();
    if s > max_speed {
        target.velocity = target.velocity * (max_speed / s);
    }
}

/// One classical fourth-order Runge-Kutta step of an autonomous system.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &[f64; N], dt: f64) -> Result<[f64; N], DynamicsError>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N], DynamicsError>,
{
    if !(dt > 0.0) {
        return Err(DynamicsError::BadStep(dt));
    }
    let mut eval = |y: &[f64; N]| -> Result<[f64; N], DynamicsError> {
        let d = f(y)?;
        if let Some(i) = d.iter().position(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite(i));
        }
        Ok(d)
    };
    let offset = |k: &[f64; N], h: f64| -> [f64; N] { std::array::from_fn(|i| x[i] + h * k[i]) };

    let k1 = eval(x)?;
    let k2 = eval(&offset(&k1, 0.5 * dt))?;
    let k3 = eval(&offset(&k2, 0.5 * dt))?;
    let k4 = eval(&offset(&k3, dt))?;
    Ok(std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}
