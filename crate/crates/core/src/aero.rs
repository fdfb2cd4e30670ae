//! Exponential atmosphere, aerodynamic coefficient fits, force build-up,
//! stagnation heating and the path-constraint checks.
//!
//! The coefficient polynomials take Mach number and angles in radians.

use serde::{Deserialize, Serialize};

use crate::dynamics::AeroForces;

pub const SEA_LEVEL_DENSITY: f64 = 1.225;
pub const SCALE_HEIGHT: f64 = 7018.00344;
pub const SPEED_OF_SOUND: f64 = 340.0;
pub const NOSE_RADIUS: f64 = 0.034;
pub const EMISSIVITY: f64 = 0.85;
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

pub const HEATING_LIMIT: f64 = 9.0e6;
pub const DYNAMIC_PRESSURE_LIMIT: f64 = 4.0e6;
pub const LOAD_LIMIT: f64 = 147.15;

const SUTTON_GRAVES: f64 = 1.83e-4;

pub fn density(h: f64) -> f64 {
    SEA_LEVEL_DENSITY * (-h / SCALE_HEIGHT).exp()
}

pub fn mach(speed: f64) -> f64 {
    speed / SPEED_OF_SOUND
}

pub fn mach_with(speed: f64, speed_of_sound: f64) -> f64 {
    speed / speed_of_sound
}

// Mach polynomial coefficients, ascending powers.
const CL_MACH: [f64; 6] = [-0.081929, 0.0470142, -0.00919, 0.000774, -0.0000293, 0.000000412];
const CD_MACH: [f64; 6] = [0.08883096, -0.03339562, 0.005044728, -0.0003658, 0.00001274, -0.00000017];
// C_Y Mach polynomial starts at M^1.
const CY_MACH: [f64; 5] = [-0.29253, 0.054822, -0.0043203, 0.00015495, -0.0000020829];

/// Coefficients of alpha^1..alpha^5, which themselves depend on Mach.
fn cl_alpha_terms(m: f64) -> [f64; 5] {
    [1.07727 - 0.0265 * m, -0.49898 + 0.0019 * m * m, 0.76741107, -4.21373565, 8.02706009]
}

fn cd_alpha_terms(m: f64) -> [f64; 5] {
    [0.183 - 0.00716 * m, -3.587 + 0.0005 * m * m, 59.71887625, -321.68800332, 603.01745298]
}

fn cy_alpha_terms(m: f64) -> [f64; 5] {
    [0.16502903 - 0.01658312 * m, 2.41401 + 0.01516821 * m * m, -70.3554194, 303.723 - 0.2228107 * m * m, -321.59490071]
}

/// Horner evaluation of `c[0] + c[1] x + ...`.
fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// `alpha * (c[0] + c[1] alpha + ...)`, i.e. the alpha^1..alpha^5 block.
fn alpha_block(c: &[f64; 5], alpha: f64) -> f64 {
    alpha * horner(c, alpha)
}

pub fn coeff_cl(m: f64, alpha: f64) -> f64 {
    horner(&CL_MACH, m) + alpha_block(&cl_alpha_terms(m), alpha)
}

pub fn coeff_cd(m: f64, alpha: f64) -> f64 {
    horner(&CD_MACH, m) + alpha_block(&cd_alpha_terms(m), alpha)
}

pub fn coeff_cy(m: f64, alpha: f64, beta: f64) -> f64 {
    (m * horner(&CY_MACH, m) + alpha_block(&cy_alpha_terms(m), alpha)) * beta
}

/// Term-by-term power-sum evaluation of the same fits. Kept as an
/// independent cross-check of the Horner path.
pub mod power_sum {
    use super::*;

    fn sum_powers(c: &[f64], x: f64, first_power: i32) -> f64 {
        c.iter().enumerate().map(|(i, ci)| ci * x.powi(i as i32 + first_power)).sum()
    }

    pub fn coeff_cl(m: f64, alpha: f64) -> f64 {
        sum_powers(&CL_MACH, m, 0) + sum_powers(&cl_alpha_terms(m), alpha, 1)
    }

    pub fn coeff_cd(m: f64, alpha: f64) -> f64 {
        sum_powers(&CD_MACH, m, 0) + sum_powers(&cd_alpha_terms(m), alpha, 1)
    }

    pub fn coeff_cy(m: f64, alpha: f64, beta: f64) -> f64 {
        sum_powers(&CY_MACH, m, 1) * beta + sum_powers(&cy_alpha_terms(m), alpha, 1) * beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AeroCoefficients {
    pub cl: f64,
    pub cd: f64,
    pub cy: f64,
}

impl AeroCoefficients {
    pub fn evaluate(m: f64, alpha: f64, beta: f64) -> Self {
        let m_ok = (3.0..=10.0).contains(&m);
        let a_ok = (0.0..=12f64.to_radians() + 1e-12).contains(&alpha);
        if !(m_ok && a_ok) {
            log::trace!("aero fit evaluated outside envelope: M={m:.3} alpha={alpha:.4} rad");
        }
        Self { cl: coeff_cl(m, alpha), cd: coeff_cd(m, alpha), cy: coeff_cy(m, alpha, beta) }
    }
}

pub fn forces(rho: f64, speed: f64, s_ref: f64, c: AeroCoefficients) -> AeroForces {
    let qs = 0.5 * rho * speed * speed * s_ref;
    AeroForces { drag: qs * c.cd, side: qs * c.cy, lift: qs * c.cl }
}

/// Stagnation heating with the wall enthalpy fixed at half the stagnation
/// enthalpy, W/m^2.
pub fn heating_rate(rho: f64, speed: f64) -> f64 {
    SUTTON_GRAVES / NOSE_RADIUS.sqrt() * 0.5 * rho.sqrt() * speed.powi(3)
}

/// Full enthalpy-coupled heating for a given wall temperature (reference
/// only; the constraint path uses [`heating_rate`]).
pub fn heating_rate_coupled(rho: f64, speed: f64, wall_temp: f64) -> f64 {
    let h_w = 1000.0 * wall_temp;
    let h_o = 0.5 * speed * speed + 2.3e5;
    SUTTON_GRAVES / NOSE_RADIUS.sqrt() * (1.0 - h_w / h_o) * rho.sqrt() * speed.powi(3)
}

/// Radiative-equilibrium wall temperature, K.
pub fn wall_temperature(qdot: f64) -> f64 {
    (qdot / (EMISSIVITY * STEFAN_BOLTZMANN)).powf(0.25)
}

pub fn dynamic_pressure(rho: f64, speed: f64) -> f64 {
    0.5 * rho * speed * speed
}

/// Body-from-wind direction cosine matrix: sideslip about z, then angle of
/// attack about y.
///
/// ```text
/// | ca*cb  -ca*sb  -sa |
/// |  sb     cb      0  |
/// | sa*cb  -sa*sb   ca |
/// ```
pub fn body_from_wind(alpha: f64, beta: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    [[ca * cb, -ca * sb, -sa], [sb, cb, 0.0], [sa * cb, -sa * sb, ca]]
}

/// Normal load magnitude from the body y/z force components, m/s^2.
pub fn load(f: AeroForces, alpha: f64, beta: f64, mass: f64) -> f64 {
    let c = body_from_wind(alpha, beta);
    let w = [f.drag, f.side, f.lift];
    let fy = c[1][0] * w[0] + c[1][1] * w[1] + c[1][2] * w[2];
    let fz = c[2][0] * w[0] + c[2][1] * w[1] + c[2][2] * w[2];
    fy.hypot(fz) / mass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintKind {
    Heating,
    DynamicPressure,
    Load,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 3] = [Self::Heating, Self::DynamicPressure, Self::Load];

    /// Short label used in summaries.
    pub fn label(self) -> &'static str {
        match self {
            Self::Heating => "HT",
            Self::DynamicPressure => "DP",
            Self::Load => "Load",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLimits {
    pub heating_rate: f64,
    pub dynamic_pressure: f64,
    pub load: f64,
}

impl ConstraintLimits {
    pub fn value(&self, kind: ConstraintKind) -> f64 {
        match kind {
            ConstraintKind::Heating => self.heating_rate,
            ConstraintKind::DynamicPressure => self.dynamic_pressure,
            ConstraintKind::Load => self.load,
        }
    }
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self { heating_rate: HEATING_LIMIT, dynamic_pressure: DYNAMIC_PRESSURE_LIMIT, load: LOAD_LIMIT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintStatus {
    pub heating_rate: f64,
    pub wall_temp: f64,
    pub dynamic_pressure: f64,
    pub load: f64,
    pub violated: Option<ConstraintKind>,
}

impl ConstraintStatus {
    /// Evaluates the three constraints; the first exceeded limit in the order
    /// heating, dynamic pressure, load is reported.
    pub fn evaluate(heating_rate: f64, dynamic_pressure: f64, load: f64, limits: &ConstraintLimits) -> Self {
        let violated = if heating_rate > limits.heating_rate {
            Some(ConstraintKind::Heating)
        } else if dynamic_pressure > limits.dynamic_pressure {
            Some(ConstraintKind::DynamicPressure)
        } else if load > limits.load {
            Some(ConstraintKind::Load)
        } else {
            None
        };
        Self { heating_rate, wall_temp: wall_temperature(heating_rate), dynamic_pressure, load, violated }
    }

    pub fn value(&self, kind: ConstraintKind) -> f64 {
        match kind {
            ConstraintKind::Heating => self.heating_rate,
            ConstraintKind::DynamicPressure => self.dynamic_pressure,
            ConstraintKind::Load => self.load,
        }
    }
}

/// Constraint status for a vehicle flying at `speed` through air of density
/// `rho` with the given forces and incidence.
pub fn check_constraints(
    rho: f64,
    speed: f64,
    forces: AeroForces,
    alpha: f64,
    beta: f64,
    mass: f64,
    limits: &ConstraintLimits,
) -> ConstraintStatus {
    ConstraintStatus::evaluate(
        heating_rate(rho, speed),
        dynamic_pressure(rho, speed),
        load(forces, alpha, beta, mass),
        limits,
    )
}
