//! Engagement-frame geometry: spherical/Cartesian velocity conversions, the
//! initial vehicle placement and line-of-sight kinematics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("zero-speed velocity has no defined heading")]
    ZeroSpeed,
    #[error("initial altitude {h_init} m must lie in (0, {r_init}) m")]
    BadInitialGeometry { r_init: f64, h_init: f64 },
    #[error("vehicle and target positions coincide")]
    CoincidentPositions,
}

/// Speed, flight path angle and heading of a velocity vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalVel {
    pub speed: f64,
    pub gamma: f64,
    pub psi: f64,
}

impl SphericalVel {
    pub fn new(speed: f64, gamma: f64, psi: f64) -> Self {
        Self { speed, gamma, psi }
    }
}

/// Cartesian to spherical velocity.
///
/// `atan2(0, 0)` is taken as 0, so a purely vertical velocity reports a
/// heading of zero.
pub fn c2s(v: Vec3) -> Result<SphericalVel, FrameError> {
    let speed = v.norm();
    if !(speed > 0.0) {
        return Err(FrameError::ZeroSpeed);
    }
    let gamma = (v.z / speed).clamp(-1.0, 1.0).asin();
    let psi = if v.x == 0.0 && v.y == 0.0 { 0.0 } else { v.y.atan2(v.x) };
    Ok(SphericalVel { speed, gamma, psi })
}

pub fn s2c(s: SphericalVel) -> Vec3 {
    let (sg, cg) = s.gamma.sin_cos();
    let (sp, cp) = s.psi.sin_cos();
    Vec3::new(s.speed * cg * cp, s.speed * cg * sp, s.speed * sg)
}

/// Vehicle start position from slant range, altitude and azimuth.
pub fn initial_position(r_init: f64, h_init: f64, phi_init: f64) -> Result<Vec3, FrameError> {
    if !(h_init >= 0.0 && h_init < r_init) {
        return Err(FrameError::BadInitialGeometry { r_init, h_init });
    }
    let theta = (h_init / r_init).asin();
    let (sp, cp) = phi_init.sin_cos();
    let ground = r_init * theta.cos();
    Ok(Vec3::new(ground * cp, ground * sp, h_init))
}

/// Heading of the horizontal projection of `v`; `atan2(0, 0) = 0`.
pub fn horizontal_heading(v: Vec3) -> f64 {
    if v.x == 0.0 && v.y == 0.0 {
        0.0
    } else {
        v.y.atan2(v.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosKinematics {
    /// Unit line of sight from vehicle to target.
    pub lambda: Vec3,
    /// Line-of-sight rotation vector, rad/s.
    pub omega: Vec3,
    pub range: f64,
    pub closing_velocity: f64,
}

pub fn los_kinematics(r_m: Vec3, v_m: Vec3, r_t: Vec3, v_t: Vec3) -> Result<LosKinematics, FrameError> {
    let r_tm = r_t - r_m;
    let v_tm = v_t - v_m;
    let r2 = r_tm.norm_squared();
    if !(r2 > 0.0) {
        return Err(FrameError::CoincidentPositions);
    }
    let range = r2.sqrt();
    Ok(LosKinematics {
        lambda: r_tm / range,
        omega: r_tm.cross(v_tm) / r2,
        range,
        closing_velocity: -r_tm.dot(v_tm) / range,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn c2s_axis_aligned() {
        let s = c2s(Vec3::new(1000.0, 0.0, 0.0)).unwrap();
        assert_eq!(s, SphericalVel::new(1000.0, 0.0, 0.0));
    }

    #[test]
    fn c2s_vertical_uses_zero_heading() {
        let s = c2s(Vec3::new(0.0, 0.0, 500.0)).unwrap();
        assert_eq!(s.speed, 500.0);
        assert_relative_eq!(s.gamma, FRAC_PI_2);
        assert_eq!(s.psi, 0.0);
    }

    #[test]
    fn c2s_rejects_zero_speed() {
        assert_eq!(c2s(Vec3::ZERO), Err(FrameError::ZeroSpeed));
    }

    #[test]
    fn s2c_cases() {
        assert_eq!(s2c(SphericalVel::new(1.0, 0.0, 0.0)), Vec3::new(1.0, 0.0, 0.0));
        let up = s2c(SphericalVel::new(2.0, FRAC_PI_2, 0.7));
        assert!(up.x.abs() < 1e-15 && up.y.abs() < 1e-15);
        assert_eq!(up.z, 2.0);
        // direct evaluation of the spherical-to-Cartesian map
        let v = s2c(SphericalVel::new(3000.0, (-5.0f64).to_radians(), 10.0f64.to_radians()));
        assert!((v.x - 2943.1808).abs() < 1e-3);
        assert!((v.y - 518.9622).abs() < 1e-3);
        assert!((v.z + 261.4672).abs() < 1e-3);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v = Vec3::new(
                rng.gen_range(-3000.0..3000.0),
                rng.gen_range(-3000.0..3000.0),
                rng.gen_range(-3000.0..3000.0),
            );
            let back = s2c(c2s(v).unwrap());
            assert!((back - v).norm() <= 1e-12 * v.norm(), "{v:?} -> {back:?}");
        }
    }

    #[test]
    fn initial_position_cases() {
        let p = initial_position(200_000.0, 25_000.0, 0.0).unwrap();
        assert!((p.x - 198_431.348).abs() < 1e-3);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 25_000.0);
        assert_eq!(initial_position(5.0, 0.0, 0.0).unwrap(), Vec3::new(5.0, 0.0, 0.0));
        let q = initial_position(40_000.0, 10_000.0, 0.3).unwrap();
        assert_relative_eq!(q.norm(), 40_000.0, max_relative = 1e-14);
        assert!(initial_position(1000.0, 1000.0, 0.0).is_err());
    }

    #[test]
    fn los_cases() {
        let los =
            los_kinematics(Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0), Vec3::new(1000.0, 0.0, 0.0), Vec3::ZERO).unwrap();
        assert_eq!(los.lambda, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(los.omega, Vec3::ZERO);
        assert_eq!(los.closing_velocity, 100.0);
        assert_eq!(los.range, 1000.0);

        let los =
            los_kinematics(Vec3::ZERO, Vec3::ZERO, Vec3::new(1000.0, 0.0, 0.0), Vec3::new(0.0, 100.0, 0.0)).unwrap();
        assert_relative_eq!(los.omega.z, 0.1);
        assert_eq!(los.closing_velocity, 0.0);

        assert!(los_kinematics(Vec3::UNIT_Z, Vec3::ZERO, Vec3::UNIT_Z, Vec3::ZERO).is_err());
    }

    #[test]
    fn omega_orthogonal_to_los() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut draw = || Vec3::new(rng.gen_range(-1e5..1e5), rng.gen_range(-1e5..1e5), rng.gen_range(0.0..3e4));
            let (rm, rt) = (draw(), draw());
            let (vm, vt) = (draw() * 0.03, draw() * 1e-3);
            let los = los_kinematics(rm, vm, rt, vt).unwrap();
            let r_tm = rt - rm;
            let rel = los.omega.dot(r_tm).abs() / (los.omega.norm() * r_tm.norm()).max(f64::MIN_POSITIVE);
            assert!(rel <= 1e-9);
            assert!((los.lambda.norm() - 1.0).abs() <= 1e-12);
        }
    }
}
