use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::aero::ConstraintStatus;
use crate::dynamics::{TargetState, VehicleState};
use crate::frames::LosKinematics;

pub const TRACE_HEADER: &str = "t,x,y,z,V,gamma,psi,alpha,beta,nu,qdot,q,n,r,v_c,reward,event";

/// One row of a trajectory trace. Angles are stored in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub speed: f64,
    pub gamma_deg: f64,
    pub psi_deg: f64,
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub nu_deg: f64,
    pub heating_rate: f64,
    pub dynamic_pressure: f64,
    pub load: f64,
    pub range: f64,
    pub closing_velocity: f64,
    pub reward: f64,
    pub event: String,
    pub target_x: f64,
    pub target_y: f64,
    pub target_z: f64,
}

impl TraceRow {
    pub fn new(
        v: &VehicleState,
        target: &TargetState,
        c: &ConstraintStatus,
        los: &LosKinematics,
        reward: f64,
        event: String,
    ) -> Self {
        Self {
            t: v.t,
            x: v.position.x,
            y: v.position.y,
            z: v.position.z,
            speed: v.speed,
            gamma_deg: v.gamma.to_degrees(),
            psi_deg: v.psi.to_degrees(),
            alpha_deg: v.alpha.to_degrees(),
            beta_deg: v.beta.to_degrees(),
            nu_deg: v.nu.to_degrees(),
            heating_rate: c.heating_rate,
            dynamic_pressure: c.dynamic_pressure,
            load: c.load,
            range: los.range,
            closing_velocity: los.closing_velocity,
            reward,
            event,
            target_x: target.position.x,
            target_y: target.position.y,
            target_z: target.position.z,
        }
    }
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.4},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e},{:.6},{:.4},{:.4},{:.6},{}",
            r.t,
            r.x,
            r.y,
            r.z,
            r.speed,
            r.gamma_deg,
            r.psi_deg,
            r.alpha_deg,
            r.beta_deg,
            r.nu_deg,
            r.heating_rate,
            r.dynamic_pressure,
            r.load,
            r.range,
            r.closing_velocity,
            r.reward,
            r.event
        )?;
    }
    Ok(())
}
