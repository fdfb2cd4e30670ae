//! Episodic engagement environment.
//!
//! One [`Environment`] owns its scenario, its random stream and the ground
//! truth vehicle and target states. `reset` draws an episode, `step` applies
//! one guidance command and integrates a full guidance period.

pub mod action;
pub mod draw;
pub mod reward;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{self, AeroCoefficients, ConstraintKind, ConstraintLimits, ConstraintStatus};
use crate::config::{ConstraintMode, ScenarioConfig, TerminationMode};
use crate::dynamics::{
    actuator_lag_derivatives, clip_target_speed, rk4_step, target_derivatives, vehicle_derivatives, AeroForces,
    DynamicsError, TargetState, VehicleState, BASE_DT, FINE_FACTOR, FINE_RANGE,
};
use crate::frames::{los_kinematics, FrameError, LosKinematics};
use crate::vec3::Vec3;

pub use action::{process_action, ActionCommand, ProcessedAction};
pub use draw::{EpisodeDraw, ModelFactors};
pub use reward::RewardComponents;
pub use trace::TraceRow;

pub const OBS_DIM: usize = 11;
pub const ACT_DIM: usize = 3;

/// Sensor vector: LOS unit vector, LOS rate, closing speed, range, alpha,
/// sideslip, bank (in that order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub const LAMBDA: usize = 0;
    pub const OMEGA: usize = 3;
    pub const CLOSING_VELOCITY: usize = 6;
    pub const RANGE: usize = 7;
    pub const ALPHA: usize = 8;
    pub const BETA: usize = 9;
    pub const BANK: usize = 10;

    pub fn lambda(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn omega(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn closing_velocity(&self) -> f64 {
        self.0[Self::CLOSING_VELOCITY]
    }

    pub fn range(&self) -> f64 {
        self.0[Self::RANGE]
    }

    pub fn alpha(&self) -> f64 {
        self.0[Self::ALPHA]
    }

    pub fn beta(&self) -> f64 {
        self.0[Self::BETA]
    }

    pub fn bank(&self) -> f64 {
        self.0[Self::BANK]
    }
}

/// Unbiased observation scaled componentwise by the sensor factors.
pub fn make_observation(
    vehicle: &VehicleState,
    target: &TargetState,
    factors: &[f64; OBS_DIM],
) -> Result<Observation, FrameError> {
    let los = los_kinematics(vehicle.position, vehicle.velocity, target.position, target.velocity)?;
    let raw = [
        los.lambda.x,
        los.lambda.y,
        los.lambda.z,
        los.omega.x,
        los.omega.y,
        los.omega.z,
        los.closing_velocity,
        los.range,
        vehicle.alpha,
        vehicle.beta,
        vehicle.nu,
    ];
    Ok(Observation(std::array::from_fn(|i| raw[i] * factors[i])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ClosingVelocity,
    GroundImpact,
    TimeLimit,
    ConstraintViolation(ConstraintKind),
    DynamicsFailure,
}

impl Termination {
    pub fn label(&self) -> String {
        match self {
            Self::ClosingVelocity => "closing_velocity".into(),
            Self::GroundImpact => "ground_impact".into(),
            Self::TimeLimit => "time_limit".into(),
            Self::ConstraintViolation(k) => format!("violation_{}", k.label()),
            Self::DynamicsFailure => "dynamics_failure".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalInfo {
    pub reason: Termination,
    /// Closest approach over the terminal integration step, m.
    pub miss_distance: f64,
    /// Vehicle position relative to the target at closest approach.
    pub miss_vector: Vec3,
    pub terminal_speed: f64,
    pub altitude: f64,
    pub time: f64,
    pub vehicle_position: Vec3,
    pub target_position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivertEvent {
    pub time: f64,
    pub trigger_range: f64,
    pub offset: Vec3,
    /// True when this divert returned to the true target.
    pub to_true_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub time: f64,
    /// Largest heating, dynamic pressure and load seen during the step.
    pub constraints: ConstraintStatus,
    /// First constraint violated during this step, if any.
    pub violation: Option<ConstraintKind>,
    pub diverts: Vec<DivertEvent>,
    pub commanded_rates: [f64; ACT_DIM],
    pub terminal: Option<TerminalInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished or unstarted episode")]
    EpisodeNotActive,
    #[error("invalid scenario: {0}")]
    Geometry(#[from] FrameError),
}

/// Closest approach between two sampled relative positions, assuming the
/// relative motion is linear between them. Returns (distance, point).
pub fn closest_approach(prev: Vec3, next: Vec3) -> (f64, Vec3) {
    let d = next - prev;
    let dd = d.norm_squared();
    let s = if dd > 0.0 { (-prev.dot(d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    let p = prev + d * s;
    (p.norm(), p)
}

/// Per-episode aerodynamic model with the drawn perturbations folded in.
#[derive(Debug, Clone, Copy)]
struct AeroModel {
    factors: ModelFactors,
    mass: f64,
    s_ref: f64,
    speed_of_sound: f64,
}

impl AeroModel {
    fn evaluate(&self, altitude: f64, speed: f64, alpha: f64, beta: f64) -> (f64, AeroForces) {
        let rho = self.factors.density * aero::density(altitude);
        let m = aero::mach_with(speed, self.speed_of_sound);
        let c = AeroCoefficients::evaluate(m, alpha, beta);
        let c = AeroCoefficients {
            cl: c.cl * self.factors.lift,
            cd: c.cd * self.factors.drag,
            cy: c.cy * self.factors.side,
        };
        (rho, aero::forces(rho, speed, self.s_ref, c))
    }

    fn constraints(&self, v: &VehicleState, limits: &ConstraintLimits) -> ConstraintStatus {
        let (rho, f) = self.evaluate(v.altitude(), v.speed, v.alpha, v.beta);
        aero::check_constraints(rho, v.speed, f, v.alpha, v.beta, self.mass, limits)
    }
}

type VehicleVec = [f64; 12];

fn pack(v: &VehicleState) -> VehicleVec {
    [
        v.position.x,
        v.position.y,
        v.position.z,
        v.speed,
        v.gamma,
        v.psi,
        v.alpha,
        v.beta,
        v.nu,
        v.lag[0],
        v.lag[1],
        v.lag[2],
    ]
}

fn unpack(x: &VehicleVec, t: f64) -> VehicleState {
    VehicleState {
        position: Vec3::new(x[0], x[1], x[2]),
        velocity: Vec3::ZERO,
        speed: x[3],
        gamma: x[4],
        psi: x[5],
        alpha: x[6],
        beta: x[7],
        nu: x[8],
        lag: [x[9], x[10], x[11]],
        t,
    }
}

fn advance_target(target: &TargetState, dt: f64, max_speed: f64) -> TargetState {
    let x = [
        target.position.x,
        target.position.y,
        target.position.z,
        target.velocity.x,
        target.velocity.y,
        target.velocity.z,
    ];
    let a = target.acceleration;
    let y = rk4_step(
        |s| {
            let t = TargetState {
                position: Vec3::new(s[0], s[1], s[2]),
                velocity: Vec3::new(s[3], s[4], s[5]),
                acceleration: a,
            };
            let (dp, dv) = target_derivatives(&t);
            Ok([dp.x, dp.y, dp.z, dv.x, dv.y, dv.z])
        },
        &x,
        dt,
    )
    .expect("target kinematics are finite");
    let mut out =
        TargetState { position: Vec3::new(y[0], y[1], y[2]), velocity: Vec3::new(y[3], y[4], y[5]), acceleration: a };
    clip_target_speed(&mut out, max_speed);
    out
}

pub struct Environment {
    cfg: ScenarioConfig,
    rate_limits: [f64; ACT_DIM],
    limits: ConstraintLimits,
    rng: ChaCha8Rng,
    draw: Option<EpisodeDraw>,
    model: AeroModel,
    vehicle: VehicleState,
    target: TargetState,
    /// Real target kinematics while an evasion chain points elsewhere.
    true_target: TargetState,
    sensor_factors: [f64; OBS_DIM],
    next_divert: usize,
    fine: bool,
    active: bool,
    steps: usize,
    trace: Option<Vec<TraceRow>>,
    last_status: ConstraintStatus,
}

impl Environment {
    pub fn new(cfg: ScenarioConfig) -> Self {
        let rate_limits = cfg.vehicle.rate_limits();
        let limits = cfg.episode.limits();
        let model = AeroModel {
            factors: ModelFactors::default(),
            mass: cfg.vehicle.mass_kg,
            s_ref: cfg.vehicle.reference_area_m2,
            speed_of_sound: cfg.vehicle.speed_of_sound_mps,
        };
        let blank = unpack(&[0.0; 12], 0.0);
        Self {
            cfg,
            rate_limits,
            limits,
            rng: ChaCha8Rng::seed_from_u64(0),
            draw: None,
            model,
            vehicle: blank,
            target: TargetState::default(),
            true_target: TargetState::default(),
            sensor_factors: [1.0; OBS_DIM],
            next_divert: 0,
            fine: false,
            active: false,
            steps: 0,
            trace: None,
            last_status: ConstraintStatus::default(),
        }
    }

    /// Record a [`TraceRow`] per guidance step and per divert.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn rate_limits(&self) -> [f64; ACT_DIM] {
        self.rate_limits
    }

    pub fn vehicle(&self) -> &VehicleState {
        &self.vehicle
    }

    pub fn target(&self) -> &TargetState {
        &self.target
    }

    pub fn draw(&self) -> Option<&EpisodeDraw> {
        self.draw.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRow>> {
        self.trace.as_mut().map(std::mem::take)
    }

    pub fn los(&self) -> Result<LosKinematics, FrameError> {
        los_kinematics(self.vehicle.position, self.vehicle.velocity, self.target.position, self.target.velocity)
    }

    /// Starts a new episode drawn from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = draw::draw_episode(&self.cfg, &mut self.rng)?;
        self.model.factors = draw.factors;
        self.model.mass = self.cfg.vehicle.mass_kg * draw.factors.mass;
        self.model.s_ref = self.cfg.vehicle.reference_area_m2 * draw.factors.area;
        self.vehicle = draw.vehicle;
        self.target = draw.target;
        self.true_target = draw.target;
        self.sensor_factors = draw.sensor_factors;
        self.next_divert = 0;
        self.fine = false;
        self.steps = 0;
        self.active = true;
        self.last_status = self.model.constraints(&self.vehicle, &self.limits);
        self.draw = Some(draw);
        let obs = make_observation(&self.vehicle, &self.target, &self.sensor_factors)?;
        if let Some(trace) = self.trace.as_mut() {
            trace.clear();
            let los = los_kinematics(
                self.vehicle.position,
                self.vehicle.velocity,
                self.target.position,
                self.target.velocity,
            )?;
            trace.push(TraceRow::new(&self.vehicle, &self.target, &self.last_status, &los, 0.0, "reset".into()));
        }
        Ok(obs)
    }

    fn vehicle_rhs(&self, x: &VehicleVec, applied: &[f64; ACT_DIM]) -> Result<VehicleVec, DynamicsError> {
        let s = unpack(x, 0.0);
        let (_, f) = self.model.evaluate(s.position.z, s.speed, s.alpha, s.beta);
        let d = vehicle_derivatives(&s, f, self.model.mass, s.lag)?;
        let dl = actuator_lag_derivatives(s.lag, *applied, self.cfg.vehicle.actuator_tau_s)?;
        Ok([
            d.position.x,
            d.position.y,
            d.position.z,
            d.speed,
            d.gamma,
            d.psi,
            d.alpha,
            d.beta,
            d.nu,
            dl[0],
            dl[1],
            dl[2],
        ])
    }

    fn integrate(&mut self, dt: f64, applied: &[f64; ACT_DIM]) -> Result<(), DynamicsError> {
        let x = pack(&self.vehicle);
        let y = rk4_step(|s| self.vehicle_rhs(s, applied), &x, dt)?;
        let v = &self.cfg.vehicle;
        let mut next = unpack(&y, self.vehicle.t + dt);
        next.alpha = next.alpha.clamp(v.alpha_min_deg.to_radians(), v.alpha_max_deg.to_radians());
        let beta_lim = v.sideslip_limit_deg.to_radians();
        next.beta = next.beta.clamp(-beta_lim, beta_lim);
        let bank_lim = v.bank_limit_deg.to_radians();
        next.nu = next.nu.clamp(-bank_lim, bank_lim);
        next.psi = draw::wrap_pi(next.psi);
        if !(next.speed > 0.0) {
            return Err(DynamicsError::NonPositiveSpeed(next.speed));
        }
        next.refresh_velocity();
        self.vehicle = next;
        let max_speed = self.cfg.target.max_speed_mps;
        self.target = advance_target(&self.target, dt, max_speed);
        if !self.draw.as_ref().is_some_and(|d| d.diverts.ends_on_true_target) {
            self.true_target = self.target;
        } else {
            self.true_target = advance_target(&self.true_target, dt, max_speed);
        }
        Ok(())
    }

    fn maybe_divert(&mut self, range: f64) -> Option<DivertEvent> {
        let draw = self.draw.as_ref()?;
        let trigger = *draw.diverts.triggers.get(self.next_divert)?;
        if range >= trigger {
            return None;
        }
        let is_last = self.next_divert + 1 == draw.diverts.triggers.len();
        let to_true = draw.diverts.ends_on_true_target && is_last;
        self.next_divert += 1;
        let before = self.target.position;
        if to_true {
            self.target = self.true_target;
        } else {
            let offset = draw::divert_offset(&mut self.rng, self.cfg.divert.fraction, trigger);
            let motion = draw::draw_target_motion(&mut self.rng, &self.cfg.target, before + offset);
            self.target = motion;
        }
        Some(DivertEvent {
            time: self.vehicle.t,
            trigger_range: trigger,
            offset: self.target.position - before,
            to_true_target: to_true,
        })
    }

    fn terminal(&self, reason: Termination, prev_rel: Vec3) -> TerminalInfo {
        let rel = self.vehicle.position - self.target.position;
        let (miss_distance, miss_vector) = match reason {
            Termination::ClosingVelocity | Termination::GroundImpact => closest_approach(prev_rel, rel),
            _ => (rel.norm(), rel),
        };
        TerminalInfo {
            reason,
            miss_distance,
            miss_vector,
            terminal_speed: self.vehicle.speed,
            altitude: self.vehicle.altitude(),
            time: self.vehicle.t,
            vehicle_position: self.vehicle.position,
            target_position: self.target.position,
        }
    }

    /// Applies one guidance command and integrates one guidance period.
    pub fn step(&mut self, action: &ActionCommand) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::EpisodeNotActive);
        }
        let failure_bias = self.draw.as_ref().map(|d| d.failure_bias).unwrap_or([0.0; 3]);
        let noise_std = self.cfg.actuator.noise_std_dps.to_radians();
        let processed = process_action(action, &self.rate_limits, &failure_bias, noise_std, &mut self.rng);
        if self.cfg.sensor.redraw_each_step {
            self.sensor_factors = draw::sensor_factors(&mut self.rng, self.cfg.sensor.scale_factor_error);
        }

        let mut peak = ConstraintStatus::default();
        let mut violation = None;
        let mut diverts = Vec::new();
        let mut terminal = None;
        let terminate_on_violation = self.cfg.episode.constraints == ConstraintMode::TerminateOnViolation;

        'period: for _ in 0..self.cfg.episode.substeps() {
            let (n_sub, dt) = if self.fine { (FINE_FACTOR, BASE_DT / FINE_FACTOR as f64) } else { (1, BASE_DT) };
            for _ in 0..n_sub {
                let prev_rel = self.vehicle.position - self.target.position;
                if self.integrate(dt, &processed.applied).is_err() {
                    terminal = Some(self.terminal(Termination::DynamicsFailure, prev_rel));
                    break 'period;
                }
                let status = self.model.constraints(&self.vehicle, &self.limits);
                peak.heating_rate = peak.heating_rate.max(status.heating_rate);
                peak.dynamic_pressure = peak.dynamic_pressure.max(status.dynamic_pressure);
                peak.load = peak.load.max(status.load);
                if violation.is_none() {
                    violation = status.violated;
                }
                self.last_status = status;

                let los = match self.los() {
                    Ok(l) => l,
                    Err(_) => {
                        terminal = Some(self.terminal(Termination::ClosingVelocity, prev_rel));
                        break 'period;
                    }
                };
                let reason = match self.cfg.episode.termination {
                    TerminationMode::ClosingVelocity if los.closing_velocity < 0.0 => {
                        Some(Termination::ClosingVelocity)
                    }
                    TerminationMode::GroundImpact if self.vehicle.altitude() < 0.0 => Some(Termination::GroundImpact),
                    _ => None,
                }
                .or_else(|| match status.violated {
                    Some(kind) if terminate_on_violation => Some(Termination::ConstraintViolation(kind)),
                    _ => None,
                });
                if let Some(reason) = reason {
                    terminal = Some(self.terminal(reason, prev_rel));
                    break 'period;
                }
                if let Some(ev) = self.maybe_divert(los.range) {
                    if let Some(trace) = self.trace.as_mut() {
                        let los = los_kinematics(
                            self.vehicle.position,
                            self.vehicle.velocity,
                            self.target.position,
                            self.target.velocity,
                        )?;
                        let label = if ev.to_true_target { "divert_true_target" } else { "divert" };
                        trace.push(TraceRow::new(&self.vehicle, &self.target, &status, &los, 0.0, label.into()));
                    }
                    diverts.push(ev);
                }
                if !self.fine && los.range < FINE_RANGE {
                    self.fine = true;
                }
            }
        }
        peak.wall_temp = aero::wall_temperature(peak.heating_rate);
        peak.violated = violation;
        self.steps += 1;

        if terminal.is_none() && self.vehicle.t >= self.cfg.episode.time_limit_s - 1e-9 {
            let rel = self.vehicle.position - self.target.position;
            terminal = Some(self.terminal(Termination::TimeLimit, rel));
        }
        let done = terminal.is_some();
        self.active = !done;

        let los = self.los().ok();
        let omega = los.map(|l| l.omega).unwrap_or(Vec3::ZERO);
        let components =
            reward::reward(&self.cfg.reward, omega, &processed.commanded, &self.rate_limits, terminal.as_ref());
        let observation =
            make_observation(&self.vehicle, &self.target, &self.sensor_factors).unwrap_or(Observation([0.0; OBS_DIM]));

        if let Some(trace) = self.trace.as_mut() {
            let los = los.unwrap_or(LosKinematics {
                lambda: Vec3::ZERO,
                omega: Vec3::ZERO,
                range: 0.0,
                closing_velocity: 0.0,
            });
            let event = match &terminal {
                Some(t) => {
                    format!("done:{} miss_m={:.4} speed_mps={:.3}", t.reason.label(), t.miss_distance, t.terminal_speed)
                }
                None => String::new(),
            };
            trace.push(TraceRow::new(&self.vehicle, &self.target, &peak, &los, components.total(), event));
        }

        Ok(StepResult {
            observation,
            reward: components.total(),
            components,
            done,
            info: StepInfo {
                time: self.vehicle.t,
                constraints: peak,
                violation,
                diverts,
                commanded_rates: processed.commanded,
                terminal,
            },
        })
    }
}
