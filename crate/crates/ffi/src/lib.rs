//! C ABI over the engagement environment and guidance policies.
//!
//! Handles are opaque heap objects created by `hsw_*_new`/`hsw_*_load` and
//! released with the matching `hsw_*_free`. Every fallible call returns an
//! [`HswStatus`]; on failure [`hsw_last_error_message`] describes the error
//! for the calling thread. Handles are not thread-safe; use one per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hsw_core::config::ScenarioConfig;
use hsw_core::env::{ActionCommand, EnvError, Environment, Observation, Termination, ACT_DIM, OBS_DIM};
use hsw_core::eval::{PnGains, PnGuidance};
use hsw_core::guidance::{Guidance, NeuralGuidance};
use hsw_core::net::checkpoint::Checkpoint;
use hsw_core::ppo::RunConfig;

/// Observation length.
pub const HSW_OBS_DIM: usize = 11;
/// Action length.
pub const HSW_ACT_DIM: usize = 3;

const _: () = assert!(HSW_OBS_DIM == OBS_DIM && HSW_ACT_DIM == ACT_DIM);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HswStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Config = 4,
    Checkpoint = 5,
    /// The episode has ended; call `hsw_env_reset`.
    EpisodeDone = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HswTermination {
    None = 0,
    ClosingVelocity = 1,
    GroundImpact = 2,
    TimeLimit = 3,
    ConstraintViolation = 4,
    DynamicsFailure = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HswStepResult {
    pub observation: [f64; HSW_OBS_DIM],
    pub reward: f64,
    pub done: bool,
    pub termination: HswTermination,
    /// Episode time after the step, s.
    pub time_s: f64,
    /// Closest approach; NaN until the episode ends.
    pub miss_distance_m: f64,
    /// Speed at the end of the episode; NaN until it ends.
    pub terminal_speed_mps: f64,
}

/// Opaque environment handle.
pub struct HswEnv {
    env: Environment,
}

enum PolicyKind {
    Network(NeuralGuidance<'static>),
    Pn(PnGuidance),
}

/// Opaque policy handle.
pub struct HswPolicy {
    kind: PolicyKind,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Fail(HswStatus, String);

impl Fail {
    fn new(status: HswStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

fn guarded(f: impl FnOnce() -> Result<(), Fail>) -> HswStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HswStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HswStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a Path>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(HswStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(Some(Path::new(s)))
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, Fail> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => RunConfig::load(p).map(|r| r.scenario).map_err(|e| {
            let status = match e {
                hsw_core::config::ConfigError::Io { .. } => HswStatus::Io,
                _ => HswStatus::Config,
            };
            Fail::new(status, e)
        }),
    }
}

fn non_null<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: callers pass handles obtained from this library or null
    unsafe { p.as_mut() }.ok_or_else(|| Fail::new(HswStatus::NullPointer, format!("{what} is null")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hsw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn hsw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an environment from a config file, or the default scenario when
/// `config_path` is null.
///
/// # Safety
/// `config_path` must be null or a valid NUL-terminated string; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsw_env_new(config_path: *const c_char, out: *mut *mut HswEnv) -> HswStatus {
    guarded(|| {
        let out = non_null(out, "out")?;
        *out = ptr::null_mut();
        let cfg = load_scenario(path_arg(config_path, "config_path")?)?;
        *out = Box::into_raw(Box::new(HswEnv { env: Environment::new(cfg) }));
        Ok(())
    })
}

/// Starts an episode and writes the first observation into `obs_out`
/// (`HSW_OBS_DIM` doubles).
///
/// # Safety
/// `env` must come from `hsw_env_new`; `obs_out` must hold `HSW_OBS_DIM` doubles.
#[no_mangle]
pub unsafe extern "C" fn hsw_env_reset(env: *mut HswEnv, seed: u64, obs_out: *mut f64) -> HswStatus {
    guarded(|| {
        let env = non_null(env, "env")?;
        if obs_out.is_null() {
            return Err(Fail::new(HswStatus::NullPointer, "obs_out is null"));
        }
        let obs = env.env.reset(seed).map_err(|e| Fail::new(HswStatus::InvalidArgument, e))?;
        ptr::copy_nonoverlapping(obs.0.as_ptr(), obs_out, OBS_DIM);
        Ok(())
    })
}

/// Advances one guidance period with `action` (`HSW_ACT_DIM` doubles,
/// normalized rate commands).
///
/// # Safety
/// `env` must come from `hsw_env_new`; `action` must hold `HSW_ACT_DIM`
/// doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsw_env_step(env: *mut HswEnv, action: *const f64, out: *mut HswStepResult) -> HswStatus {
    guarded(|| {
        let env = non_null(env, "env")?;
        let out = non_null(out, "out")?;
        if action.is_null() {
            return Err(Fail::new(HswStatus::NullPointer, "action is null"));
        }
        let mut u = [0.0; ACT_DIM];
        ptr::copy_nonoverlapping(action, u.as_mut_ptr(), ACT_DIM);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Fail::new(HswStatus::InvalidArgument, "action has a non-finite component"));
        }
        let step = env.env.step(&ActionCommand(u)).map_err(|e| match e {
            EnvError::EpisodeNotActive => Fail::new(HswStatus::EpisodeDone, e),
            other => Fail::new(HswStatus::InvalidArgument, other),
        })?;
        let (termination, miss, speed) = match &step.info.terminal {
            None => (HswTermination::None, f64::NAN, f64::NAN),
            Some(t) => (
                match t.reason {
                    Termination::ClosingVelocity => HswTermination::ClosingVelocity,
                    Termination::GroundImpact => HswTermination::GroundImpact,
                    Termination::TimeLimit => HswTermination::TimeLimit,
                    Termination::ConstraintViolation(_) => HswTermination::ConstraintViolation,
                    Termination::DynamicsFailure => HswTermination::DynamicsFailure,
                },
                t.miss_distance,
                t.terminal_speed,
            ),
        };
        *out = HswStepResult {
            observation: step.observation.0,
            reward: step.reward,
            done: step.done,
            termination,
            time_s: step.info.time,
            miss_distance_m: miss,
            terminal_speed_mps: speed,
        };
        Ok(())
    })
}

/// Releases an environment. Null is ignored.
///
/// # Safety
/// `env` must be null or come from `hsw_env_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hsw_env_free(env: *mut HswEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Loads a trained policy checkpoint. The policy acts with its mean unless
/// `stochastic` is set.
///
/// # Safety
/// `checkpoint_path` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsw_policy_load(
    checkpoint_path: *const c_char,
    stochastic: bool,
    out: *mut *mut HswPolicy,
) -> HswStatus {
    guarded(|| {
        let out = non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(checkpoint_path, "checkpoint_path")?
            .ok_or_else(|| Fail::new(HswStatus::NullPointer, "checkpoint_path is null"))?;
        let ckpt = Checkpoint::load(path).map_err(|e| {
            let status = match e {
                hsw_core::net::checkpoint::CheckpointError::Io { .. } => HswStatus::Io,
                _ => HswStatus::Checkpoint,
            };
            Fail::new(status, e)
        })?;
        ckpt.expect_dims(OBS_DIM, ACT_DIM).map_err(|e| Fail::new(HswStatus::Checkpoint, e))?;
        let g = NeuralGuidance::owned(ckpt.policy, ckpt.scaler, stochastic);
        *out = Box::into_raw(Box::new(HswPolicy { kind: PolicyKind::Network(g) }));
        Ok(())
    })
}

/// Creates the proportional-navigation baseline for the vehicle in
/// `config_path` (default vehicle when null).
///
/// # Safety
/// `config_path` must be null or a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsw_policy_pn(config_path: *const c_char, out: *mut *mut HswPolicy) -> HswStatus {
    guarded(|| {
        let out = non_null(out, "out")?;
        *out = ptr::null_mut();
        let cfg = load_scenario(path_arg(config_path, "config_path")?)?;
        let g = PnGuidance::new(PnGains::for_vehicle(&cfg.vehicle));
        *out = Box::into_raw(Box::new(HswPolicy { kind: PolicyKind::Pn(g) }));
        Ok(())
    })
}

/// Clears recurrent state; call at the start of every episode with the
/// episode seed.
///
/// # Safety
/// `policy` must come from `hsw_policy_load` or `hsw_policy_pn`.
#[no_mangle]
pub unsafe extern "C" fn hsw_policy_reset(policy: *mut HswPolicy, seed: u64) -> HswStatus {
    guarded(|| {
        let p = non_null(policy, "policy")?;
        match &mut p.kind {
            PolicyKind::Network(g) => g.reset(seed),
            PolicyKind::Pn(g) => g.reset(seed),
        }
        Ok(())
    })
}

/// Maps an observation (`HSW_OBS_DIM` doubles) to an action
/// (`HSW_ACT_DIM` doubles).
///
/// # Safety
/// `policy` must be a live handle; `obs` and `action_out` must hold the
/// stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn hsw_policy_act(policy: *mut HswPolicy, obs: *const f64, action_out: *mut f64) -> HswStatus {
    guarded(|| {
        let p = non_null(policy, "policy")?;
        if obs.is_null() || action_out.is_null() {
            return Err(Fail::new(HswStatus::NullPointer, "obs or action_out is null"));
        }
        let mut o = [0.0; OBS_DIM];
        ptr::copy_nonoverlapping(obs, o.as_mut_ptr(), OBS_DIM);
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Fail::new(HswStatus::InvalidArgument, "observation has a non-finite component"));
        }
        let obs = Observation(o);
        let u = match &mut p.kind {
            PolicyKind::Network(g) => g.act(&obs),
            PolicyKind::Pn(g) => g.act(&obs),
        };
        ptr::copy_nonoverlapping(u.0.as_ptr(), action_out, ACT_DIM);
        Ok(())
    })
}

/// Releases a policy. Null is ignored.
///
/// # Safety
/// `policy` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hsw_policy_free(policy: *mut HswPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}
