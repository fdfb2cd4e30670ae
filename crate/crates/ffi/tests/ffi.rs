use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hsw_core::config::ScenarioConfig;
use hsw_core::env::Environment;
use hsw_core::eval::{run_episode, PnGains, PnGuidance};
use hsw_core::guidance::{Guidance, NeuralGuidance};
use hsw_core::net::checkpoint::Checkpoint;
use hsw_core::net::{ObservationScaler, PolicyNet, ValueNet};
use hsw_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hsw_last_error_message()) }.to_string_lossy().into_owned()
}

fn blank_step() -> HswStepResult {
    HswStepResult {
        observation: [0.0; HSW_OBS_DIM],
        reward: 0.0,
        done: false,
        termination: HswTermination::None,
        time_s: 0.0,
        miss_distance_m: 0.0,
        terminal_speed_mps: 0.0,
    }
}

/// Runs one episode through the C ABI; returns (steps, last step).
unsafe fn run_ffi(env: *mut HswEnv, policy: *mut HswPolicy, seed: u64) -> (usize, HswStepResult) {
    let mut obs = [0.0; HSW_OBS_DIM];
    let mut act = [0.0; HSW_ACT_DIM];
    let mut r = blank_step();
    assert_eq!(hsw_env_reset(env, seed, obs.as_mut_ptr()), HswStatus::Ok);
    assert_eq!(hsw_policy_reset(policy, seed), HswStatus::Ok);
    let mut steps = 0;
    while !r.done {
        assert_eq!(hsw_policy_act(policy, obs.as_ptr(), act.as_mut_ptr()), HswStatus::Ok);
        assert_eq!(hsw_env_step(env, act.as_ptr(), &mut r), HswStatus::Ok);
        obs = r.observation;
        steps += 1;
    }
    (steps, r)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(hsw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(hsw_env_new(ptr::null(), ptr::null_mut()), HswStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut obs = [0.0; HSW_OBS_DIM];
        assert_eq!(hsw_env_reset(ptr::null_mut(), 1, obs.as_mut_ptr()), HswStatus::NullPointer);
        let mut p = ptr::null_mut();
        assert_eq!(hsw_policy_load(ptr::null(), false, &mut p), HswStatus::NullPointer);
        assert!(p.is_null());
        hsw_env_free(ptr::null_mut());
        hsw_policy_free(ptr::null_mut());
    }
}

#[test]
fn pn_episode_matches_library() {
    unsafe {
        let mut env = ptr::null_mut();
        let mut pn = ptr::null_mut();
        assert_eq!(hsw_env_new(ptr::null(), &mut env), HswStatus::Ok);
        assert_eq!(hsw_policy_pn(ptr::null(), &mut pn), HswStatus::Ok);
        let (steps, last) = run_ffi(env, pn, 42);

        let mut lib_env = Environment::new(ScenarioConfig::default());
        let mut g = PnGuidance::new(PnGains::default());
        let rec = run_episode(&mut lib_env, &mut g, 0, 42).unwrap();
        assert_eq!(steps, rec.steps);
        assert_eq!(last.miss_distance_m.to_bits(), rec.miss_distance.to_bits());
        assert_eq!(last.terminal_speed_mps.to_bits(), rec.terminal_speed.to_bits());
        assert_ne!(last.termination, HswTermination::None);

        let mut r = blank_step();
        let act = [0.0; HSW_ACT_DIM];
        assert_eq!(hsw_env_step(env, act.as_ptr(), &mut r), HswStatus::EpisodeDone);
        assert!(!last_error().is_empty());
        hsw_env_free(env);
        hsw_policy_free(pn);
    }
}

#[test]
fn rejects_non_finite_action() {
    unsafe {
        let mut env = ptr::null_mut();
        assert_eq!(hsw_env_new(ptr::null(), &mut env), HswStatus::Ok);
        let mut obs = [0.0; HSW_OBS_DIM];
        assert_eq!(hsw_env_reset(env, 3, obs.as_mut_ptr()), HswStatus::Ok);
        let act = [f64::NAN, 0.0, 0.0];
        let mut r = blank_step();
        assert_eq!(hsw_env_step(env, act.as_ptr(), &mut r), HswStatus::InvalidArgument);
        hsw_env_free(env);
    }
}

#[test]
fn config_errors_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("none.toml").to_str().unwrap()).unwrap();
    let bad_path = dir.path().join("bad.toml");
    std::fs::write(&bad_path, "[vehicle]\nmass_kg = -1.0\n").unwrap();
    let bad = CString::new(bad_path.to_str().unwrap()).unwrap();
    unsafe {
        let mut env = ptr::null_mut();
        assert_eq!(hsw_env_new(missing.as_ptr(), &mut env), HswStatus::Io);
        assert!(last_error().contains("none.toml"));
        assert_eq!(hsw_env_new(bad.as_ptr(), &mut env), HswStatus::Config);
        assert!(last_error().contains("mass_kg"), "{}", last_error());
        assert!(env.is_null());
    }
}

#[test]
fn checkpoint_policy_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let mut scaler = ObservationScaler::new(HSW_OBS_DIM);
    let mut env = Environment::new(ScenarioConfig::default());
    let first = env.reset(5).unwrap();
    scaler.update(&first.0);
    scaler.update(&first.0.map(|v| 1.1 * v + 0.01));
    let ckpt = Checkpoint {
        policy: PolicyNet::init(HSW_OBS_DIM, HSW_ACT_DIM, 9),
        value: ValueNet::init(HSW_OBS_DIM, 10),
        scaler,
        trainer: None,
    };
    let path = dir.path().join("policy.bin");
    ckpt.save(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(hsw_policy_load(cpath.as_ptr(), false, &mut p), HswStatus::Ok);
        assert_eq!(hsw_policy_reset(p, 5), HswStatus::Ok);
        let mut lib = NeuralGuidance::new(&ckpt.policy, &ckpt.scaler, false);
        lib.reset(5);
        let mut obs = first;
        for _ in 0..5 {
            let mut act = [0.0; HSW_ACT_DIM];
            assert_eq!(hsw_policy_act(p, obs.0.as_ptr(), act.as_mut_ptr()), HswStatus::Ok);
            let want = lib.act(&obs);
            assert_eq!(act, want.0);
            obs = env.step(&want).unwrap().observation;
        }
        hsw_policy_free(p);

        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert_eq!(hsw_policy_load(cpath.as_ptr(), false, &mut p), HswStatus::Checkpoint);
        assert!(p.is_null());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hsw.h")).unwrap();
    for name in [
        "hsw_version",
        "hsw_last_error_message",
        "hsw_env_new",
        "hsw_env_reset",
        "hsw_env_step",
        "hsw_env_free",
        "hsw_policy_load",
        "hsw_policy_pn",
        "hsw_policy_reset",
        "hsw_policy_act",
        "hsw_policy_free",
        "HSW_STATUS_EPISODE_DONE",
        "typedef struct HswEnv HswEnv",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// The static library next to this test binary, built on demand.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libhsw_ffi.a");
    if !lib.exists() {
        let mut cmd = Command::new(env!("CARGO"));
        cmd.args(["build", "--quiet", "-p", "hsw-ffi", "--lib"]);
        match profile_dir.file_name()?.to_str()? {
            "debug" => {}
            "release" => {
                cmd.arg("--release");
            }
            _ => return None,
        }
        if let Some(target) = profile_dir.parent() {
            cmd.arg("--target-dir").arg(target);
        }
        cmd.status().ok()?.success().then_some(())?;
    }
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_against_static_library() {
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler");
        return;
    };
    let lib = static_lib().expect("static library builds");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(cc)
        .arg(root.join("tests/c_smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();

    let mut lib_env = Environment::new(ScenarioConfig::default());
    let rec = run_episode(&mut lib_env, &mut PnGuidance::new(PnGains::default()), 0, 42).unwrap();
    assert_eq!(fields[0].parse::<usize>().unwrap(), rec.steps);
    assert_eq!(fields[1].parse::<f64>().unwrap(), rec.miss_distance);
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc);
        }
    }
    Err(())
}
