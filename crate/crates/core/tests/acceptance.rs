//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The desk-scale training criterion (6) is reported but only gates the exit
//! status when `HSW_ACCEPTANCE_STRICT=1`; every other criterion always gates.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hsw_core::aero::{self, power_sum, ConstraintKind, ConstraintLimits, ConstraintStatus};
use hsw_core::config::{DivertModel, RewardWeights, ScenarioConfig};
use hsw_core::dynamics::{actuator_lag_derivatives, rk4_step, vehicle_derivatives, AeroForces, VehicleState, GRAVITY};
use hsw_core::env::draw::draw_divert_schedule;
use hsw_core::env::reward::{bonus_reward, shaping_reward};
use hsw_core::env::{TerminalInfo, Termination, ACT_DIM, OBS_DIM};
use hsw_core::eval::export::{summary_row, SUMMARY_HEADER};
use hsw_core::eval::{run_case, ExperimentCase, PnGains, PolicySource, RunOptions, CASE_LABELS, SUCCESS_SPEED};
use hsw_core::frames::{c2s, s2c, SphericalVel};
use hsw_core::net::{Network, NetworkSpec};
use hsw_core::ppo::{dual_discount_returns, evaluate_policy, RunConfig, Trainer, UpdateMetrics};
use hsw_core::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, format!("runtime {:.1}s over {limit_s}s", elapsed.as_secs_f64()))
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

fn exp_error(dt: f64) -> f64 {
    let steps = (1.0 / dt).round() as usize;
    let mut x = [1.0];
    for _ in 0..steps {
        x = rk4_step(|y: &[f64; 1]| Ok([y[0]]), &x, dt).unwrap();
    }
    (x[0] - std::f64::consts::E).abs()
}

fn ballistic_error() -> f64 {
    let (v0, g0, p0) = (2000.0, 0.1, 0.7);
    let start = Vec3::new(-5000.0, 2000.0, 20000.0);
    let base = VehicleState {
        position: start,
        velocity: s2c(SphericalVel::new(v0, g0, p0)),
        speed: v0,
        gamma: g0,
        psi: p0,
        alpha: 0.0,
        beta: 0.0,
        nu: 0.0,
        lag: [0.0; 3],
        t: 0.0,
    };
    let rhs = |x: &[f64; 6]| {
        let s = VehicleState { position: Vec3::new(x[0], x[1], x[2]), speed: x[3], gamma: x[4], psi: x[5], ..base };
        let d = vehicle_derivatives(&s, AeroForces::default(), 1000.0, [0.0; 3])?;
        Ok([d.position.x, d.position.y, d.position.z, d.speed, d.gamma, d.psi])
    };
    let mut x = [start.x, start.y, start.z, v0, g0, p0];
    let dt = 0.1;
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        x = rk4_step(rhs, &x, dt).unwrap();
        let t = k as f64 * dt;
        let vh = v0 * g0.cos();
        let exact = Vec3::new(
            start.x + vh * p0.cos() * t,
            start.y + vh * p0.sin() * t,
            start.z + v0 * g0.sin() * t - 0.5 * GRAVITY * t * t,
        );
        worst = worst.max((Vec3::new(x[0], x[1], x[2]) - exact).norm());
    }
    worst
}

fn physics() -> Outcome {
    let t0 = Instant::now();
    let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&dt| exp_error(dt)).collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    check(order >= 3.9, format!("RK4 order {order:.3}"))?;

    let ballistic = ballistic_error();
    check(ballistic <= 0.1, format!("ballistic error {ballistic:e} m"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut round_trip: f64 = 0.0;
    for _ in 0..10_000 {
        let v = Vec3::new(rng.gen_range(-3e3..3e3), rng.gen_range(-3e3..3e3), rng.gen_range(-3e3..3e3));
        let back = s2c(c2s(v).unwrap());
        round_trip = round_trip.max((back - v).norm() / v.norm());
    }
    check(round_trip <= 1e-12, format!("c2s/s2c round trip {round_trip:e}"))?;

    let tau = 0.1;
    let mut lag = [0.0; 3];
    let steps = 1000;
    for _ in 0..steps {
        lag = rk4_step(|f: &[f64; 3]| actuator_lag_derivatives(*f, [1.0, -2.0, 0.5], tau), &lag, tau / steps as f64)
            .unwrap();
    }
    let expect = 1.0 - (-1.0f64).exp();
    let lag_err =
        [lag[0] - expect, lag[1] / -2.0 - expect, lag[2] / 0.5 - expect].iter().fold(0.0f64, |a, e| a.max(e.abs()));
    check(lag_err <= 1e-6, format!("lag step error {lag_err:e}"))?;
    within(t0.elapsed(), 10.0)?;
    Ok(format!("order {order:.3}, ballistic {ballistic:.1e} m, round trip {round_trip:.1e}, lag {lag_err:.1e}"))
}

fn aero_thermal() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in 0..50 {
            let m = 3.0 + 7.0 * i as f64 / 49.0;
            let a = 12f64.to_radians() * j as f64 / 49.0;
            check(aero::coeff_cy(m, a, 0.0) == 0.0, format!("C_Y(beta=0) nonzero at M={m} alpha={a}"))?;
            let b = 0.1;
            worst = worst
                .max((aero::coeff_cl(m, a) - power_sum::coeff_cl(m, a)).abs())
                .max((aero::coeff_cd(m, a) - power_sum::coeff_cd(m, a)).abs())
                .max((aero::coeff_cy(m, a, b) - power_sum::coeff_cy(m, a, b)).abs());
        }
    }
    check(worst <= 1e-12, format!("dual evaluation differs by {worst:e}"))?;

    let tw = aero::wall_temperature(8.5e6);
    check((tw - 3644.0).abs() <= 1.0, format!("wall temperature {tw:.2} K"))?;
    check((tw - 3650.0).abs() / 3650.0 <= 0.003, format!("wall temperature {tw:.2} K vs quoted 3650 K"))?;

    let lim = ConstraintLimits::default();
    check(lim.heating_rate == 9.0e6 && lim.dynamic_pressure == 4.0e6 && lim.load == 147.15, "default limits")?;
    let ok = |h, q, n| ConstraintStatus::evaluate(h, q, n, &lim).violated;
    check(ok(9.0e6, 4.0e6, 147.15).is_none(), "fires at the limits")?;
    check(ok(next_up(9.0e6), 0.0, 0.0) == Some(ConstraintKind::Heating), "heating above limit")?;
    check(ok(0.0, next_up(4.0e6), 0.0) == Some(ConstraintKind::DynamicPressure), "pressure above limit")?;
    check(ok(0.0, 0.0, next_up(147.15)) == Some(ConstraintKind::Load), "load above limit")?;
    check(ok(next_down(9.0e6), next_down(4.0e6), next_down(147.15)).is_none(), "below limits")?;
    within(t0.elapsed(), 10.0)?;
    Ok(format!("polynomial agreement {worst:.1e}, T_wall(8.5e6) = {tw:.1} K"))
}

fn terminal(miss: f64, speed: f64, altitude: f64, reason: Termination) -> TerminalInfo {
    TerminalInfo {
        reason,
        miss_distance: miss,
        miss_vector: Vec3::new(miss, 0.0, 0.0),
        terminal_speed: speed,
        altitude,
        time: 30.0,
        vehicle_position: Vec3::new(miss, 0.0, altitude),
        target_position: Vec3::ZERO,
    }
}

fn reward() -> Outcome {
    let t0 = Instant::now();
    let w = RewardWeights::default();
    check(shaping_reward(&w, Vec3::ZERO) == 1.0, "shaping at zero LOS rate")?;
    let dir = Vec3::new(0.3, -0.4, 1.2);
    let at_sigma = dir * (w.omega_sigma_rps / dir.norm());
    let s = shaping_reward(&w, at_sigma);
    check((s - (-1.0f64).exp()).abs() <= 1e-12, format!("shaping at sigma {s}"))?;

    let hit = Termination::ClosingVelocity;
    let cases = [
        (terminal(10.0, 2000.0, -1.0, hit.clone()), 20.0),
        (terminal(next_down(50.0), 2000.0, -1.0, hit.clone()), 20.0),
        (terminal(50.0, 2000.0, -1.0, hit.clone()), 0.0),
        (terminal(next_up(50.0), 2000.0, -1.0, hit.clone()), 0.0),
        (terminal(10.0, next_up(1700.0), -1.0, hit.clone()), 20.0),
        (terminal(10.0, 1700.0, -1.0, hit.clone()), 0.0),
        (terminal(10.0, next_down(1700.0), -1.0, hit.clone()), 0.0),
        (terminal(10.0, 2000.0, 0.0, hit.clone()), 0.0),
        (terminal(10.0, 2000.0, 5.0, hit.clone()), 0.0),
        (terminal(10.0, 2000.0, -1.0, Termination::GroundImpact), 20.0),
        (terminal(10.0, 2000.0, -1.0, Termination::ConstraintViolation(ConstraintKind::Load)), 0.0),
    ];
    for (i, (t, expect)) in cases.iter().enumerate() {
        let b = bonus_reward(&w, Some(t));
        check(b == *expect, format!("bonus case {i}: {b} != {expect}"))?;
    }
    check(bonus_reward(&w, None) == 0.0, "bonus without terminal")?;
    within(t0.elapsed(), 1.0)?;
    Ok(format!("shaping(sigma) = {s:.15}, {} bonus cases", cases.len()))
}

fn gradients() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = NetworkSpec::custom(2, [3, 3, 3, 1], false);
    let len = 5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let params = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut net = Network::new(spec, params).unwrap();
        let xs: Vec<f64> = (0..len * 2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |net: &Network| -> f64 {
            let cache = net.forward_episode(&xs).unwrap();
            cache.outputs.iter().zip(&c).map(|(y, c)| c * y + 0.5 * y * y).sum()
        };
        let cache = net.forward_episode(&xs).unwrap();
        let d: Vec<f64> = cache.outputs.iter().zip(&c).map(|(y, c)| c + y).collect();
        let mut g = vec![0.0; net.params().len()];
        net.backward(&cache, &d, &mut g);
        for i in 0..g.len() {
            let p0 = net.params()[i];
            let h = 1e-5;
            net.params_mut()[i] = p0 + h;
            let lp = loss(&net);
            net.params_mut()[i] = p0 - h;
            let lm = loss(&net);
            net.params_mut()[i] = p0;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
        }
    }
    check(worst < 1e-5, format!("max relative error {worst:e}"))?;
    within(t0.elapsed(), 30.0)?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn brute_force_returns(running: &[f64], bonus: &[f64], gs: f64, gt: f64) -> Vec<f64> {
    (0..running.len())
        .map(|k| {
            let mut g = 0.0;
            for l in k..running.len() {
                g += gs.powi((l - k) as i32) * running[l] + gt.powi((l - k) as i32) * bonus[l];
            }
            g
        })
        .collect()
}

fn desk_config() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml")).expect("desk config loads")
}

fn ppo(desk: &[UpdateMetrics]) -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let running: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut bonus = vec![0.0; n];
        bonus[n - 1] = if rng.gen_bool(0.5) { 20.0 } else { 0.0 };
        let fast = dual_discount_returns(&running, &bonus, 0.9, 0.995);
        let slow = brute_force_returns(&running, &bonus, 0.9, 0.995);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-12, format!("returns differ from oracle by {worst:e}"))?;
    within(t0.elapsed(), 60.0)?;

    let mut run = desk_config();
    run.training.episodes_per_batch = 8;
    let mut trainer = Trainer::new(run, 3);
    trainer.warm_up();
    let episodes = trainer.collect();
    let advantages: Vec<Vec<f64>> = episodes.iter().map(|e| vec![1.0; e.len()]).collect();
    let eval = evaluate_policy(&trainer.policy, &episodes, &advantages, 0.2, 0.0, false);
    let ratio_err = eval.ratios.iter().fold(0.0f64, |a, r| a.max((r - 1.0).abs()));
    check(!eval.ratios.is_empty() && ratio_err <= 1e-12, format!("ratio at old parameters off by {ratio_err:e}"))?;

    let kl_limit = 5.0 * trainer.run.training.kl_target;
    let within_kl = desk.iter().filter(|m| m.kl <= kl_limit).count();
    let frac = within_kl as f64 / desk.len().max(1) as f64;
    let reverted = desk.iter().filter(|m| m.reverted_kl.is_some()).count();
    check(!desk.is_empty() && frac >= 0.95, format!("KL <= {kl_limit} on {:.1}% of desk updates", 100.0 * frac))?;
    Ok(format!(
        "returns {worst:.1e}, ratio {ratio_err:.1e} over {} steps, KL <= {kl_limit} on {within_kl}/{} updates ({reverted} passes reverted)",
        eval.ratios.len(),
        desk.len()
    ))
}

struct Desk {
    metrics: Vec<UpdateMetrics>,
    trainer: Trainer,
    elapsed: Duration,
}

fn desk_train() -> Desk {
    let t0 = Instant::now();
    let run = desk_config();
    let updates = run.training.updates;
    let mut trainer = Trainer::new(run, 1);
    let metrics = (0..updates).map(|_| trainer.step()).collect();
    Desk { metrics, trainer, elapsed: t0.elapsed() }
}

fn desk_training(desk: &Desk) -> Outcome {
    let t0 = Instant::now();
    let rewards: Vec<f64> = desk.metrics.iter().map(|m| m.mean_reward).collect();
    check(rewards.len() >= 20, "desk run too short")?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(&rewards[..10]);
    let last = mean(&rewards[rewards.len() - 10..]);
    let ratio = last / first;

    let scenario = desk.trainer.run.scenario.clone();
    let ckpt = desk.trainer.checkpoint();
    let opts = RunOptions { episodes: 100, seed: 11, traces: 0 };
    let net = run_case(
        ExperimentCase::Optim,
        &scenario,
        &PolicySource::Network { checkpoint: &ckpt, stochastic: false },
        opts,
    )
    .map_err(|e| e.to_string())?;
    let pn =
        run_case(ExperimentCase::Optim, &scenario, &PolicySource::Pn(PnGains::for_vehicle(&scenario.vehicle)), opts)
            .map_err(|e| e.to_string())?;
    let seeds_match = net.records.iter().zip(&pn.records).all(|(a, b)| a.seed == b.seed);
    check(seeds_match, "evaluation seed sets differ")?;
    let (net_miss, pn_miss) = (net.summary.miss.mean, pn.summary.miss.mean);

    let detail = format!(
        "reward first10 {first:.2} last10 {last:.2} ratio {ratio:.2} (need >= 2); miss net {net_miss:.0} m vs PN {pn_miss:.0} m \
         over {} episodes; violations net {:.0}% PN {:.0}%; train {:.0}s",
        opts.episodes,
        net.summary.violation_pct,
        pn.summary.violation_pct,
        desk.elapsed.as_secs_f64()
    );
    let ok = ratio >= 2.0 && net_miss <= pn_miss && (desk.elapsed + t0.elapsed()).as_secs_f64() < 7200.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn harness() -> Outcome {
    let t0 = Instant::now();
    let base = ScenarioConfig::default();
    let run = desk_config();
    let ckpt = Trainer::new(run, 9).checkpoint();
    let policy = PolicySource::Network { checkpoint: &ckpt, stochastic: false };
    let opts = RunOptions { episodes: 6, seed: 4, traces: 0 };
    let header: Vec<&str> = SUMMARY_HEADER.split(',').collect();
    for col in ["Miss mean", "Miss sd", "Speed mean", "Speed sd", "Miss < 5m", "Miss < 10m", "Violation", "Type"] {
        check(header.iter().any(|h| h.starts_with(col)), format!("summary header lacks {col}"))?;
    }
    let mut families = Vec::new();
    for case in ExperimentCase::standard() {
        let a = run_case(case, &base, &policy, opts).map_err(|e| e.to_string())?;
        let b = run_case(case, &base, &policy, opts).map_err(|e| e.to_string())?;
        let ja = serde_json::to_string(&a.summary).unwrap();
        check(ja == serde_json::to_string(&b.summary).unwrap(), format!("{case}: summaries differ across repeats"))?;
        check(a.records == b.records, format!("{case}: records differ across repeats"))?;
        let n = a.records.len() as f64;
        for (radius, pct) in [(5.0, a.summary.success_5m_pct), (10.0, a.summary.success_10m_pct)] {
            let hits =
                a.records.iter().filter(|r| r.miss_distance < radius && r.terminal_speed >= SUCCESS_SPEED).count();
            check(100.0 * hits as f64 / n == pct, format!("{case}: success <{radius} m mismatch"))?;
        }
        let row = summary_row(&a.summary);
        check(row.split(',').count() == header.len(), format!("{case}: row has wrong column count"))?;
        families.push(case.family());
    }
    for label in CASE_LABELS {
        check(families.contains(&label), format!("no standard case for {label}"))?;
    }
    Ok(format!("{} cases deterministic, columns {}, {:.1}s", families.len(), header.len(), t0.elapsed().as_secs_f64()))
}

fn diverts() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let single = DivertModel { probability: 0.5, ..DivertModel::default() };
    let n = 10_000;
    let mut count = 0;
    for _ in 0..n {
        let s = draw_divert_schedule(&mut rng, &single);
        check(s.triggers.len() <= 1, "more than one divert")?;
        for &r in &s.triggers {
            check((30_000.0..=150_000.0).contains(&r), format!("trigger {r} outside [30, 150] km"))?;
        }
        count += s.triggers.len();
    }
    let rate = count as f64 / n as f64;
    check((rate - 0.5).abs() <= 0.02, format!("divert rate {rate}"))?;

    let evasion = DivertModel { evasion: true, ..DivertModel::default() };
    let mut min_gap = f64::INFINITY;
    for _ in 0..n {
        let s = draw_divert_schedule(&mut rng, &evasion);
        check(s.ends_on_true_target, "evasion chain must end on the true target")?;
        let first = *s.triggers.first().ok_or("empty evasion chain")?;
        let last = *s.triggers.last().unwrap();
        check(first <= 150_000.0 && last >= 25_000.0, format!("chain spans {first}..{last}"))?;
        for w in s.triggers.windows(2) {
            min_gap = min_gap.min(w[0] - w[1]);
        }
    }
    check(min_gap >= 30_000.0, format!("evasion spacing {min_gap}"))?;
    within(t0.elapsed(), 60.0)?;
    Ok(format!("divert rate {:.2}%, min evasion spacing {:.0} m", 100.0 * rate, min_gap))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    // libtest arguments (filters, --list) are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let strict = std::env::var("HSW_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    assert_eq!((OBS_DIM, ACT_DIM), (11, 3));

    let desk = desk_train();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "physics oracles", guarded(physics)),
        (2, "aero/thermal", guarded(aero_thermal)),
        (3, "reward", guarded(reward)),
        (4, "gradients", guarded(gradients)),
        (5, "PPO invariants", guarded(|| ppo(&desk.metrics))),
        (6, "desk-scale training", guarded(|| desk_training(&desk))),
        (7, "Monte Carlo harness", guarded(harness)),
        (8, "divert mechanics", guarded(diverts)),
    ];

    let mut gate_failed = false;
    for (id, name, outcome) in &results {
        let gates = *id != 6 || strict;
        match outcome {
            Ok(d) => println!("criterion {id} ({name}): PASS: {d}"),
            Err(d) => {
                let note = if gates { "" } else { " [reported, not gating]" };
                println!("criterion {id} ({name}): FAIL: {d}{note}");
                gate_failed |= gates;
            }
        }
    }
    if gate_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
