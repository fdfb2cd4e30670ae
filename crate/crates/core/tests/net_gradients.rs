use hsw_core::net::{Network, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny() -> NetworkSpec {
    NetworkSpec::custom(2, [3, 3, 3, 1], false)
}

/// L = sum_t (c_t * y_t + 0.5 * y_t^2)
fn loss(net: &Network, xs: &[f64], starts: &[bool], c: &[f64]) -> f64 {
    let cache = net.forward_sequence(xs, starts).unwrap();
    cache.outputs.iter().zip(c).map(|(y, c)| c * y + 0.5 * y * y).sum()
}

fn analytic(net: &Network, xs: &[f64], starts: &[bool], c: &[f64]) -> Vec<f64> {
    let cache = net.forward_sequence(xs, starts).unwrap();
    let d: Vec<f64> = cache.outputs.iter().zip(c).map(|(y, c)| c + y).collect();
    let mut g = vec![0.0; net.params().len()];
    net.backward(&cache, &d, &mut g);
    g
}

fn random_case(rng: &mut ChaCha8Rng, len: usize) -> (Network, Vec<f64>, Vec<f64>) {
    let spec = tiny();
    let params = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let net = Network::new(spec, params).unwrap();
    let xs = (0..len * 2).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let c = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (net, xs, c)
}

#[test]
fn bptt_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (mut net, xs, c) = random_case(&mut rng, 5);
        let starts = [true, false, false, false, false];
        let g = analytic(&net, &xs, &starts, &c);
        for i in 0..g.len() {
            let p0 = net.params()[i];
            let h = 1e-5;
            net.params_mut()[i] = p0 + h;
            let lp = loss(&net, &xs, &starts, &c);
            net.params_mut()[i] = p0 - h;
            let lm = loss(&net, &xs, &starts, &c);
            net.params_mut()[i] = p0;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-5, "max relative error {worst:e}");
}

#[test]
fn constant_loss_has_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (net, xs, _) = random_case(&mut rng, 4);
    let cache = net.forward_episode(&xs).unwrap();
    let mut g = vec![0.0; net.params().len()];
    net.backward(&cache, &[0.0; 4], &mut g);
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn reset_boundary_separates_episodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (net, xs, c) = random_case(&mut rng, 7);
    let joined = analytic(&net, &xs, &[true, false, false, true, false, false, false], &c);
    let first = analytic(&net, &xs[..6], &[true, false, false], &c[..3]);
    let second = analytic(&net, &xs[6..], &[true, false, false, false], &c[3..]);
    for i in 0..joined.len() {
        assert!((joined[i] - first[i] - second[i]).abs() < 1e-12);
    }
}

#[test]
fn hidden_state_stays_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let spec = tiny();
        let params = (0..spec.param_count()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let net = Network::new(spec, params).unwrap();
        let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = net.gru_step(&input, &h);
        let hmax = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(s.h.iter().all(|v| v.abs() <= hmax));
    }
}

#[test]
fn single_step_matches_hand_chain_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (net, xs, _) = random_case(&mut rng, 1);
    let g = analytic(&net, &xs, &[true], &[1.0]);
    let l = net.layout();
    let cache = net.forward_episode(&xs).unwrap();
    let y = cache.outputs[0];
    // output bias gradient is dL/dy = 1 + y
    assert!((g[l.b4.start] - (1.0 + y)).abs() < 1e-15);
    // with zero initial state the recurrent matrices get no gradient
    assert!(g[l.z.u.clone()].iter().all(|v| *v == 0.0));
    assert!(g[l.h.u.clone()].iter().all(|v| *v == 0.0));
}
