//! Recurrent policy and value networks.
//!
//! Both networks share one shape: dense tanh layer, GRU layer, dense tanh
//! layer, linear output. Parameters live in one flat vector in this order:
//!
//! `W1 b1 | Wz Uz bz | Wr Ur br | Wh Uh bh | W3 b3 | W4 b4 | log_std`
//!
//! Matrices are row-major with one row per output unit. `log_std` is only
//! present for the policy network.
//!
//! GRU update: `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
//! `c = tanh(Wh x + Uh (r ⊙ h) + bh)`, `h' = z ⊙ h + (1 − z) ⊙ c`.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod scaler;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gaussian::{log_prob, log_prob_grad, sample};
pub use scaler::ObservationScaler;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("expected {expected} {what}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden1: usize,
    pub recurrent: usize,
    pub hidden3: usize,
    pub output_dim: usize,
    /// Trailing state-independent log standard deviation (policy only).
    pub log_std: bool,
}

impl NetworkSpec {
    /// First hidden layer 10x the input, last hidden layer 10x the action
    /// count, recurrent layer their geometric mean.
    pub fn policy(obs_dim: usize, act_dim: usize) -> Self {
        let h1 = 10 * obs_dim;
        let h3 = 10 * act_dim;
        Self {
            input_dim: obs_dim,
            hidden1: h1,
            recurrent: geometric_mean(h1, h3),
            hidden3: h3,
            output_dim: act_dim,
            log_std: true,
        }
    }

    /// First hidden layer 10x the input, last hidden layer 5 units.
    pub fn value(obs_dim: usize) -> Self {
        let h1 = 10 * obs_dim;
        let h3 = 5;
        Self {
            input_dim: obs_dim,
            hidden1: h1,
            recurrent: geometric_mean(h1, h3),
            hidden3: h3,
            output_dim: 1,
            log_std: false,
        }
    }

    pub fn custom(input_dim: usize, widths: [usize; 4], log_std: bool) -> Self {
        Self { input_dim, hidden1: widths[0], recurrent: widths[1], hidden3: widths[2], output_dim: widths[3], log_std }
    }

    pub fn widths(&self) -> [usize; 4] {
        [self.hidden1, self.recurrent, self.hidden3, self.output_dim]
    }

    pub fn param_count(&self) -> usize {
        let (i, a, g, c, o) = (self.input_dim, self.hidden1, self.recurrent, self.hidden3, self.output_dim);
        a * (i + 1) + 3 * g * (a + g + 1) + c * (g + 1) + o * (c + 1) + if self.log_std { o } else { 0 }
    }

    pub fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (i, a, g, c, o) = (self.input_dim, self.hidden1, self.recurrent, self.hidden3, self.output_dim);
        let w1 = take(a * i);
        let b1 = take(a);
        let mut gate = || Gate { w: take(g * a), u: take(g * g), b: take(g) };
        let z = gate();
        let r = gate();
        let h = gate();
        let w3 = take(c * g);
        let b3 = take(c);
        let w4 = take(o * c);
        let b4 = take(o);
        let log_std = if self.log_std { Some(take(o)) } else { None };
        Layout { w1, b1, z, r, h, w3, b3, w4, b4, log_std, total: at }
    }
}

fn geometric_mean(a: usize, b: usize) -> usize {
    ((a * b) as f64).sqrt().round() as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub w: Range<usize>,
    pub u: Range<usize>,
    pub b: Range<usize>,
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub z: Gate,
    pub r: Gate,
    pub h: Gate,
    pub w3: Range<usize>,
    pub b3: Range<usize>,
    pub w4: Range<usize>,
    pub b4: Range<usize>,
    pub log_std: Option<Range<usize>>,
    pub total: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W x` with `W` row-major `out.len() x x.len()`.
fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ d`.
fn matvec_t_add(w: &[f64], d: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (di, row) in d.iter().zip(w.chunks_exact(n)) {
        if *di != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += di * a;
            }
        }
    }
}

/// `g += d xᵀ`.
fn outer_add(g: &mut [f64], d: &[f64], x: &[f64]) {
    let n = x.len();
    for (di, row) in d.iter().zip(g.chunks_exact_mut(n)) {
        if *di != 0.0 {
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += di * xi;
            }
        }
    }
}

fn add_to(g: &mut [f64], d: &[f64]) {
    for (a, b) in g.iter_mut().zip(d) {
        *a += b;
    }
}

/// Activations of one GRU step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

/// Forward activations of a sequence, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub len: usize,
    inputs: Vec<f64>,
    a1: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    a3: Vec<f64>,
    starts: Vec<bool>,
    /// Network outputs, `len x output_dim`.
    pub outputs: Vec<f64>,
}

impl SequenceCache {
    pub fn output(&self, t: usize, dim: usize) -> &[f64] {
        &self.outputs[t * dim..(t + 1) * dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    params: Vec<f64>,
}

impl Network {
    pub fn new(spec: NetworkSpec, params: Vec<f64>) -> Result<Self, NetError> {
        let layout = spec.layout();
        if params.len() != layout.total {
            return Err(NetError::Shape { what: "parameters", expected: layout.total, got: params.len() });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(NetError::NonFinite(i));
        }
        Ok(Self { spec, layout, params })
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let layout = spec.layout();
        let params = vec![0.0; layout.total];
        Self { spec, layout, params }
    }

    /// Weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases and log-std zero.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut net = Self::zeros(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = net.layout.clone();
        let (i, a, g, c) = (spec.input_dim, spec.hidden1, spec.recurrent, spec.hidden3);
        let mut fill = |r: Range<usize>, fan_in: usize, p: &mut [f64]| {
            let s = 1.0 / (fan_in as f64).sqrt();
            for v in &mut p[r] {
                *v = rng.gen_range(-s..s);
            }
        };
        let p = &mut net.params;
        fill(l.w1, i, p);
        for gate in [&l.z, &l.r, &l.h] {
            fill(gate.w.clone(), a, p);
            fill(gate.u.clone(), g, p);
        }
        fill(l.w3, g, p);
        fill(l.w4, c, p);
        net
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.params.len() {
            return Err(NetError::Shape { what: "parameters", expected: self.params.len(), got: params.len() });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn log_std(&self) -> Option<&[f64]> {
        self.layout.log_std.clone().map(|r| &self.params[r])
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.spec.recurrent]
    }

    fn check_input(&self, x: &[f64], h: &[f64]) -> Result<(), NetError> {
        if x.len() != self.spec.input_dim {
            return Err(NetError::Shape { what: "inputs", expected: self.spec.input_dim, got: x.len() });
        }
        if h.len() != self.spec.recurrent {
            return Err(NetError::Shape { what: "hidden units", expected: self.spec.recurrent, got: h.len() });
        }
        Ok(())
    }

    fn first_layer(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut a1 = p[self.layout.b1.clone()].to_vec();
        matvec_add(&p[self.layout.w1.clone()], x, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        a1
    }

    /// One GRU update given the first-layer activations.
    pub fn gru_step(&self, input: &[f64], h: &[f64]) -> GruStep {
        let p = &self.params;
        let l = &self.layout;
        let pre = |gate: &Gate, hv: &[f64]| {
            let mut v = p[gate.b.clone()].to_vec();
            matvec_add(&p[gate.w.clone()], input, &mut v);
            matvec_add(&p[gate.u.clone()], hv, &mut v);
            v
        };
        let z: Vec<f64> = pre(&l.z, h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = pre(&l.r, h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let candidate: Vec<f64> = pre(&l.h, &rh).into_iter().map(f64::tanh).collect();
        let h_new = (0..h.len()).map(|k| z[k] * h[k] + (1.0 - z[k]) * candidate[k]).collect();
        GruStep { z, r, candidate, h: h_new }
    }

    fn head(&self, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let l = &self.layout;
        let mut a3 = p[l.b3.clone()].to_vec();
        matvec_add(&p[l.w3.clone()], h, &mut a3);
        a3.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = p[l.b4.clone()].to_vec();
        matvec_add(&p[l.w4.clone()], &a3, &mut out);
        (a3, out)
    }

    /// Single step without caching. Returns (output, next hidden state).
    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        self.check_input(x, h)?;
        let a1 = self.first_layer(x);
        let g = self.gru_step(&a1, h);
        let (_, out) = self.head(&g.h);
        Ok((out, g.h))
    }

    /// Runs a sequence from a zero hidden state. `xs` holds `len x input_dim`
    /// values; the hidden state is zeroed again wherever `starts[t]` is set.
    pub fn forward_sequence(&self, xs: &[f64], starts: &[bool]) -> Result<SequenceCache, NetError> {
        let s = &self.spec;
        let n = starts.len();
        if xs.len() != n * s.input_dim {
            return Err(NetError::Shape { what: "sequence inputs", expected: n * s.input_dim, got: xs.len() });
        }
        let g = s.recurrent;
        let mut cache = SequenceCache {
            len: n,
            inputs: xs.to_vec(),
            a1: Vec::with_capacity(n * s.hidden1),
            h_prev: Vec::with_capacity(n * g),
            z: Vec::with_capacity(n * g),
            r: Vec::with_capacity(n * g),
            c: Vec::with_capacity(n * g),
            h: Vec::with_capacity(n * g),
            a3: Vec::with_capacity(n * s.hidden3),
            starts: starts.to_vec(),
            outputs: Vec::with_capacity(n * s.output_dim),
        };
        let mut h = vec![0.0; g];
        for (t, x) in xs.chunks_exact(s.input_dim).enumerate() {
            if starts[t] {
                h.iter_mut().for_each(|v| *v = 0.0);
            }
            let a1 = self.first_layer(x);
            let step = self.gru_step(&a1, &h);
            let (a3, out) = self.head(&step.h);
            cache.a1.extend_from_slice(&a1);
            cache.h_prev.extend_from_slice(&h);
            cache.z.extend_from_slice(&step.z);
            cache.r.extend_from_slice(&step.r);
            cache.c.extend_from_slice(&step.candidate);
            cache.h.extend_from_slice(&step.h);
            cache.a3.extend_from_slice(&a3);
            cache.outputs.extend_from_slice(&out);
            h = step.h;
        }
        Ok(cache)
    }

    /// Convenience: one episode, hidden state zeroed only at the start.
    pub fn forward_episode(&self, xs: &[f64]) -> Result<SequenceCache, NetError> {
        let n = xs.len() / self.spec.input_dim.max(1);
        let mut starts = vec![false; n];
        if let Some(s) = starts.first_mut() {
            *s = true;
        }
        self.forward_sequence(xs, &starts)
    }

    /// Backpropagation through time. `d_out` is the loss gradient with
    /// respect to every output (`len x output_dim`); parameter gradients are
    /// added into `grad`. The log-std entries are left untouched.
    pub fn backward(&self, cache: &SequenceCache, d_out: &[f64], grad: &mut [f64]) {
        let s = &self.spec;
        let l = &self.layout;
        let p = &self.params;
        let (i_dim, a_dim, g, c_dim, o_dim) = (s.input_dim, s.hidden1, s.recurrent, s.hidden3, s.output_dim);
        assert_eq!(d_out.len(), cache.len * o_dim, "output gradient shape");
        assert_eq!(grad.len(), l.total, "gradient buffer shape");

        let mut dh_carry = vec![0.0; g];
        let mut dh = vec![0.0; g];
        let mut da3 = vec![0.0; c_dim];
        let mut da1 = vec![0.0; a_dim];
        let mut d_pre_z = vec![0.0; g];
        let mut d_pre_r = vec![0.0; g];
        let mut d_pre_c = vec![0.0; g];
        let mut d_rh = vec![0.0; g];
        let mut rh = vec![0.0; g];

        for t in (0..cache.len).rev() {
            let x = &cache.inputs[t * i_dim..(t + 1) * i_dim];
            let a1 = &cache.a1[t * a_dim..(t + 1) * a_dim];
            let hp = &cache.h_prev[t * g..(t + 1) * g];
            let z = &cache.z[t * g..(t + 1) * g];
            let r = &cache.r[t * g..(t + 1) * g];
            let c = &cache.c[t * g..(t + 1) * g];
            let h = &cache.h[t * g..(t + 1) * g];
            let a3 = &cache.a3[t * c_dim..(t + 1) * c_dim];
            let dout = &d_out[t * o_dim..(t + 1) * o_dim];

            outer_add(&mut grad[l.w4.clone()], dout, a3);
            add_to(&mut grad[l.b4.clone()], dout);
            da3.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(&p[l.w4.clone()], dout, &mut da3);
            for (d, a) in da3.iter_mut().zip(a3) {
                *d *= 1.0 - a * a;
            }
            outer_add(&mut grad[l.w3.clone()], &da3, h);
            add_to(&mut grad[l.b3.clone()], &da3);
            dh.copy_from_slice(&dh_carry);
            matvec_t_add(&p[l.w3.clone()], &da3, &mut dh);

            // GRU
            dh_carry.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..g {
                let dz = dh[k] * (hp[k] - c[k]);
                let dc = dh[k] * (1.0 - z[k]);
                dh_carry[k] = dh[k] * z[k];
                d_pre_c[k] = dc * (1.0 - c[k] * c[k]);
                d_pre_z[k] = dz * z[k] * (1.0 - z[k]);
                rh[k] = r[k] * hp[k];
            }
            outer_add(&mut grad[l.h.w.clone()], &d_pre_c, a1);
            outer_add(&mut grad[l.h.u.clone()], &d_pre_c, &rh);
            add_to(&mut grad[l.h.b.clone()], &d_pre_c);
            d_rh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(&p[l.h.u.clone()], &d_pre_c, &mut d_rh);
            for k in 0..g {
                let dr = d_rh[k] * hp[k];
                dh_carry[k] += d_rh[k] * r[k];
                d_pre_r[k] = dr * r[k] * (1.0 - r[k]);
            }
            outer_add(&mut grad[l.z.w.clone()], &d_pre_z, a1);
            outer_add(&mut grad[l.z.u.clone()], &d_pre_z, hp);
            add_to(&mut grad[l.z.b.clone()], &d_pre_z);
            outer_add(&mut grad[l.r.w.clone()], &d_pre_r, a1);
            outer_add(&mut grad[l.r.u.clone()], &d_pre_r, hp);
            add_to(&mut grad[l.r.b.clone()], &d_pre_r);
            matvec_t_add(&p[l.z.u.clone()], &d_pre_z, &mut dh_carry);
            matvec_t_add(&p[l.r.u.clone()], &d_pre_r, &mut dh_carry);

            da1.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(&p[l.z.w.clone()], &d_pre_z, &mut da1);
            matvec_t_add(&p[l.r.w.clone()], &d_pre_r, &mut da1);
            matvec_t_add(&p[l.h.w.clone()], &d_pre_c, &mut da1);
            for (d, a) in da1.iter_mut().zip(a1) {
                *d *= 1.0 - a * a;
            }
            outer_add(&mut grad[l.w1.clone()], &da1, x);
            add_to(&mut grad[l.b1.clone()], &da1);

            if cache.starts[t] {
                dh_carry.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

/// Gaussian policy: network output is the action mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet(pub Network);

impl PolicyNet {
    pub fn init(obs_dim: usize, act_dim: usize, seed: u64) -> Self {
        Self(Network::init(NetworkSpec::policy(obs_dim, act_dim), seed))
    }

    /// Returns (mean, std, next hidden state).
    pub fn forward(&self, obs: &[f64], h: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), NetError> {
        let (mean, h) = self.0.step(obs, h)?;
        Ok((mean, self.std(), h))
    }

    pub fn std(&self) -> Vec<f64> {
        self.0.log_std().map(|l| l.iter().map(|v| v.exp()).collect()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet(pub Network);

impl ValueNet {
    pub fn init(obs_dim: usize, seed: u64) -> Self {
        Self(Network::init(NetworkSpec::value(obs_dim), seed))
    }

    pub fn forward(&self, obs: &[f64], h: &[f64]) -> Result<(f64, Vec<f64>), NetError> {
        let (v, h) = self.0.step(obs, h)?;
        Ok((v[0], h))
    }
}
