//! Binary checkpoint format (little endian):
//!
//! ```text
//! magic "HSWCKPT\0" | version u32
//! policy spec | value spec          (input u32, 4 widths u32, log_std u8)
//! scaler: count u64, dim u32, mean f64*dim, m2 f64*dim
//! policy params: n u64, f64*n
//! value params:  n u64, f64*n
//! trainer flag u8, then optionally:
//!   seed u64, update u64, lr_policy, lr_value, clip, lr_policy_max f64,
//!   policy adam, value adam          (step u64, n u64, m f64*n, v f64*n)
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::Adam;
use super::{NetError, Network, NetworkSpec, ObservationScaler, PolicyNet, ValueNet};

pub const MAGIC: &[u8; 8] = b"HSWCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Optimizer and schedule state needed to resume training exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerSnapshot {
    pub seed: u64,
    /// Number of completed updates.
    pub update: u64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub clip: f64,
    pub lr_policy_max: f64,
    pub policy_adam: Adam,
    pub value_adam: Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub scaler: ObservationScaler,
    pub trainer: Option<TrainerSnapshot>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    fn spec(&mut self, s: &NetworkSpec) {
        self.u32(s.input_dim as u32);
        s.widths().iter().for_each(|w| self.u32(*w as u32));
        self.u8(s.log_std as u8);
    }
    fn adam(&mut self, a: &Adam) {
        self.u64(a.step);
        self.f64s(&a.m);
        self.f64s(&a.v);
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if self.0.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u64()? as usize;
        if n > self.0.len() / 8 {
            return Err(CheckpointError::Truncated);
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn spec(&mut self) -> Result<NetworkSpec, CheckpointError> {
        let input = self.u32()? as usize;
        let mut w = [0usize; 4];
        for v in &mut w {
            *v = self.u32()? as usize;
        }
        let log_std = self.u8()? != 0;
        Ok(NetworkSpec::custom(input, w, log_std))
    }
    fn adam(&mut self) -> Result<Adam, CheckpointError> {
        let step = self.u64()?;
        let m = self.f64s()?;
        let v = self.f64s()?;
        if m.len() != v.len() {
            return Err(CheckpointError::Mismatch("optimizer moment lengths differ".into()));
        }
        Ok(Adam { step, m, v, ..Adam::new(0) })
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.spec(self.policy.0.spec());
        w.spec(self.value.0.spec());
        w.u64(self.scaler.count);
        w.u32(self.scaler.dim() as u32);
        self.scaler.mean.iter().for_each(|v| w.f64(*v));
        self.scaler.m2.iter().for_each(|v| w.f64(*v));
        w.f64s(self.policy.0.params());
        w.f64s(self.value.0.params());
        match &self.trainer {
            None => w.u8(0),
            Some(t) => {
                w.u8(1);
                w.u64(t.seed);
                w.u64(t.update);
                w.f64(t.lr_policy);
                w.f64(t.lr_value);
                w.f64(t.clip);
                w.f64(t.lr_policy_max);
                w.adam(&t.policy_adam);
                w.adam(&t.value_adam);
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader(bytes);
        if r.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let ps = r.spec()?;
        let vs = r.spec()?;
        let count = r.u64()?;
        let dim = r.u32()? as usize;
        if dim != ps.input_dim || dim != vs.input_dim {
            return Err(CheckpointError::Mismatch(format!(
                "scaler dimension {dim} vs network inputs {}/{}",
                ps.input_dim, vs.input_dim
            )));
        }
        let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let m2 = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let policy = PolicyNet(Network::new(ps, r.f64s()?)?);
        let value = ValueNet(Network::new(vs, r.f64s()?)?);
        let trainer = match r.u8()? {
            0 => None,
            _ => {
                let t = TrainerSnapshot {
                    seed: r.u64()?,
                    update: r.u64()?,
                    lr_policy: r.f64()?,
                    lr_value: r.f64()?,
                    clip: r.f64()?,
                    lr_policy_max: r.f64()?,
                    policy_adam: r.adam()?,
                    value_adam: r.adam()?,
                };
                if t.policy_adam.m.len() != ps.param_count() || t.value_adam.m.len() != vs.param_count() {
                    return Err(CheckpointError::Mismatch("optimizer state size".into()));
                }
                Some(t)
            }
        };
        if !r.0.is_empty() {
            return Err(CheckpointError::Mismatch(format!("{} trailing bytes", r.0.len())));
        }
        Ok(Self { policy, value, scaler: ObservationScaler { count, mean, m2 }, trainer })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let mut f = fs::File::create(path).map_err(io_err)?;
        f.write_all(&self.to_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let mut bytes = Vec::new();
        fs::File::open(path).map_err(io_err)?.read_to_end(&mut bytes).map_err(io_err)?;
        Self::from_bytes(&bytes)
    }

    /// Checks the networks against the expected observation/action sizes.
    pub fn expect_dims(&self, obs_dim: usize, act_dim: usize) -> Result<(), CheckpointError> {
        let p = self.policy.0.spec();
        if p.input_dim != obs_dim || p.output_dim != act_dim || !p.log_std {
            return Err(CheckpointError::Mismatch(format!(
                "policy maps {} -> {}, environment needs {obs_dim} -> {act_dim}",
                p.input_dim, p.output_dim
            )));
        }
        Ok(())
    }
}
