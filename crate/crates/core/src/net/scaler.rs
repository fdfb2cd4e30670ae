use serde::{Deserialize, Serialize};

pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Running per-component mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationScaler {
    pub count: u64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the running mean.
    pub m2: Vec<f64>,
}

impl ObservationScaler {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![1.0; self.dim()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|s| (s / n).max(VARIANCE_FLOOR)).collect()
    }

    pub fn scale_into(&self, x: &[f64], out: &mut [f64]) {
        if self.count < 2 {
            out.copy_from_slice(x);
            return;
        }
        let n = self.count as f64;
        for i in 0..x.len() {
            let sd = (self.m2[i] / n).max(VARIANCE_FLOOR).sqrt();
            out[i] = (x[i] - self.mean[i]) / sd;
        }
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.scale_into(x, &mut out);
        out
    }
}
