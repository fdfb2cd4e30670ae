//! Empirical returns with separate discounts for the running and terminal
//! rewards, and advantage normalization.

/// `G_k = sum_{l>=k} gs^(l-k) * running_l + gt^(T-k) * bonus_T`, with `T`
/// the last step. `bonus` holds the terminal reward (usually only its last
/// entry is non-zero; earlier entries are discounted the same way).
pub fn dual_discount_returns(running: &[f64], bonus: &[f64], gamma_shaping: f64, gamma_terminal: f64) -> Vec<f64> {
    let n = running.len();
    let mut out = vec![0.0; n];
    let mut gs = 0.0;
    let mut gt = 0.0;
    for k in (0..n).rev() {
        gs = running[k] + gamma_shaping * gs;
        gt = bonus[k] + gamma_terminal * gt;
        out[k] = gs + gt;
    }
    out
}

/// Shifts and scales in place to zero mean and unit variance.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt().max(1e-12);
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}
