/// Bounds applied to the policy's log standard deviation head.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside `log(1 - tanh(u)^2 + eps)` so saturation stays finite.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq)]
pub struct SquashedSample {
    /// Pre-squash Gaussian draw `mean + exp(log_std) * xi`.
    pub u: Vec<f64>,
    /// `tanh(u)`, inside `(-1, 1)`.
    pub action: Vec<f64>,
    /// Log-density of `action` with the tanh change-of-variables correction.
    pub log_prob: f64,
}

/// Reparameterized draw `a = tanh(mean + exp(log_std) * xi)`.
///
/// `log_std` is expected to be clamped to `[LOG_STD_MIN, LOG_STD_MAX]` already.
pub fn sample_squashed_gaussian(mean: &[f64], log_std: &[f64], xi: &[f64]) -> SquashedSample {
    assert!(mean.len() == log_std.len() && mean.len() == xi.len(), "dimension mismatch");
    let mut u = Vec::with_capacity(mean.len());
    let mut action = Vec::with_capacity(mean.len());
    let mut log_prob = 0.0;
    for ((&m, &ls), &e) in mean.iter().zip(log_std).zip(xi) {
        let ui = m + ls.exp() * e;
        let a = ui.tanh();
        // Gaussian log-density of u: -(u - m)^2 / (2 s^2) - log s - log(2 pi) / 2
        log_prob += -0.5 * e * e - ls - HALF_LN_2PI;
        log_prob -= (1.0 - a * a + SQUASH_EPS).ln();
        u.push(ui);
        action.push(a);
    }
    SquashedSample { u, action, log_prob }
}

/// Pathwise gradients of `L = d_action . a + d_log_prob * log_prob` with
/// respect to the mean and log-std heads, holding the noise `xi` fixed.
pub fn reparam_grads(
    sample: &SquashedSample,
    log_std: &[f64],
    xi: &[f64],
    d_action: &[f64],
    d_log_prob: f64,
) -> (Vec<f64>, Vec<f64>) {
    let d = sample.action.len();
    let mut d_mean = Vec::with_capacity(d);
    let mut d_log_std = Vec::with_capacity(d);
    for i in 0..d {
        let a = sample.action[i];
        let one_minus = 1.0 - a * a;
        // d/du of -log(1 - tanh(u)^2 + eps)
        let correction = 2.0 * a * one_minus / (one_minus + SQUASH_EPS);
        let du = d_action[i] * one_minus + d_log_prob * correction;
        d_mean.push(du);
        // u depends on log_std through exp(log_std) * xi; the Gaussian term contributes -1.
        d_log_std.push(du * log_std[i].exp() * xi[i] - d_log_prob);
    }
    (d_mean, d_log_std)
}
