use crate::codec::{ByteReader, ByteWriter};
use crate::tensorcore::{clip_global_norm, AdamState, Mlp, Tape};
use crate::Result;

/// Losses and statistics from one call to `train_step`.
///
/// Fields for updates that did not run on this call are `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub critic1_loss: f64,
    pub critic2_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub alpha: Option<f64>,
    pub mean_q: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounters {
    pub critic: u64,
    pub actor: u64,
    pub temperature: u64,
    pub target: u64,
}

impl UpdateCounters {
    pub fn write(&self, w: &mut ByteWriter) {
        for v in [self.critic, self.actor, self.temperature, self.target] {
            w.u64(v);
        }
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        Ok(Self { critic: r.u64()?, actor: r.u64()?, temperature: r.u64()?, target: r.u64()? })
    }
}

/// Row-wise concatenation `[a_i | b_i]` of two row-major blocks.
pub fn concat_rows(a: &[f64], a_cols: usize, b: &[f64], b_cols: usize) -> Vec<f64> {
    let n = a.len().checked_div(a_cols).unwrap_or(b.len() / b_cols.max(1));
    debug_assert_eq!(b.len(), n * b_cols);
    let mut out = Vec::with_capacity(n * (a_cols + b_cols));
    for i in 0..n {
        out.extend_from_slice(&a[i * a_cols..(i + 1) * a_cols]);
        out.extend_from_slice(&b[i * b_cols..(i + 1) * b_cols]);
    }
    out
}

/// Columns `from..from + width` of every row of a `cols`-wide block.
pub fn column_slice(x: &[f64], cols: usize, from: usize, width: usize) -> Vec<f64> {
    x.chunks_exact(cols).flat_map(|row| row[from..from + width].iter().copied()).collect()
}

/// Backprop, optional clip, one ADAM step.
pub fn apply_gradient(net: &mut Mlp, opt: &mut AdamState, tape: &Tape, d_out: &[f64], clip: Option<f64>) {
    let mut g = net.backward(tape, d_out).params;
    if let Some(c) = clip {
        clip_global_norm(&mut g, c);
    }
    opt.step(net.params_mut(), &g);
}

/// One regression step of a critic toward fixed targets `y`; returns the
/// pre-update mean squared error and mean prediction.
pub fn regress_critic(
    net: &mut Mlp,
    opt: &mut AdamState,
    input: &[f64],
    y: &[f64],
    clip: Option<f64>,
) -> (f64, f64) {
    let n = y.len();
    let tape = net.forward_batch(input, n);
    let q = tape.output();
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut mean_q = 0.0;
    let d: Vec<f64> = q
        .iter()
        .zip(y)
        .map(|(q, y)| {
            let e = q - y;
            loss += e * e * inv;
            mean_q += q * inv;
            2.0 * e * inv
        })
        .collect();
    apply_gradient(net, opt, &tape, &d, clip);
    (loss, mean_q)
}

/// Bootstrapped target for clipped double-Q. `log_pi` and `alpha` carry the
/// entropy bonus; pass `alpha = 0` for deterministic agents.
#[allow(clippy::too_many_arguments)]
pub fn soft_target(
    reward: f64,
    done: f64,
    q1_next: f64,
    q2_next: f64,
    log_pi_next: f64,
    gamma: f64,
    alpha: f64,
    entropy_inside: bool,
) -> f64 {
    let q = q1_next.min(q2_next);
    let live = 1.0 - done;
    if entropy_inside {
        reward + gamma * live * (q - alpha * log_pi_next)
    } else {
        reward + live * (gamma * q - alpha * log_pi_next)
    }
}
