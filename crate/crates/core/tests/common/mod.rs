#![allow(dead_code, clippy::needless_range_loop)]

//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerical code.

use nslice::costmodel::ComputeModel;
use nslice::netmodel::C64;
use nslice::tensorcore::{Activation, Mlp};

/// Scalar forward pass of an MLP for one input row, straight from the
/// parameter layout (row-major `out x in` weights, then biases, per layer).
pub fn mlp_forward_scalar(sizes: &[usize], act: Activation, params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for k in 0..layers {
        let (i, o) = (sizes[k], sizes[k + 1]);
        let w = &params[off..off + i * o];
        let b = &params[off + i * o..off + i * o + o];
        let mut z = vec![0.0; o];
        for r in 0..o {
            let mut s = b[r];
            for c in 0..i {
                s += w[r * i + c] * h[c];
            }
            z[r] = s;
        }
        if k + 1 < layers {
            for v in &mut z {
                *v = match act {
                    Activation::Relu => v.max(0.0),
                    Activation::Gelu => 0.5 * *v * (1.0 + libm::erf(*v / std::f64::consts::SQRT_2)),
                };
            }
        }
        off += i * o + o;
        h = z;
    }
    h
}

/// Loss `sum_b sum_j c[b][j] * out[b][j]` evaluated through the scalar forward pass.
pub fn weighted_loss(net: &Mlp, params: &[f64], x: &[f64], c: &[f64]) -> f64 {
    let (din, dout) = (net.input_dim(), net.output_dim());
    x.chunks_exact(din)
        .zip(c.chunks_exact(dout))
        .map(|(row, w)| {
            let y = mlp_forward_scalar(net.sizes(), net.activation(), params, row);
            y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Largest relative error between the analytic parameter and input
/// gradients of `net` and central finite differences with step `h`.
pub fn max_gradient_error(net: &Mlp, x: &[f64], c: &[f64], h: f64, floor: f64) -> f64 {
    let batch = x.len() / net.input_dim();
    let tape = net.forward_batch(x, batch);
    let g = net.backward(&tape, c);
    let mut worst: f64 = 0.0;
    let mut p = net.params().to_vec();
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + h;
        let up = weighted_loss(net, &p, x, c);
        p[k] = orig - h;
        let down = weighted_loss(net, &p, x, c);
        p[k] = orig;
        worst = worst.max(rel_err(g.params[k], (up - down) / (2.0 * h), floor));
    }
    let mut xs = x.to_vec();
    for k in 0..xs.len() {
        let orig = xs[k];
        xs[k] = orig + h;
        let up = weighted_loss(net, &p, &xs, c);
        xs[k] = orig - h;
        let down = weighted_loss(net, &p, &xs, c);
        xs[k] = orig;
        worst = worst.max(rel_err(g.input[k], (up - down) / (2.0 * h), floor));
    }
    worst
}

/// Everything the radio and cost layers produce for one snapshot.
#[derive(Debug)]
pub struct RadioOracle {
    pub v: Vec<Vec<C64>>,
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub delta: Vec<f64>,
    pub transmission_w: f64,
    pub baseband_w: f64,
    pub total_w: f64,
}

fn cabs2(z: C64) -> f64 {
    z.re * z.re + z.im * z.im
}

/// Solves `A x = b` for complex `A` by Gauss-Jordan elimination with partial pivoting.
pub fn complex_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| cabs2(a[i][col]).total_cmp(&cabs2(a[j][col]))).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
        }
        b[col] /= d;
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for j in 0..n {
                    let t = a[col][j];
                    a[r][j] -= f * t;
                }
                let t = b[col];
                b[r] -= f * t;
            }
        }
    }
    b
}

/// Brute-force regularized zero forcing, SINR, rate, CPU fraction and
/// network energy for channel `h[n][m]` (AP `n`, user `m`).
pub fn radio_oracle(h: &[Vec<C64>], powers: &[f64], reg_noise: f64, noise_w: f64, model: &ComputeModel) -> RadioOracle {
    let n_aps = h.len();
    let n_users = powers.len();
    // A = I + sum_j h_j h_j^H / reg
    let mut a = vec![vec![C64::new(0.0, 0.0); n_aps]; n_aps];
    for r in 0..n_aps {
        a[r][r] = C64::new(1.0, 0.0);
        for c in 0..n_aps {
            for j in 0..n_users {
                a[r][c] += h[r][j] * h[c][j].conj() / reg_noise;
            }
        }
    }
    let mut v = vec![vec![C64::new(0.0, 0.0); n_users]; n_aps];
    for m in 0..n_users {
        let hm: Vec<C64> = (0..n_aps).map(|n| h[n][m]).collect();
        let u = complex_solve(a.clone(), hm);
        let norm = u.iter().map(|z| cabs2(*z)).sum::<f64>().sqrt();
        if powers[m] > 0.0 && norm > 0.0 {
            for n in 0..n_aps {
                v[n][m] = u[n] * (powers[m].sqrt() / norm);
            }
        }
    }
    // received amplitude of beam j at user m: h_m^H v_j
    let rx = |m: usize, j: usize| -> f64 {
        let mut s = C64::new(0.0, 0.0);
        for n in 0..n_aps {
            s += h[n][m].conj() * v[n][j];
        }
        cabs2(s)
    };
    let mut sinr = Vec::new();
    let mut rate = Vec::new();
    let mut delta = Vec::new();
    for m in 0..n_users {
        let signal = rx(m, m);
        let interference: f64 = (0..n_users).filter(|&j| j != m).map(|j| rx(m, j)).sum();
        let s = if signal == 0.0 { 0.0 } else { signal / (interference + noise_w) };
        let r = (1.0 + s).ln();
        let links = (0..n_aps).filter(|&n| cabs2(v[n][m]).sqrt() > model.active_link_epsilon).count();
        sinr.push(s);
        rate.push(r);
        delta.push(model.theta_hat * r + model.c0 + model.delta * links as f64);
    }
    let mut transmission_w = 0.0;
    for row in &v {
        for z in row {
            transmission_w += cabs2(*z);
        }
    }
    let demand: f64 = delta.iter().sum();
    let cpus = (demand.ceil() as usize).min(model.max_cpus);
    let vnfs = ((demand / model.vnf_capacity_cores).ceil() as usize).min(model.max_vnfs);
    let baseband_w = cpus as f64 * model.iota * model.p_z * model.p_z * model.p_z + vnfs as f64 * model.psi_vnf;
    RadioOracle { v, sinr, rate, delta, transmission_w, baseband_w, total_w: baseband_w + transmission_w }
}

/// Upper 1% critical value of the chi-square distribution by the
/// Wilson-Hilferty approximation.
pub fn chi_square_critical_1pct(df: f64) -> f64 {
    let z = 2.326_347_874_040_841; // standard normal 0.99 quantile
    let t = 2.0 / (9.0 * df);
    df * (1.0 - t + z * t.sqrt()).powi(3)
}
