use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use crate::codec::{self, ByteReader, ByteWriter};
use crate::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"NSLMLP\0\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => gelu(x),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => gelu_derivative(x),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Gelu),
            t => Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
        }
    }
}

/// Exact GELU, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `Phi(x) + x * phi(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// A fully connected network. Hidden layers are affine then activation;
/// the last layer is affine only.
///
/// Parameters live in one flat vector, layer by layer: the `out x in`
/// row-major weight matrix followed by the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Cached activations of a batched forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    /// Input of each layer (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer; the last one is the network output.
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// `batch x output_dim`, row-major.
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("network has at least one layer")
    }

    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    /// `batch x input_dim`, row-major.
    pub input: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`; the last layer is
    /// additionally multiplied by `final_scale`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        final_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        let n_layers = net.n_layers();
        let mut off = 0;
        for (k, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if k + 1 == n_layers { final_scale } else { 1.0 };
            for p in &mut net.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.random_range(-bound..=bound) * scale;
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Contract(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        if params.len() != net.params.len() {
            return Err(Error::Contract(format!(
                "{} parameters for layer sizes {sizes:?} (need {})",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offset(&self, k: usize) -> usize {
        param_count(&self.sizes[..=k])
    }

    /// `(weights, bias)` of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.sizes[k], self.sizes[k + 1]);
        let off = self.layer_offset(k);
        (&self.params[off..off + i * o], &self.params[off + i * o..off + i * o + o])
    }

    pub fn layer_mut(&mut self, k: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.sizes[k], self.sizes[k + 1]);
        let off = self.layer_offset(k);
        let (w, rest) = self.params[off..off + i * o + o].split_at_mut(i * o);
        (w, rest)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Single-sample evaluation.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_batch(input, 1).output().to_vec()
    }

    /// Batched evaluation over `batch` row-major inputs.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Tape {
        assert_eq!(
            input.len(),
            batch * self.input_dim(),
            "input length does not match batch x input width"
        );
        let n_layers = self.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        inputs.push(input.to_vec());
        for k in 0..n_layers {
            let (i, o) = (self.sizes[k], self.sizes[k + 1]);
            let (w, b) = self.layer(k);
            let mut z = Vec::with_capacity(batch * o);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            gemm(batch, i, o, View::rows(&inputs[k], i), View::transposed(w, i), 1.0, &mut z);
            if k + 1 < n_layers {
                let act = self.activation;
                inputs.push(z.iter().map(|&x| act.apply(x)).collect());
            }
            pre.push(z);
        }
        Tape { batch, inputs, pre }
    }

    /// Reverse-mode gradients of a scalar loss whose gradient with respect
    /// to the network output is `d_output` (`batch x output_dim`).
    pub fn backward(&self, tape: &Tape, d_output: &[f64]) -> Gradients {
        self.backprop(tape, d_output, true)
    }

    /// Gradient with respect to the input only (parameters treated as constants).
    pub fn input_gradient(&self, tape: &Tape, d_output: &[f64]) -> Vec<f64> {
        self.backprop(tape, d_output, false).input
    }

    fn backprop(&self, tape: &Tape, d_output: &[f64], want_params: bool) -> Gradients {
        let batch = tape.batch;
        assert_eq!(d_output.len(), batch * self.output_dim(), "upstream gradient shape mismatch");
        let mut grads = if want_params { vec![0.0; self.params.len()] } else { Vec::new() };
        let mut dz = d_output.to_vec();
        for k in (0..self.n_layers()).rev() {
            let (i, o) = (self.sizes[k], self.sizes[k + 1]);
            let (w, _) = self.layer(k);
            if want_params {
                let off = self.layer_offset(k);
                let (gw, gb) = grads[off..off + i * o + o].split_at_mut(i * o);
                gemm(o, batch, i, View::transposed(&dz, o), View::rows(&tape.inputs[k], i), 0.0, gw);
                for row in dz.chunks_exact(o) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            let mut dx = vec![0.0; batch * i];
            gemm(batch, o, i, View::rows(&dz, o), View::rows(w, i), 0.0, &mut dx);
            if k > 0 {
                let act = self.activation;
                for (d, &z) in dx.iter_mut().zip(&tape.pre[k - 1]) {
                    *d *= act.derivative(z);
                }
            }
            dz = dx;
        }
        Gradients { params: grads, input: dz }
    }

    /// `self <- tau * online + (1 - tau) * self`, parameter by parameter.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.sizes, online.sizes, "Polyak blend between different shapes");
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u32(self.sizes.len() as u32);
        for s in &self.sizes {
            w.u32(*s as u32);
        }
        w.u8(self.activation.tag());
        w.f64s(&self.params);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let n = r.u32()? as usize;
        if !(2..=1024).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let activation = Activation::from_tag(r.u8()?)?;
        let params = r.f64s()?;
        Mlp::from_params(&sizes, activation, params).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Standalone checkpoint: checksummed container around layer sizes,
    /// activation tag and little-endian `f64` parameters.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        codec::seal(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &w.into_bytes())
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let (_, payload) = codec::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let mut r = ByteReader::new(payload);
        let net = Self::read(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after network".into()));
        }
        Ok(net)
    }
}
