//! Dense-network machinery: multilayer perceptrons with exact reverse-mode
//! gradients, ADAM, and reparameterized squashed-Gaussian sampling.

mod adam;
mod gemm;
mod mlp;
mod squashed;

pub use adam::{clip_global_norm, AdamState};
pub use mlp::{gelu, gelu_derivative, Activation, Gradients, Mlp, Tape};
pub use squashed::{
    reparam_grads, sample_squashed_gaussian, SquashedSample, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS,
};
