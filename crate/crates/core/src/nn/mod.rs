//! Dense feed-forward networks with exact reverse-mode gradients and Adam.
//!
//! Batches are row-major `B × d` matrices. All arithmetic is `f64` and
//! single-threaded, so identical inputs give bit-identical outputs.

mod adam;
pub mod codec;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{
    backward, backward_from_logits, forward, grad_check, predict, relative_error, Activation, Dense,
    Gradients, Mlp, MlpParams, MlpSpec, OutputActivation, Tape,
};
pub(crate) use mlp::sigmoid;
