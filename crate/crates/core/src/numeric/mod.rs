//! Small dense numerical kernel: matrices, MLPs, attention, a reverse-mode
//! tape, Adam and finite-difference gradient checking.

mod adam;
mod attention;
mod gradcheck;
mod matrix;
mod mlp;
mod tape;

pub use adam::AdamState;
pub use attention::{attention_fuse, attention_weights_and_output, record_attention};
pub use gradcheck::{gradient_check, gradient_check_report, GradCheckReport};
pub use matrix::{dot, DenseMatrix};
pub use mlp::{sigmoid, Activation, Layer, MlpParams, MlpVars};
pub use tape::{softmax, Gradients, Tape, Var};

/// Lower bound applied to probabilities that feed a logarithm.
pub const PROB_EPS: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}
