//! Dense tensors, reverse-mode differentiation and momentum SGD.

mod functional;
mod graph;
mod real;
mod sgd;
mod tensor;

pub use functional::{cosine_similarity, kl_divergence, softmax_with_temperature};
pub use graph::{Activation, Gradients, Graph, Var};
pub use real::{Dtype, Real};
pub use sgd::{sgd_step, SgdConfig, SgdState};
pub use tensor::Tensor;
