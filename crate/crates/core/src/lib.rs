//! Unsupervised federated learning with two-sided knowledge distillation.
//!
//! Clients train MLP encoders on non-IID shards with a local contrastive
//! objective (SimCLR or BYOL), a local relational loss over random reference
//! batches, and global contrastive and relational losses that distill the
//! frozen aggregated model into the local one. A FedAvg server averages the
//! backbone and projection head each round.
//!
//! Modules:
//!
//! - [`numerics`]: tensors, reverse-mode autodiff, momentum SGD
//! - [`encoder`]: backbone, heads, EMA target, parameter records
//! - [`losses`]: every training objective
//! - [`data`]: datasets, Dirichlet partitioning, augmentation, batch sampling
//! - [`federation`]: local update, aggregation, round loop
//! - [`evaluation`]: linear probe, semi-supervised fine-tuning, angle analysis
//! - [`cli`]: run configuration, checkpoints and the `fedx` subcommands
//!
//! See the crate's `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod federation;
pub mod losses;
pub mod numerics;

pub use error::{Error, Result};
