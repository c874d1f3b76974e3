//! Datasets, non-IID partitioning, augmentation and batch sampling.

mod augment;
mod batches;
mod dataset;
mod io;
mod partition;
pub mod synthetic;

pub use augment::{augment_view, AugmentPolicy};
pub use batches::{sample_batches, BatchSampler, EpochBatches, TrainBatch};
pub use dataset::Dataset;
pub use io::{
    decode_fxds, encode_fxds, load_dataset, read_csv, read_fxds, write_csv, write_fxds,
    DatasetFormat,
};
pub use partition::{
    dirichlet_partition, largest_remainder, PartitionSpec, PartitionSummary, MAX_PARTITION_RETRIES,
};
pub use synthetic::{SyntheticConfig, SyntheticImages};
