//! Run configuration, checkpoints, metrics files and the `fedx` subcommands.

mod args;
mod checkpoint;
mod commands;
mod config;
mod metrics;

pub use args::{
    AnglesArgs, Cli, Command, DatasetArgs, EvalArgs, EvalMode, PartitionArgs, TrainArgs,
};
pub use checkpoint::{
    decode_checkpoint, decode_manifest, encode_checkpoint, load_checkpoint, save_checkpoint,
    CheckpointEntry, CheckpointManifest, LoadedModel,
};
pub use commands::{cmd_angles, cmd_eval, cmd_partition, cmd_train, exit_code, run, TrainSummary};
pub use config::{
    DatasetSettings, EncoderSettings, EvalSettings, OutputSettings, PartitionSettings, Precision,
    RunConfig, OUTPUT_DIR_ENV,
};
pub use metrics::{read_metrics, MetricsRecord, MetricsSink};
