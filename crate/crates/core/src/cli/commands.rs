use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::data::{dirichlet_partition, load_dataset, Dataset, DatasetFormat, PartitionSpec};
use crate::encoder::ModelParams;
use crate::error::{Error, Result};
use crate::evaluation::{angle_report, linear_evaluate, semi_supervised_finetune, EvalReport};
use crate::federation::{run_training, FederationConfig};
use crate::numerics::Real;

use super::args::{
    AnglesArgs, Cli, Command, DatasetArgs, EvalArgs, EvalMode, PartitionArgs, TrainArgs,
};
use super::checkpoint::{save_checkpoint, LoadedModel};
use super::config::{Precision, RunConfig};
use super::metrics::{MetricsRecord, MetricsSink};

/// Process exit status for an error: 2 configuration, 3 dataset,
/// 4 divergence, 5 descriptor mismatch, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Dataset(_) | Error::Partition(_) | Error::Csv(_) => 3,
        Error::Divergence { .. } => 4,
        Error::DescriptorMismatch(_) => 5,
        _ => 1,
    }
}

/// Dispatches a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a).map(|s| {
            println!(
                "trained {} rounds; final global model {}",
                s.rounds,
                s.final_checkpoint.display()
            );
        }),
        Command::Eval(a) => cmd_eval(&a).map(|r| println!("top-1 {:.4} ({} mode)", r.top1, r.mode)),
        Command::Partition(a) => cmd_partition(&a).map(|_| ()),
        Command::Angles(a) => cmd_angles(&a).map(|r| {
            println!(
                "mean local-global angle {:.2} deg, mean inter-class angle {:.2} deg",
                r.mean_angle_deg, r.mean_inter_class_deg
            )
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Loads a dataset, reporting any failure as a dataset error naming the path.
fn read_dataset(
    path: &Path,
    format: Option<DatasetFormat>,
    shape: Option<(usize, usize, usize)>,
) -> Result<Dataset> {
    let format = format.unwrap_or_else(|| DatasetFormat::from_path(path));
    let shown = path.display().to_string();
    load_dataset(path, format, shape).map_err(|e| match e {
        Error::Dataset(msg) if msg.contains(&shown) => Error::Dataset(msg),
        e @ Error::Io { .. } => Error::Dataset(e.to_string()),
        other => Error::Dataset(format!("{shown}: {other}")),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Artifacts of a finished training run.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub rounds: usize,
    pub metrics: PathBuf,
    pub final_checkpoint: PathBuf,
    pub resolved_config: PathBuf,
}

fn train_overrides(args: &TrainArgs) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            out.push((key.to_string(), v));
        }
    };
    flag(
        "dataset.path",
        args.dataset
            .as_ref()
            .map(|p| toml_string(&p.display().to_string())),
    );
    flag("federation.rounds", args.rounds.map(|v| v.to_string()));
    flag(
        "federation.local_epochs",
        args.local_epochs.map(|v| v.to_string()),
    );
    flag("federation.clients", args.clients.map(|v| v.to_string()));
    flag("federation.seed", args.seed.map(|v| v.to_string()));
    flag("federation.workers", args.workers.map(|v| v.to_string()));
    flag(
        "output.dir",
        args.output
            .as_ref()
            .map(|p| toml_string(&p.display().to_string())),
    );
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// `fedx train`: resolves the configuration, partitions the dataset and runs
/// every round, streaming metrics and checkpoints into the output directory.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let cfg = RunConfig::resolve(args.config.as_deref(), &train_overrides(args)?)?;
    let path = cfg.dataset.path.clone().ok_or_else(|| {
        Error::Config("no dataset path (set dataset.path or pass --dataset)".into())
    })?;
    let dataset = read_dataset(&path, cfg.dataset.format, cfg.dataset.shape_tuple())?;
    cfg.federation.augment.validate(dataset.shape())?;

    let dir = cfg.output.dir.clone();
    create_dir(&dir.join("checkpoints"))?;
    let resolved = dir.join("resolved_config.toml");
    fs::write(&resolved, cfg.to_toml()?).map_err(|e| Error::io(&resolved, e))?;

    let partition = match &cfg.partition.file {
        Some(file) => PartitionSpec::load(file)?,
        None => dirichlet_partition(
            &dataset,
            cfg.federation.clients,
            cfg.partition.beta,
            cfg.partition.seed,
            cfg.federation.min_client_size(),
        )?,
    };
    partition.save(&dir.join("partition.json"))?;
    info!("{}", partition.summary(&dataset));

    match cfg.output.precision {
        Precision::F32 => train_in::<f32>(&cfg, &dataset, &partition, &dir, resolved),
        Precision::F64 => train_in::<f64>(&cfg, &dataset, &partition, &dir, resolved),
    }
}

fn train_in<T: Real>(
    cfg: &RunConfig,
    dataset: &Dataset,
    partition: &PartitionSpec,
    dir: &Path,
    resolved_config: PathBuf,
) -> Result<TrainSummary> {
    let fed: &FederationConfig = &cfg.federation;
    let descriptor = cfg.encoder.descriptor(dataset.sample_dim(), fed.method);
    let config_hash = cfg.hash()?;
    let metrics = dir.join("metrics.jsonl");
    let mut sink = MetricsSink::create(&metrics)?;
    let outcome = run_training::<T, _>(fed, &descriptor, dataset, partition, |m, global| {
        sink.write(&MetricsRecord::from(m))?;
        let done = m.round + 1;
        if done % cfg.output.checkpoint_every == 0 && done < fed.rounds {
            let path = dir
                .join("checkpoints")
                .join(format!("global_round_{done:04}.fxck"));
            save_checkpoint(&path, global, done, &config_hash)?;
        }
        Ok(())
    })?;
    let final_checkpoint = dir.join("checkpoints").join("global_final.fxck");
    save_checkpoint(&final_checkpoint, &outcome.global, fed.rounds, &config_hash)?;
    if cfg.output.save_clients {
        let clients_dir = dir.join("clients");
        create_dir(&clients_dir)?;
        for c in &outcome.clients {
            let path = clients_dir.join(format!("client_{:02}.fxck", c.id));
            save_checkpoint(&path, &c.model, fed.rounds, &config_hash)?;
        }
    }
    Ok(TrainSummary {
        output_dir: dir.to_path_buf(),
        rounds: outcome.metrics.len(),
        metrics,
        final_checkpoint,
        resolved_config,
    })
}

fn check_input_dim(model: &LoadedModel, dataset: &Dataset, path: &Path) -> Result<()> {
    let want = model.descriptor().input_dim;
    if want != dataset.sample_dim() {
        return Err(Error::DescriptorMismatch(format!(
            "checkpoint encoder takes {want} inputs but {} has samples of {}",
            path.display(),
            dataset.sample_dim()
        )));
    }
    Ok(())
}

fn evaluate_in<T: Real>(
    model: &ModelParams<T>,
    train: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
    args: &EvalArgs,
) -> Result<EvalReport> {
    match args.mode {
        EvalMode::Linear => {
            let mut lin = cfg.eval.linear.clone();
            lin.epochs = args.epochs.unwrap_or(lin.epochs);
            lin.seed = args.seed.unwrap_or(lin.seed);
            linear_evaluate(model, train, test, &lin)
        }
        EvalMode::Semi => {
            let mut ft = cfg.eval.finetune.clone();
            ft.epochs = args.epochs.unwrap_or(ft.epochs);
            ft.seed = args.seed.unwrap_or(ft.seed);
            ft.label_ratio = args.label_ratio.unwrap_or(ft.label_ratio);
            semi_supervised_finetune(model, train, test, &ft)
        }
    }
}

/// `fedx eval`: scores a checkpoint and writes the report as JSON.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let cfg = RunConfig::resolve(args.config.as_deref(), &[])?;
    let train_path = args
        .train
        .clone()
        .or_else(|| cfg.dataset.path.clone())
        .ok_or_else(|| Error::Config("no training split (pass --train)".into()))?;
    let test_path = args
        .test
        .clone()
        .or_else(|| cfg.dataset.test_path.clone())
        .ok_or_else(|| Error::Config("no test split (pass --test)".into()))?;
    let format = args.data.format.or(cfg.dataset.format);
    let shape = args.data.shape.or(cfg.dataset.shape_tuple());
    let (model, _) = LoadedModel::load(&args.checkpoint)?;
    let train = read_dataset(&train_path, format, shape)?;
    let test = read_dataset(&test_path, format, shape)?;
    check_input_dim(&model, &train, &train_path)?;
    check_input_dim(&model, &test, &test_path)?;
    let report = match &model {
        LoadedModel::F32(m) => evaluate_in(m, &train, &test, &cfg, args)?,
        LoadedModel::F64(m) => evaluate_in(m, &train, &test, &cfg, args)?,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        let name = match args.mode {
            EvalMode::Linear => "eval_linear.json",
            EvalMode::Semi => "eval_semi.json",
        };
        args.checkpoint.with_file_name(name)
    });
    write_json(&out, &report)?;
    Ok(report)
}

fn dataset_of(path: &Path, data: &DatasetArgs) -> Result<Dataset> {
    read_dataset(path, data.format, data.shape)
}

/// `fedx partition`: draws a partition, prints its summary and optionally saves it.
pub fn cmd_partition(args: &PartitionArgs) -> Result<PartitionSpec> {
    let dataset = dataset_of(&args.dataset, &args.data)?;
    let spec = dirichlet_partition(&dataset, args.clients, args.beta, args.seed, args.min_size)?;
    let summary = spec.summary(&dataset);
    if args.inspect {
        println!("{summary}");
    } else {
        println!(
            "{} clients, sizes {:?}, mean max class share {:.3}",
            summary.clients,
            summary.client_sizes,
            summary.mean_max_class_share()
        );
    }
    if let Some(out) = &args.out {
        spec.save(out)?;
    }
    Ok(spec)
}

/// `fedx angles`: local-vs-global and inter-class angle analysis, written as JSON.
pub fn cmd_angles(args: &AnglesArgs) -> Result<crate::evaluation::AngleReport> {
    let dataset = dataset_of(&args.dataset, &args.data)?;
    let (local, _) = LoadedModel::load(&args.local)?;
    let (global, _) = LoadedModel::load(&args.global)?;
    if local.descriptor() != global.descriptor() {
        return Err(Error::DescriptorMismatch(format!(
            "{} and {} hold different encoders",
            args.local.display(),
            args.global.display()
        )));
    }
    check_input_dim(&local, &dataset, &args.dataset)?;
    let report = match (&local, &global) {
        (LoadedModel::F32(l), LoadedModel::F32(g)) => angle_report(l, g, &dataset)?,
        (LoadedModel::F64(l), LoadedModel::F64(g)) => angle_report(l, g, &dataset)?,
        (l, g) => {
            warn!("checkpoints differ in precision; comparing in f64");
            angle_report(&l.to_f64(), &g.to_f64(), &dataset)?
        }
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.local.with_file_name("angles.json"));
    write_json(&out, &report)?;
    Ok(report)
}
