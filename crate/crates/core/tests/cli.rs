use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use fedx::cli::{
    cmd_angles, cmd_eval, cmd_partition, cmd_train, exit_code, load_checkpoint, read_metrics, Cli,
    Command,
};
use fedx::data::{write_fxds, PartitionSpec, SyntheticConfig, SyntheticImages};
use fedx::Error;

const SMALL: &str = r#"
[federation]
clients = 2
batch_size = 32
record_wall_time = false

[encoder]
hidden = [32]
embed_dim = 16
head_hidden = 16

[output]
checkpoint_every = 1
"#;

fn fixture(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let gen = SyntheticImages::new(SyntheticConfig {
        classes: 4,
        size: 6,
        ..SyntheticConfig::default()
    });
    let train = dir.join("train.fxds");
    let test = dir.join("test.fxds");
    write_fxds(&train, &gen.generate(24, 1).unwrap()).unwrap();
    write_fxds(&test, &gen.generate(8, 2).unwrap()).unwrap();
    let config = dir.join("run.toml");
    std::fs::write(&config, SMALL).unwrap();
    (train, test, config)
}

fn parse(args: &[&str]) -> Command {
    Cli::try_parse_from(std::iter::once("fedx").chain(args.iter().copied()))
        .unwrap()
        .command
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(config: &Path, data: &Path, out: &Path) -> fedx::cli::TrainSummary {
    let Command::Train(args) = parse(&[
        "train",
        "--config",
        s(config),
        "--dataset",
        s(data),
        "--rounds",
        "2",
        "--local-epochs",
        "1",
        "--output",
        s(out),
    ]) else {
        unreachable!()
    };
    cmd_train(&args).unwrap()
}

#[test]
fn missing_dataset_exits_3_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.fxds");
    let Command::Train(args) =
        parse(&["train", "--dataset", s(&missing), "--output", s(dir.path())])
    else {
        unreachable!()
    };
    let err = cmd_train(&args).unwrap_err();
    assert!(matches!(err, Error::Dataset(_)));
    assert_eq!(exit_code(&err), 3);
    assert!(err.to_string().contains("nowhere.fxds"), "{err}");

    let out = Process::new(env!("CARGO_BIN_EXE_fedx"))
        .args(["train", "--dataset", s(&missing), "--output", s(dir.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.fxds"));
}

#[test]
fn bad_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let Command::Train(args) = parse(&[
        "train",
        "--set",
        "federation.no_such_key=1",
        "--output",
        s(dir.path()),
    ]) else {
        unreachable!()
    };
    assert_eq!(exit_code(&cmd_train(&args).unwrap_err()), 2);
}

#[test]
fn train_writes_resolved_config_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, config) = fixture(dir.path());
    let a = train(&config, &data, &dir.path().join("a"));
    let resolved = std::fs::read_to_string(&a.resolved_config).unwrap();
    let table: toml::Table = resolved.parse().unwrap();
    assert_eq!(table["federation"]["rounds"].as_integer(), Some(2));
    assert_eq!(table["federation"]["local_epochs"].as_integer(), Some(1));
    assert_eq!(table["federation"]["clients"].as_integer(), Some(2));

    let records = read_metrics(&a.metrics).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records
        .iter()
        .all(|r| r.loss_total.is_finite() && r.wall_ms == 0));
    assert!(a.final_checkpoint.exists());
    assert!(a
        .output_dir
        .join("checkpoints/global_round_0001.fxck")
        .exists());
    assert!(a.output_dir.join("clients/client_01.fxck").exists());
    PartitionSpec::load(&a.output_dir.join("partition.json")).unwrap();

    let b = train(&config, &data, &dir.path().join("b"));
    assert!(std::fs::read(&a.metrics).unwrap() == std::fs::read(&b.metrics).unwrap());
    // the config hash covers the output directory, so compare parameters only
    let (ga, _) = load_checkpoint::<f32>(&a.final_checkpoint).unwrap();
    let (gb, _) = load_checkpoint::<f32>(&b.final_checkpoint).unwrap();
    assert!(ga == gb);
}

#[test]
fn eval_is_deterministic_and_semi_records_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let (data, test, config) = fixture(dir.path());
    let run = train(&config, &data, &dir.path().join("run"));
    let ckpt = s(&run.final_checkpoint);
    let eval = |extra: &[&str]| {
        let mut argv = vec![
            "eval",
            "--checkpoint",
            ckpt,
            "--train",
            s(&data),
            "--test",
            s(&test),
            "--epochs",
            "5",
        ];
        argv.extend_from_slice(extra);
        let Command::Eval(args) = parse(&argv) else {
            unreachable!()
        };
        cmd_eval(&args).unwrap()
    };
    let a = eval(&[]);
    let b = eval(&[]);
    assert_eq!(a.top1, b.top1);
    assert_eq!(a.mode, "linear");
    assert!(run.output_dir.join("checkpoints/eval_linear.json").exists());

    let semi = eval(&["--mode", "semi", "--label-ratio", "0.25"]);
    assert_eq!(semi.label_ratio, 0.25);
    assert_eq!(semi.labeled_samples, 24);
    let written: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run.output_dir.join("checkpoints/eval_semi.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(written["label_ratio"], 0.25);
}

#[test]
fn eval_rejects_mismatched_input_dim() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, config) = fixture(dir.path());
    let run = train(&config, &data, &dir.path().join("run"));
    let other = dir.path().join("other.fxds");
    let gen = SyntheticImages::new(SyntheticConfig {
        classes: 4,
        size: 5,
        ..SyntheticConfig::default()
    });
    write_fxds(&other, &gen.generate(4, 0).unwrap()).unwrap();
    let Command::Eval(args) = parse(&[
        "eval",
        "--checkpoint",
        s(&run.final_checkpoint),
        "--train",
        s(&other),
        "--test",
        s(&other),
    ]) else {
        unreachable!()
    };
    assert_eq!(exit_code(&cmd_eval(&args).unwrap_err()), 5);
}

#[test]
fn partition_single_client_and_saved_file() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, _) = fixture(dir.path());
    let out = dir.path().join("p.json");
    let Command::Partition(args) = parse(&[
        "partition",
        "--dataset",
        s(&data),
        "--clients",
        "1",
        "--out",
        s(&out),
    ]) else {
        unreachable!()
    };
    let spec = cmd_partition(&args).unwrap();
    assert_eq!(spec.client_indices, vec![(0..96).collect::<Vec<_>>()]);
    assert_eq!(PartitionSpec::load(&out).unwrap(), spec);

    let Command::Partition(args) = parse(&["partition", "--dataset", s(&data), "--clients", "500"])
    else {
        unreachable!()
    };
    assert_eq!(exit_code(&cmd_partition(&args).unwrap_err()), 3);
}

#[test]
fn same_checkpoint_twice_gives_zero_angles() {
    let dir = tempfile::tempdir().unwrap();
    let (data, test, config) = fixture(dir.path());
    let run = train(&config, &data, &dir.path().join("run"));
    let ckpt = s(&run.final_checkpoint);
    let Command::Angles(args) = parse(&[
        "angles",
        "--local",
        ckpt,
        "--global",
        ckpt,
        "--dataset",
        s(&test),
    ]) else {
        unreachable!()
    };
    let report = cmd_angles(&args).unwrap();
    assert!(report.per_sample.iter().all(|a| *a == 0.0));
    assert_eq!(report.mean_angle_deg, 0.0);
    assert!(run.output_dir.join("checkpoints/angles.json").exists());

    let client = run.output_dir.join("clients/client_00.fxck");
    let Command::Angles(args) = parse(&[
        "angles",
        "--local",
        s(&client),
        "--global",
        ckpt,
        "--dataset",
        s(&test),
    ]) else {
        unreachable!()
    };
    assert!(cmd_angles(&args).unwrap().mean_angle_deg > 0.0);
}
