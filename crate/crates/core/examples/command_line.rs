//! The `fedx` command-line workflow driven from code: write a dataset, train
//! from a TOML config, then evaluate and inspect the checkpoints.
//!
//! Run with `cargo run --release --example command_line`. The same steps from
//! a shell:
//!
//! ```text
//! fedx train --config run.toml --dataset train.fxds --rounds 3
//! fedx eval --checkpoint runs/demo/checkpoints/global_final.fxck --train train.fxds --test test.fxds
//! fedx partition --dataset train.fxds --clients 4 --beta 0.3 --inspect
//! fedx angles --local runs/demo/clients/client_00.fxck --global runs/demo/checkpoints/global_final.fxck --dataset test.fxds
//! ```

use clap::Parser;
use fedx::cli::{load_checkpoint, read_metrics, run, Cli};
use fedx::data::{write_fxds, SyntheticConfig, SyntheticImages};

const CONFIG: &str = r#"
[federation]
clients = 4
local_epochs = 1
batch_size = 32
seed = 3

[encoder]
hidden = [128]

[output]
checkpoint_every = 1
"#;

fn fedx(args: &[&str]) {
    let cli = Cli::parse_from(std::iter::once("fedx").chain(args.iter().copied()));
    let code = run(cli);
    assert_eq!(code, 0, "fedx {args:?} exited with {code}");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("fedx-command-line-example");
    std::fs::create_dir_all(&dir)?;
    let path = |name: &str| dir.join(name).display().to_string();

    let images = SyntheticImages::new(SyntheticConfig::default());
    write_fxds(&dir.join("train.fxds"), &images.generate(60, 1)?)?;
    write_fxds(&dir.join("test.fxds"), &images.generate(20, 2)?)?;
    std::fs::write(dir.join("run.toml"), CONFIG)?;

    let out = path("run");
    fedx(&[
        "train",
        "--config",
        &path("run.toml"),
        "--dataset",
        &path("train.fxds"),
        "--rounds",
        "3",
        "--output",
        &out,
    ]);
    for r in read_metrics(&dir.join("run/metrics.jsonl"))? {
        println!("round {} total loss {:.4}", r.round, r.loss_total);
    }
    let global = path("run/checkpoints/global_final.fxck");
    let (_, manifest) = load_checkpoint::<f32>(global.as_ref())?;
    println!(
        "checkpoint: round {}, {} tensors, dtype {:?}",
        manifest.round,
        manifest.entries.len(),
        manifest.dtype
    );

    fedx(&[
        "eval",
        "--checkpoint",
        &global,
        "--train",
        &path("train.fxds"),
        "--test",
        &path("test.fxds"),
        "--epochs",
        "20",
    ]);
    fedx(&[
        "eval",
        "--checkpoint",
        &global,
        "--train",
        &path("train.fxds"),
        "--test",
        &path("test.fxds"),
        "--mode",
        "semi",
        "--label-ratio",
        "0.1",
        "--epochs",
        "20",
    ]);
    fedx(&[
        "partition",
        "--dataset",
        &path("train.fxds"),
        "--clients",
        "4",
        "--beta",
        "0.3",
        "--inspect",
    ]);
    fedx(&[
        "angles",
        "--local",
        &path("run/clients/client_00.fxck"),
        "--global",
        &global,
        "--dataset",
        &path("test.fxds"),
    ]);
    println!("artifacts in {}", dir.display());
    Ok(())
}
