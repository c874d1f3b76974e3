//! Linear probing and semi-supervised fine-tuning of a briefly trained
//! federated encoder, next to an untrained one.
//!
//! Run with `cargo run --release --example evaluation`.

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};
use fedx::encoder::{build_encoder, EncoderDescriptor, ModelParams};
use fedx::evaluation::{
    linear_evaluate, semi_supervised_finetune, FinetuneConfig, LinearEvalConfig,
};
use fedx::federation::{run_training, FederationConfig};

fn main() -> fedx::Result<()> {
    let images = SyntheticImages::new(SyntheticConfig::default());
    let train = images.generate(200, 1)?;
    let test = images.generate(50, 2)?;
    let descriptor = EncoderDescriptor::mlp(train.sample_dim());
    let cfg = FederationConfig {
        clients: 5,
        rounds: 5,
        local_epochs: 2,
        ..FederationConfig::default()
    };
    let partition = dirichlet_partition(&train, cfg.clients, 0.5, 0, cfg.min_client_size())?;
    let trained =
        run_training::<f32, _>(&cfg, &descriptor, &train, &partition, |_, _| Ok(()))?.global;
    let untrained: ModelParams<f32> = build_encoder(&descriptor, 0)?;

    for (name, model) in [("untrained", &untrained), ("federated", &trained)] {
        let linear = linear_evaluate(model, &train, &test, &LinearEvalConfig::default())?;
        println!("{name}: linear top-1 {:.3}", linear.top1);
        for ratio in [0.01, 0.1] {
            let ft = FinetuneConfig {
                label_ratio: ratio,
                epochs: 30,
                ..FinetuneConfig::default()
            };
            let report = semi_supervised_finetune(model, &train, &test, &ft)?;
            println!(
                "  fine-tuned on {} labels (rho={ratio}): top-1 {:.3}",
                report.labeled_samples, report.top1
            );
        }
    }
    Ok(())
}
