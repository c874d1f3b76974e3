//! BYOL-style local training (predictor head and EMA target) with and
//! without two-sided distillation.
//!
//! Run with `cargo run --release --example byol`.

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};
use fedx::encoder::EncoderDescriptor;
use fedx::evaluation::{linear_evaluate, LinearEvalConfig};
use fedx::federation::{run_training, FederationConfig, Method};

fn main() -> fedx::Result<()> {
    let images = SyntheticImages::new(SyntheticConfig::default());
    let train = images.generate(200, 1)?;
    let test = images.generate(50, 2)?;
    let descriptor = EncoderDescriptor::mlp(train.sample_dim()).with_predictor(true);
    for fedx in [false, true] {
        let cfg = FederationConfig {
            clients: 5,
            rounds: 5,
            local_epochs: 2,
            method: Method::Byol,
            fedx,
            ..FederationConfig::default()
        };
        let partition = dirichlet_partition(&train, cfg.clients, 0.5, 0, cfg.min_client_size())?;
        let out = run_training::<f32, _>(&cfg, &descriptor, &train, &partition, |m, _| {
            println!("  round {} loss {:.4}", m.round, m.loss_total);
            Ok(())
        })?;
        let top1 = linear_evaluate(&out.global, &train, &test, &LinearEvalConfig::default())?.top1;
        println!(
            "FedBYOL{}: linear top-1 {top1:.3}",
            if fedx { "+FedX" } else { "" }
        );
    }
    Ok(())
}
