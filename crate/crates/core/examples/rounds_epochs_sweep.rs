//! Fixed training budget split between communication rounds and local
//! epochs (R × E = 40).
//!
//! Run with `cargo run --release --example rounds_epochs_sweep`.

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};
use fedx::encoder::EncoderDescriptor;
use fedx::evaluation::{linear_evaluate, LinearEvalConfig};
use fedx::federation::{run_training, FederationConfig};

fn main() -> fedx::Result<()> {
    let images = SyntheticImages::new(SyntheticConfig::default());
    let train = images.generate(300, 1)?;
    let test = images.generate(100, 2)?;
    let descriptor = EncoderDescriptor::mlp(train.sample_dim());
    println!("{:>3} {:>3} {:>8}", "R", "E", "top-1");
    for (rounds, local_epochs) in [(40, 1), (20, 2), (10, 4), (4, 10)] {
        let cfg = FederationConfig {
            clients: 10,
            rounds,
            local_epochs,
            batch_size: 64,
            ..FederationConfig::default()
        };
        let partition = dirichlet_partition(&train, cfg.clients, 0.5, 0, cfg.min_client_size())?;
        let out = run_training::<f32, _>(&cfg, &descriptor, &train, &partition, |_, _| Ok(()))?;
        let top1 = linear_evaluate(&out.global, &train, &test, &LinearEvalConfig::default())?.top1;
        println!("{rounds:>3} {local_epochs:>3} {top1:>8.3}");
    }
    Ok(())
}
