//! Federated training on a synthetic non-IID image set, with and without
//! two-sided distillation, scored by a linear probe.
//!
//! Run with `cargo run --release --example federated_training`.

use std::time::Instant;

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};
use fedx::encoder::EncoderDescriptor;
use fedx::evaluation::{linear_evaluate, LinearEvalConfig};
use fedx::federation::{run_training, FederationConfig};

fn main() -> fedx::Result<()> {
    env_logger::init();
    let images = SyntheticImages::new(SyntheticConfig::default());
    let train = images.generate(500, 1)?;
    let test = images.generate(100, 2)?;
    let descriptor = EncoderDescriptor::mlp(train.sample_dim());

    for fedx in [false, true] {
        let cfg = FederationConfig {
            clients: 10,
            rounds: 20,
            local_epochs: 2,
            fedx,
            seed: 7,
            ..FederationConfig::default()
        };
        let partition =
            dirichlet_partition(&train, cfg.clients, 0.5, cfg.seed, cfg.min_client_size())?;
        let start = Instant::now();
        let outcome = run_training::<f32, _>(&cfg, &descriptor, &train, &partition, |m, _| {
            println!(
                "  round {:2}  local_c {:.4}  local_r {:.4}  global_c {:.4}  global_r {:.4}",
                m.round, m.losses.local_c, m.losses.local_r, m.losses.global_c, m.losses.global_r
            );
            Ok(())
        })?;
        let trained = start.elapsed();
        let report = linear_evaluate(&outcome.global, &train, &test, &LinearEvalConfig::default())?;
        println!(
            "{}: linear top-1 {:.3} (training {:.1}s)",
            if fedx { "FedSimCLR+FedX" } else { "FedSimCLR" },
            report.top1,
            trained.as_secs_f64()
        );
    }
    Ok(())
}
