//! How far client models drift from the global model, with and without
//! distillation, and how well separated their class prototypes are.
//!
//! Run with `cargo run --release --example angles`.

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};
use fedx::encoder::EncoderDescriptor;
use fedx::evaluation::angle_report;
use fedx::federation::{run_training, FederationConfig};

fn main() -> fedx::Result<()> {
    let images = SyntheticImages::new(SyntheticConfig::default());
    let train = images.generate(200, 1)?;
    let test = images.generate(50, 2)?;
    let descriptor = EncoderDescriptor::mlp(train.sample_dim());
    for fedx in [false, true] {
        let cfg = FederationConfig {
            clients: 5,
            rounds: 5,
            local_epochs: 2,
            fedx,
            angle_probe: 200,
            ..FederationConfig::default()
        };
        let partition = dirichlet_partition(&train, cfg.clients, 0.5, 0, cfg.min_client_size())?;
        let out = run_training::<f32, _>(&cfg, &descriptor, &train, &partition, |m, _| {
            println!(
                "  round {} mean local-global angle {:.2}",
                m.round,
                m.mean_angle_deg.unwrap_or(f64::NAN)
            );
            Ok(())
        })?;
        let report = angle_report(&out.clients[0].model, &out.global, &test)?;
        println!("fedx={fedx}: client 0 vs global on the test set");
        for s in &report.per_class {
            println!(
                "  class {} mean {:6.2} median {:6.2} max {:6.2}",
                s.class, s.mean, s.median, s.max
            );
        }
        println!(
            "  mean inter-class prototype angle {:.2}",
            report.mean_inter_class_deg
        );
    }
    Ok(())
}
