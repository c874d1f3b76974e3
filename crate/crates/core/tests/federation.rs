use fedx::data::{dirichlet_partition, Dataset, SyntheticConfig, SyntheticImages};
use fedx::encoder::{build_encoder, EncoderDescriptor, ModelParams};
use fedx::federation::{aggregate, run_training, Federation, FederationConfig, Method};

fn small() -> (Dataset, EncoderDescriptor) {
    let images = SyntheticImages::new(SyntheticConfig {
        classes: 4,
        size: 6,
        ..SyntheticConfig::default()
    });
    let data = images.generate(40, 3).unwrap();
    let descriptor = EncoderDescriptor {
        hidden: vec![32],
        embed_dim: 16,
        head_hidden: 16,
        ..EncoderDescriptor::mlp(data.sample_dim())
    };
    (data, descriptor)
}

fn config(method: Method, fedx: bool) -> FederationConfig {
    FederationConfig {
        clients: 3,
        rounds: 2,
        local_epochs: 1,
        batch_size: 16,
        method,
        fedx,
        seed: 4,
        angle_probe: 20,
        record_wall_time: false,
        ..FederationConfig::default()
    }
}

#[test]
fn every_method_combination_trains() {
    let (data, plain) = small();
    for method in [Method::Simclr, Method::Byol] {
        for fedx in [false, true] {
            let cfg = config(method, fedx);
            let descriptor = plain.clone().with_predictor(method == Method::Byol);
            let p = dirichlet_partition(&data, cfg.clients, 1.0, 0, cfg.min_client_size()).unwrap();
            let out = run_training::<f32, _>(&cfg, &descriptor, &data, &p, |_, _| Ok(())).unwrap();
            let initial: ModelParams<f32> = build_encoder(&descriptor, cfg.seed).unwrap();
            assert_ne!(out.global, initial, "{method:?} fedx={fedx}");
            for m in &out.metrics {
                assert!(m.losses.is_finite());
                assert_eq!(m.losses.global_c == 0.0, !fedx);
                assert!(m.mean_angle_deg.is_some_and(|a| a > 0.0));
                assert_eq!(m.clients.len(), 3);
            }
        }
    }
}

#[test]
fn round_global_is_weighted_mean_of_clients() {
    let (data, descriptor) = small();
    let cfg = config(Method::Simclr, true);
    let p = dirichlet_partition(&data, cfg.clients, 0.5, 1, cfg.min_client_size()).unwrap();
    let initial = build_encoder::<f64>(&descriptor, 0).unwrap();
    let mut fed = Federation::new(cfg, initial, &data, &p).unwrap();
    fed.run_round().unwrap();
    let again = aggregate(fed.clients(), &p.weights()).unwrap();
    assert_eq!(fed.global(), &again);
    assert_eq!(fed.rounds_done(), 1);
}

#[test]
fn reruns_are_identical() {
    let (data, descriptor) = small();
    let cfg = config(Method::Simclr, true);
    let p = dirichlet_partition(&data, cfg.clients, 0.5, 1, cfg.min_client_size()).unwrap();
    let a = run_training::<f32, _>(&cfg, &descriptor, &data, &p, |_, _| Ok(())).unwrap();
    let b = run_training::<f32, _>(&cfg, &descriptor, &data, &p, |_, _| Ok(())).unwrap();
    assert_eq!(a.global, b.global);
    assert_eq!(a.metrics, b.metrics);
}
