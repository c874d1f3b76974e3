mod common;

use fedx::cli::{decode_checkpoint, encode_checkpoint};
use fedx::data::{
    augment_view, decode_fxds, dirichlet_partition, encode_fxds, largest_remainder, AugmentPolicy,
    Dataset, PartitionSpec,
};
use fedx::encoder::{build_encoder, EncoderDescriptor, ModelParams, Role};
use fedx::evaluation::{embedding_angle, inter_class_angles};
use fedx::federation::aggregate_models;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny() -> EncoderDescriptor {
    EncoderDescriptor {
        hidden: vec![6],
        embed_dim: 4,
        head_hidden: 5,
        ..EncoderDescriptor::mlp(3)
    }
}

fn labelled(labels: Vec<usize>, classes: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..labels.len() * 3)
        .map(|_| rand::Rng::random_range(&mut r, 0.0..=1.0))
        .collect();
    Dataset::new((3, 1, 1), classes, pixels, labels).unwrap()
}

fn weights_from(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_stays_within_client_range(
        seeds in prop::collection::vec(0u64..1000, 1..6),
        raw in prop::collection::vec(0.01f64..1.0, 6),
    ) {
        let models: Vec<ModelParams<f64>> = seeds.iter().map(|&s| build_encoder(&tiny(), s).unwrap()).collect();
        let weights = weights_from(&raw[..models.len()]);
        let refs: Vec<&ModelParams<f64>> = models.iter().collect();
        let avg = aggregate_models(&refs, &weights, &[Role::Backbone, Role::ProjectionHead]).unwrap();
        for (name, t) in avg.tensors() {
            for (j, v) in t.data().iter().enumerate() {
                let vals = models.iter().map(|m| m.get(name).unwrap().data()[j]);
                let lo = vals.clone().fold(f64::INFINITY, f64::min);
                let hi = vals.fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= lo && *v <= hi, "{name}[{j}] = {v} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn partition_is_a_disjoint_cover(
        per_class in prop::collection::vec(0usize..40, 2..6),
        clients in 1usize..6,
        beta in 0.05f64..100.0,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = per_class.iter().enumerate().flat_map(|(k, &n)| vec![k; n]).collect();
        prop_assume!(labels.len() >= clients);
        let d = labelled(labels, per_class.len(), seed);
        let p = dirichlet_partition(&d, clients, beta, seed, 1).unwrap();
        p.validate().unwrap();
        prop_assert_eq!(p.client_sizes().iter().sum::<usize>(), d.len());
        prop_assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(&p, &dirichlet_partition(&d, clients, beta, seed, 1).unwrap());
    }

    #[test]
    fn largest_remainder_preserves_count(count in 0usize..500, raw in prop::collection::vec(0.001f64..1.0, 1..12)) {
        let counts = largest_remainder(count, &weights_from(&raw));
        prop_assert_eq!(counts.iter().sum::<usize>(), count);
    }

    #[test]
    fn angle_is_scale_invariant_and_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 4),
        b in prop::collection::vec(-5.0f64..5.0, 4),
        c in 0.01f64..100.0,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let base = embedding_angle(&a, &b).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
        prop_assert!((0.0..=180.0).contains(&base));
        prop_assert!((embedding_angle(&scaled, &b).unwrap() - base).abs() < 1e-9);
        prop_assert!((embedding_angle(&b, &a).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn augmented_views_stay_in_range(seed in any::<u64>(), pixels in prop::collection::vec(0.0f32..=1.0, 3 * 5 * 5)) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let v = augment_view(&pixels, (3, 5, 5), &AugmentPolicy::default(), &mut r);
        prop_assert_eq!(v.len(), pixels.len());
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        let id = augment_view(&pixels, (3, 5, 5), &AugmentPolicy::identity(), &mut r);
        prop_assert_eq!(id, pixels);
    }

    #[test]
    fn fxds_round_trip(labels in prop::collection::vec(0usize..4, 1..30), seed in any::<u64>()) {
        let d = labelled(labels, 4, seed);
        let back = decode_fxds(&encode_fxds(&d).unwrap()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), round in 0usize..1000) {
        let m = build_encoder::<f32>(&tiny(), seed).unwrap();
        let (back, manifest) = decode_checkpoint::<f32>(&encode_checkpoint(&m, round, "cfg").unwrap()).unwrap();
        prop_assert_eq!(manifest.round, round);
        prop_assert_eq!(back.checksum(), m.checksum());
    }
}

#[test]
fn duplicating_a_class_keeps_prototype_angles() {
    let model = build_encoder::<f64>(&tiny(), 3).unwrap();
    let d = labelled((0..30).map(|i| i % 3).collect(), 3, 1);
    let base = inter_class_angles(&model, &d).unwrap();
    // every sample of class 0 appears twice
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.extend((0..d.len()).filter(|&i| d.label(i) == 0));
    let doubled = inter_class_angles(&model, &d.subset(&idx)).unwrap();
    for (ra, rb) in base.iter().zip(&doubled) {
        for (a, b) in ra.iter().zip(rb) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn partition_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = labelled((0..200).map(|i| i % 5).collect(), 5, 2);
    let p = dirichlet_partition(&d, 4, 0.3, 17, 8).unwrap();
    let path = dir.path().join("partition.json");
    p.save(&path).unwrap();
    assert_eq!(PartitionSpec::load(&path).unwrap(), p);
}
