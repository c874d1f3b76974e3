use indexmap::IndexMap;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encoder::{bind_tensors, EncoderDescriptor, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{sgd_step, Graph, Real, SgdConfig, SgdState, Tensor, Var};

use super::angles::backbone_rows;

const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearEvalConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Standardise each embedding coordinate with training-set statistics.
    pub standardize: bool,
}

impl Default for LinearEvalConfig {
    fn default() -> Self {
        LinearEvalConfig {
            epochs: 100,
            lr: 0.03,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 128,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub label_ratio: f64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            label_ratio: 0.1,
            epochs: 100,
            lr: 1e-3,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 128,
            seed: 0,
            standardize: true,
        }
    }
}

/// Test accuracy plus every setting that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `linear` or `semi`.
    pub mode: String,
    pub top1: f64,
    /// Accuracy per class; `None` when the test set has no sample of it.
    pub per_class: Vec<Option<f64>>,
    pub label_ratio: f64,
    pub labeled_samples: usize,
    /// Classes without a single training label.
    pub missing_classes: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub standardized: bool,
    /// Representation the classifier reads.
    pub features: String,
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.sample_dim() != test.sample_dim() || train.class_count() != test.class_count() {
        return Err(Error::Dataset(format!(
            "train set is {:?} with {} classes, test set {:?} with {}",
            train.shape(),
            train.class_count(),
            test.shape(),
            test.class_count()
        )));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Dataset(
            "evaluation needs non-empty train and test sets".into(),
        ));
    }
    Ok(())
}

fn missing_classes(labels: impl Iterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut seen = vec![false; k];
    labels.for_each(|l| seen[l] = true);
    let missing: Vec<usize> = (0..k).filter(|&c| !seen[c]).collect();
    if !missing.is_empty() {
        warn!("classes {missing:?} have no training labels");
    }
    missing
}

/// Per-coordinate mean and std (floored) of `rows`.
fn moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
    }
    let mut std = vec![0.0; d];
    for r in rows {
        std.iter_mut()
            .zip(r.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
    }
    std.iter_mut().for_each(|s| *s = s.sqrt().max(STD_FLOOR));
    (mean, std)
}

fn identity_moments(d: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; d], vec![1.0; d])
}

fn classifier_init<T: Real>(d: usize, k: usize) -> [(String, Tensor<T>); 2] {
    [
        ("classifier.weight".to_string(), Tensor::zeros(&[d, k])),
        ("classifier.bias".to_string(), Tensor::zeros(&[k])),
    ]
}

/// Mean cross-entropy of `logits` against `labels`.
fn cross_entropy<'g, T: Real>(logits: Var<'g, T>, labels: &[usize]) -> Var<'g, T> {
    let mask = vec![true; logits.value().numel()];
    logits
        .masked_logsumexp_rows(&mask)
        .sub(&logits.pick(labels))
        .mean()
}

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

fn accuracy(predicted: &[usize], labels: &[usize], k: usize) -> (f64, Vec<Option<f64>>) {
    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (&p, &l) in predicted.iter().zip(labels) {
        totals[l] += 1;
        hits[l] += usize::from(p == l);
    }
    let top1 = hits.iter().sum::<usize>() as f64 / labels.len().max(1) as f64;
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect();
    (top1, per_class)
}

/// Shuffled index batches for one epoch; the trailing partial batch is kept.
fn epoch_batches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

fn standardized_matrix(rows: &[Vec<f64>], mean: &[f64], std: &[f64]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter().zip(std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect()
}

/// Linear evaluation: a fresh softmax classifier trained on frozen backbone
/// embeddings of `train`, scored on `test`.
pub fn linear_evaluate<T: Real>(
    model: &ModelParams<T>,
    train: &Dataset,
    test: &Dataset,
    cfg: &LinearEvalConfig,
) -> Result<EvalReport> {
    check_compatible(train, test)?;
    let k = train.class_count();
    let sgd = SgdConfig {
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
    };
    sgd.validate()?;
    let train_rows = backbone_rows(model, train)?;
    let test_rows = backbone_rows(model, test)?;
    let d = train_rows[0].len();
    let (mean, std) = if cfg.standardize {
        moments(&train_rows)
    } else {
        identity_moments(d)
    };
    let x_train = standardized_matrix(&train_rows, &mean, &std);
    let x_test = standardized_matrix(&test_rows, &mean, &std);

    let mut params: IndexMap<String, Tensor<f64>> = classifier_init(d, k).into_iter().collect();
    let mut state = SgdState::new(sgd);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        for idx in epoch_batches(train.len(), cfg.batch_size, &mut rng) {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x_train[i].clone()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train.label(i)).collect();
            let graph = Graph::new();
            let x = graph.constant(Tensor::from_rows(&rows)?);
            let w = graph.param("classifier.weight", params["classifier.weight"].clone());
            let b = graph.param("classifier.bias", params["classifier.bias"].clone());
            let loss = cross_entropy(x.matmul(&w).add_row(&b), &labels);
            let grads = graph.backward(loss)?;
            sgd_step(&mut params, &grads, &mut state)?;
        }
    }

    let w = &params["classifier.weight"];
    let b = &params["classifier.bias"];
    let mut logits = vec![0.0; k];
    let predicted: Vec<usize> = x_test
        .iter()
        .map(|x| {
            logits.copy_from_slice(b.data());
            for (xi, wrow) in x.iter().zip(w.data().chunks(k)) {
                logits
                    .iter_mut()
                    .zip(wrow)
                    .for_each(|(l, wv)| *l += xi * wv);
            }
            argmax(&logits)
        })
        .collect();
    let (top1, per_class) = accuracy(&predicted, test.labels(), k);
    Ok(EvalReport {
        mode: "linear".into(),
        top1,
        per_class,
        label_ratio: 1.0,
        labeled_samples: train.len(),
        missing_classes: missing_classes(train.labels().iter().copied(), k),
        epochs: cfg.epochs,
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        standardized: cfg.standardize,
        features: "backbone".into(),
    })
}

/// Seeded per-class subset holding `round(ratio · |class|)` samples of each class.
pub fn labeled_subset(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "label ratio {ratio} outside (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (c, mut members) in dataset.class_indices().into_iter().enumerate() {
        members.shuffle(&mut rng);
        let take = (ratio * members.len() as f64).round() as usize;
        if take == 0 && !members.is_empty() {
            warn!("label ratio {ratio} leaves class {c} without labeled samples");
        }
        chosen.extend_from_slice(&members[..take]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

struct FeatureScaling<T> {
    shift: Tensor<T>,
    inv_std: Tensor<T>,
}

fn finetune_logits<'g, T: Real>(
    graph: &'g Graph<T>,
    descriptor: &EncoderDescriptor,
    params: &IndexMap<String, Tensor<T>>,
    x: Tensor<T>,
    scaling: &FeatureScaling<T>,
    tracked: bool,
) -> Result<Var<'g, T>> {
    let encoder: IndexMap<String, Tensor<T>> = params
        .iter()
        .filter(|(name, _)| !name.starts_with("classifier."))
        .map(|(n, t)| (n.clone(), t.clone()))
        .collect();
    let bound = bind_tensors(graph, descriptor, &encoder, tracked);
    let z = bound.backbone(graph.constant(x))?;
    let rows = z.value().rows();
    let d = scaling.inv_std.numel();
    let ones = graph.constant(Tensor::full(&[rows, 1], T::one()));
    let scale = graph.constant(scaling.inv_std.clone().reshape(vec![1, d])?);
    let z = z
        .add_row(&graph.constant(scaling.shift.clone()))
        .mul(&ones.matmul(&scale));
    let classifier = |name: &str| {
        let t = params[name].clone();
        if tracked {
            graph.param(name, t)
        } else {
            graph.constant(t)
        }
    };
    let (w, b) = (
        classifier("classifier.weight"),
        classifier("classifier.bias"),
    );
    Ok(z.matmul(&w).add_row(&b))
}

/// Semi-supervised fine-tuning: the backbone plus a fresh linear classifier
/// trained end to end on a labeled fraction of `train`.
///
/// `model` itself is not modified; the tuned copy is discarded after scoring.
pub fn semi_supervised_finetune<T: Real>(
    model: &ModelParams<T>,
    train: &Dataset,
    test: &Dataset,
    cfg: &FinetuneConfig,
) -> Result<EvalReport> {
    check_compatible(train, test)?;
    let k = train.class_count();
    let sgd = SgdConfig {
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
    };
    sgd.validate()?;
    let labeled = labeled_subset(train, cfg.label_ratio, cfg.seed)?;
    if labeled.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "label ratio {} selects no training samples",
            cfg.label_ratio
        )));
    }
    let subset = train.subset(&labeled);
    let initial_rows = backbone_rows(model, &subset)?;
    let d = initial_rows[0].len();
    // Feature scaling is fixed from the initial embeddings and kept constant.
    let (mean, std) = if cfg.standardize {
        moments(&initial_rows)
    } else {
        identity_moments(d)
    };
    let shift = Tensor::<T>::from_f64(&[d], &mean.iter().map(|m| -m).collect::<Vec<_>>())?;
    let inv_std = Tensor::<T>::from_f64(&[d], &std.iter().map(|s| 1.0 / s).collect::<Vec<_>>())?;

    let mut params = model.tensors().clone();
    params.extend(classifier_init::<T>(d, k));
    let mut state = SgdState::new(sgd);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let descriptor = model.descriptor().clone();
    let scaling = FeatureScaling { shift, inv_std };
    for _ in 0..cfg.epochs {
        for idx in epoch_batches(subset.len(), cfg.batch_size, &mut rng) {
            let labels: Vec<usize> = idx.iter().map(|&i| subset.label(i)).collect();
            let graph = Graph::new();
            let logits = finetune_logits(
                &graph,
                &descriptor,
                &params,
                subset.batch(&idx),
                &scaling,
                true,
            )?;
            let loss = cross_entropy(logits, &labels);
            if !loss.item().is_finite() {
                return Err(Error::NonFinite("fine-tuning loss".into()));
            }
            let grads = graph.backward(loss)?;
            sgd_step(&mut params, &grads, &mut state)?;
        }
    }

    let mut predicted = Vec::with_capacity(test.len());
    let all: Vec<usize> = (0..test.len()).collect();
    for chunk in all.chunks(512) {
        let graph = Graph::new();
        let logits = finetune_logits(
            &graph,
            &descriptor,
            &params,
            test.batch(chunk),
            &scaling,
            false,
        )?
        .value();
        predicted.extend((0..logits.rows()).map(|r| argmax(logits.row(r))));
    }
    let (top1, per_class) = accuracy(&predicted, test.labels(), k);
    Ok(EvalReport {
        mode: "semi".into(),
        top1,
        per_class,
        label_ratio: cfg.label_ratio,
        labeled_samples: labeled.len(),
        missing_classes: missing_classes(labeled.iter().map(|&i| train.label(i)), k),
        epochs: cfg.epochs,
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        standardized: cfg.standardize,
        features: "backbone".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_encoder, EncoderDescriptor};
    use rand::Rng;

    /// Encoder whose backbone is `x ↦ x·scale + shift` on every pixel.
    fn affine_encoder(dim: usize, scale: f64, shift: f64) -> ModelParams<f64> {
        let mut d = EncoderDescriptor::mlp(dim);
        d.hidden = vec![];
        d.embed_dim = dim;
        d.head_hidden = 4;
        let mut m: ModelParams<f64> = build_encoder(&d, 0).unwrap();
        let w = m.tensors_mut().get_mut("backbone.0.weight").unwrap();
        w.data_mut().iter_mut().enumerate().for_each(|(i, v)| {
            *v = if i / dim == i % dim { scale } else { 0.0 };
        });
        let b = m.tensors_mut().get_mut("backbone.0.bias").unwrap();
        b.data_mut().iter_mut().for_each(|v| *v = shift);
        m
    }

    /// Coordinate 0 encodes the label; the rest is noise.
    fn coded(n: usize, k: usize, seed: u64, informative: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 5;
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let label = rng.random_range(0..k);
            labels.push(label);
            let code = (label as f32 + rng.random_range(0.1..0.9)) / k as f32;
            samples.push(if informative { code } else { rng.random() });
            samples.extend((1..dim).map(|_| rng.random::<f32>()));
        }
        Dataset::new((1, 1, dim), k, samples, labels).unwrap()
    }

    fn quick() -> LinearEvalConfig {
        LinearEvalConfig {
            epochs: 30,
            ..LinearEvalConfig::default()
        }
    }

    #[test]
    fn separable_coordinate_is_learned() {
        let model = affine_encoder(5, 1.0, 0.0);
        let (train, test) = (coded(600, 3, 1, true), coded(300, 3, 2, true));
        let before = model.checksum();
        let r = linear_evaluate(&model, &train, &test, &quick()).unwrap();
        assert!(r.top1 >= 0.99, "top1 {}", r.top1);
        assert_eq!(model.checksum(), before);
        assert!(r
            .per_class
            .iter()
            .all(|a| a.is_some_and(|a| (0.0..=1.0).contains(&a))));
    }

    #[test]
    fn constant_embeddings_score_chance() {
        let model = affine_encoder(5, 0.0, 0.3);
        let mut total = 0.0;
        for seed in 0..3 {
            let (train, test) = (coded(800, 4, seed, false), coded(2000, 4, seed + 10, false));
            total += linear_evaluate(&model, &train, &test, &quick())
                .unwrap()
                .top1;
        }
        assert!(
            (total / 3.0 - 0.25).abs() <= 0.05,
            "mean top1 {}",
            total / 3.0
        );
    }

    #[test]
    fn labeled_subset_is_per_class_and_seeded() {
        let d = coded(1000, 4, 3, true);
        let a = labeled_subset(&d, 0.1, 5).unwrap();
        assert_eq!(a, labeled_subset(&d, 0.1, 5).unwrap());
        for (c, members) in d.class_indices().iter().enumerate() {
            let got = a.iter().filter(|&&i| d.label(i) == c).count();
            assert_eq!(got, (0.1 * members.len() as f64).round() as usize);
        }
        assert_eq!(
            labeled_subset(&d, 1.0, 0).unwrap(),
            (0..1000).collect::<Vec<_>>()
        );
        assert!(labeled_subset(&d, 0.0, 0).is_err());
    }

    #[test]
    fn finetune_is_deterministic_and_records_ratio() {
        let model = affine_encoder(5, 1.0, 0.0);
        let (train, test) = (coded(400, 3, 4, true), coded(200, 3, 5, true));
        let cfg = FinetuneConfig {
            label_ratio: 0.05,
            epochs: 5,
            ..FinetuneConfig::default()
        };
        let a = semi_supervised_finetune(&model, &train, &test, &cfg).unwrap();
        let b = semi_supervised_finetune(&model, &train, &test, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label_ratio, 0.05);
        assert_eq!(a.mode, "semi");
        assert_eq!(model, affine_encoder(5, 1.0, 0.0));
    }
}
