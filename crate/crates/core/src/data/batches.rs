use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

use super::{augment_view, AugmentPolicy, Dataset};

/// One training step's inputs: two index-aligned views of `B` and the
/// reference batch `B_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainBatch<T> {
    pub indices: Vec<usize>,
    pub ref_indices: Vec<usize>,
    /// View `x_i` of every instance in `B`.
    pub view: Tensor<T>,
    /// View `x̃_i`, aligned with `view`.
    pub view_tilde: Tensor<T>,
    /// Un-augmented reference samples.
    pub refs: Tensor<T>,
}

/// Draws batches from one client's shard.
#[derive(Clone, Debug)]
pub struct BatchSampler<'a> {
    dataset: &'a Dataset,
    indices: &'a [usize],
    batch_size: usize,
    policy: AugmentPolicy,
    augment_both: bool,
}

impl<'a> BatchSampler<'a> {
    /// `augment_both` augments `B` as well as `B̃`; otherwise `B` is the raw batch.
    pub fn new(
        dataset: &'a Dataset,
        indices: &'a [usize],
        batch_size: usize,
        policy: AugmentPolicy,
        augment_both: bool,
    ) -> Result<Self> {
        if batch_size == 0 || indices.len() < batch_size {
            return Err(Error::InvalidArgument(format!(
                "client holds {} samples, fewer than one batch of {batch_size}",
                indices.len()
            )));
        }
        Ok(BatchSampler {
            dataset,
            indices,
            batch_size,
            policy,
            augment_both,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.indices.len() / self.batch_size
    }

    /// One epoch: `B` walks a fresh permutation without replacement (trailing
    /// partial batch dropped); `B_r` is drawn independently per step.
    pub fn epoch<'r, T: Real, R: Rng>(&self, rng: &'r mut R) -> EpochBatches<'a, 'r, T, R> {
        let mut order = self.indices.to_vec();
        order.shuffle(rng);
        EpochBatches {
            sampler: self.clone(),
            order,
            step: 0,
            rng,
            _elem: std::marker::PhantomData,
        }
    }

    fn views<T: Real, R: Rng>(&self, batch: &[usize], augment: bool, rng: &mut R) -> Tensor<T> {
        if !augment || self.policy.is_identity() {
            return self.dataset.batch(batch);
        }
        let shape = self.dataset.shape();
        let mut data = Vec::with_capacity(batch.len() * self.dataset.sample_dim());
        for &i in batch {
            let v = augment_view(self.dataset.sample(i), shape, &self.policy, rng);
            data.extend(v.into_iter().map(|x| T::of(x as f64)));
        }
        Tensor::new(vec![batch.len(), self.dataset.sample_dim()], data).expect("view shape")
    }
}

pub struct EpochBatches<'a, 'r, T, R> {
    sampler: BatchSampler<'a>,
    order: Vec<usize>,
    step: usize,
    rng: &'r mut R,
    _elem: std::marker::PhantomData<T>,
}

impl<T: Real, R: Rng> Iterator for EpochBatches<'_, '_, T, R> {
    type Item = TrainBatch<T>;

    fn next(&mut self) -> Option<TrainBatch<T>> {
        let n = self.sampler.batch_size;
        let start = self.step * n;
        if start + n > self.order.len() {
            return None;
        }
        self.step += 1;
        let indices = self.order[start..start + n].to_vec();
        let view = self
            .sampler
            .views(&indices, self.sampler.augment_both, self.rng);
        let view_tilde = self.sampler.views(&indices, true, self.rng);
        let shard = self.sampler.indices;
        let ref_indices: Vec<usize> = index::sample(self.rng, shard.len(), n)
            .into_iter()
            .map(|i| shard[i])
            .collect();
        let refs = self.sampler.dataset.batch(&ref_indices);
        Some(TrainBatch {
            indices,
            ref_indices,
            view,
            view_tilde,
            refs,
        })
    }
}

/// Convenience wrapper returning a full epoch of batches.
pub fn sample_batches<T: Real, R: Rng>(
    dataset: &Dataset,
    indices: &[usize],
    batch_size: usize,
    policy: &AugmentPolicy,
    rng: &mut R,
) -> Result<Vec<TrainBatch<T>>> {
    let sampler = BatchSampler::new(dataset, indices, batch_size, *policy, true)?;
    Ok(sampler.epoch(rng).collect())
}
