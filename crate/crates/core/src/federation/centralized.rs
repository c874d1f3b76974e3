use crate::data::{BatchSampler, Dataset, TrainBatch};
use crate::encoder::{build_encoder, EmaEncoder, EncoderDescriptor, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{Real, SgdState};

use super::client::{client_rng, train_step};
use super::{FederationConfig, Method};

/// Single-process reference trainer over one index set.
///
/// Trains `epochs` epochs with the batch stream a lone federated client would
/// see. Every `teacher_every` epochs the frozen teacher is refreshed from the
/// current model and the momentum buffers are cleared, which is what a round
/// boundary amounts to when there is nothing to average.
pub fn train_centralized<T: Real>(
    cfg: &FederationConfig,
    descriptor: &EncoderDescriptor,
    dataset: &Dataset,
    indices: &[usize],
    epochs: usize,
    teacher_every: usize,
) -> Result<ModelParams<T>> {
    cfg.validate()?;
    if teacher_every == 0 {
        return Err(Error::InvalidArgument(
            "teacher refresh period must be positive".into(),
        ));
    }
    let mut model: ModelParams<T> = build_encoder(descriptor, cfg.seed)?;
    let mut ema = match cfg.method {
        Method::Byol => Some(EmaEncoder::new(&model, cfg.ema_decay)?),
        Method::Simclr => None,
    };
    let mut optimizer = SgdState::new(cfg.optimizer);
    let mut rng = client_rng(cfg.seed, 0);
    let sampler = BatchSampler::new(
        dataset,
        indices,
        cfg.batch_size,
        cfg.augment,
        cfg.augment_both_views,
    )?;
    let mut teacher = model.clone();
    for epoch in 0..epochs {
        if epoch % teacher_every == 0 {
            teacher = model.clone();
            if cfg.reset_optimizer_each_round {
                optimizer.reset();
            }
            if cfg.reset_ema_each_round {
                if let Some(e) = ema.as_mut() {
                    e.reset_from(&teacher)?;
                }
            }
        }
        let batches: Vec<TrainBatch<T>> = sampler.epoch(&mut rng).collect();
        for batch in &batches {
            let v = train_step(
                &mut model,
                ema.as_mut(),
                &mut optimizer,
                &teacher,
                batch,
                cfg,
            )?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "centralized loss at epoch {epoch}: {v:?}"
                )));
            }
        }
    }
    Ok(model)
}
