//! FedAvg round loop with the distillation-augmented local update.

mod aggregate;
mod centralized;
mod client;
mod config;

use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PartitionSpec};
use crate::encoder::{build_encoder, EncoderDescriptor, ModelParams};
use crate::error::{Error, Result};
use crate::evaluation::embedding_angles;
use crate::losses::LossValues;
use crate::numerics::Real;

pub use aggregate::aggregate_models;
pub use centralized::train_centralized;
pub use client::{client_rng, local_update, ClientReport, ClientState, SHARED_ROLES};
pub use config::{FederationConfig, Method};

/// Size-weighted FedAvg over the shared roles of every client model.
pub fn aggregate<T: Real>(clients: &[ClientState<T>], weights: &[f64]) -> Result<ModelParams<T>> {
    let models: Vec<&ModelParams<T>> = clients.iter().map(|c| &c.model).collect();
    aggregate_models(&models, weights, &SHARED_ROLES)
}

/// Losses and timing of one communication round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub clients: Vec<ClientReport>,
    /// Unweighted mean over clients.
    pub losses: LossValues,
    pub loss_total: f64,
    /// Mean angle between each client's trained backbone and the new global one.
    pub mean_angle_deg: Option<f64>,
    pub wall_ms: u64,
}

/// Server plus all client states.
pub struct Federation<'d, T: Real> {
    cfg: FederationConfig,
    dataset: &'d Dataset,
    weights: Vec<f64>,
    global: ModelParams<T>,
    clients: Vec<ClientState<T>>,
    probe: Option<Dataset>,
    pool: Option<rayon::ThreadPool>,
    round: usize,
}

impl<'d, T: Real> Federation<'d, T> {
    /// Starts from `initial` as the round-0 global model.
    pub fn new(
        cfg: FederationConfig,
        initial: ModelParams<T>,
        dataset: &'d Dataset,
        partition: &PartitionSpec,
    ) -> Result<Self> {
        cfg.validate()?;
        let descriptor = initial.descriptor();
        descriptor.validate()?;
        if descriptor.input_dim != dataset.sample_dim() {
            return Err(Error::DescriptorMismatch(format!(
                "encoder takes {} inputs but samples have {}",
                descriptor.input_dim,
                dataset.sample_dim()
            )));
        }
        if cfg.method == Method::Byol && !descriptor.predictor {
            return Err(Error::Config(
                "BYOL needs an encoder with a predictor head".into(),
            ));
        }
        if partition.clients() != cfg.clients {
            return Err(Error::Config(format!(
                "partition has {} clients, config asks for {}",
                partition.clients(),
                cfg.clients
            )));
        }
        if partition.total != dataset.len() {
            return Err(Error::Partition(format!(
                "partition covers {} samples, dataset has {}",
                partition.total,
                dataset.len()
            )));
        }
        if cfg.local_epochs > 0 {
            if let Some((m, size)) = partition
                .client_sizes()
                .into_iter()
                .enumerate()
                .find(|&(_, s)| s < cfg.batch_size)
            {
                return Err(Error::Partition(format!(
                    "client {m} holds {size} samples, fewer than one batch of {}",
                    cfg.batch_size
                )));
            }
        }
        let clients = partition
            .client_indices
            .iter()
            .enumerate()
            .map(|(m, idx)| ClientState::new(m, idx.clone(), &initial, &cfg))
            .collect::<Result<Vec<_>>>()?;
        let probe = (cfg.angle_probe > 0).then(|| {
            let n = cfg.angle_probe.min(dataset.len());
            let step = dataset.len() / n;
            let idx: Vec<usize> = (0..n).map(|i| i * step).collect();
            dataset.subset(&idx)
        });
        let pool = if cfg.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.workers)
                    .build()
                    .map_err(|e| {
                        Error::Config(format!("cannot start {} workers: {e}", cfg.workers))
                    })?,
            )
        } else {
            None
        };
        Ok(Federation {
            weights: partition.weights(),
            cfg,
            dataset,
            global: initial,
            clients,
            probe,
            pool,
            round: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    pub fn global(&self) -> &ModelParams<T> {
        &self.global
    }

    pub fn clients(&self) -> &[ClientState<T>] {
        &self.clients
    }

    /// Rounds completed so far.
    pub fn rounds_done(&self) -> usize {
        self.round
    }

    /// Broadcast, local updates, upload and aggregation.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let start = Instant::now();
        let round = self.round;
        let (global, dataset, cfg) = (&self.global, self.dataset, &self.cfg);
        let before = global.checksum();
        let update = |c: &mut ClientState<T>| local_update(c, global, dataset, cfg, round);
        // collect keeps client order whatever the scheduling
        let results: Vec<Result<ClientReport>> = match &self.pool {
            Some(pool) => pool.install(|| self.clients.par_iter_mut().map(update).collect()),
            None => self.clients.iter_mut().map(update).collect(),
        };
        debug_assert_eq!(
            before,
            global.checksum(),
            "global snapshot changed during round"
        );
        let reports = results.into_iter().collect::<Result<Vec<_>>>()?;

        self.global = aggregate(&self.clients, &self.weights)?;
        let mean_angle_deg = match &self.probe {
            Some(probe) => {
                let mut total = 0.0;
                for c in &self.clients {
                    let a = embedding_angles(&c.model, &self.global, probe)?;
                    total += a.iter().sum::<f64>() / a.len() as f64;
                }
                Some(total / self.clients.len() as f64)
            }
            None => None,
        };

        let m = reports.len() as f64;
        let losses = LossValues {
            local_c: reports.iter().map(|r| r.losses.local_c).sum::<f64>() / m,
            local_r: reports.iter().map(|r| r.losses.local_r).sum::<f64>() / m,
            global_c: reports.iter().map(|r| r.losses.global_c).sum::<f64>() / m,
            global_r: reports.iter().map(|r| r.losses.global_r).sum::<f64>() / m,
        };
        self.round += 1;
        let metrics = RoundMetrics {
            round,
            loss_total: losses.total(),
            losses,
            clients: reports,
            mean_angle_deg,
            wall_ms: if self.cfg.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
        };
        debug!("round {round}: {metrics:?}");
        info!(
            "round {}/{} loss {:.4} ({} ms)",
            round + 1,
            self.cfg.rounds,
            metrics.loss_total,
            metrics.wall_ms
        );
        Ok(metrics)
    }

    pub fn into_parts(self) -> (ModelParams<T>, Vec<ClientState<T>>) {
        (self.global, self.clients)
    }
}

/// Final state of a training run.
pub struct TrainingOutcome<T> {
    pub global: ModelParams<T>,
    pub clients: Vec<ClientState<T>>,
    pub metrics: Vec<RoundMetrics>,
}

/// Runs `cfg.rounds` rounds from a fresh encoder seeded with `cfg.seed`.
///
/// `on_round` sees every round's metrics and the new global model; an error
/// from it stops training.
pub fn run_training<T: Real, F>(
    cfg: &FederationConfig,
    descriptor: &EncoderDescriptor,
    dataset: &Dataset,
    partition: &PartitionSpec,
    mut on_round: F,
) -> Result<TrainingOutcome<T>>
where
    F: FnMut(&RoundMetrics, &ModelParams<T>) -> Result<()>,
{
    let initial = build_encoder(descriptor, cfg.seed)?;
    let mut federation = Federation::new(cfg.clone(), initial, dataset, partition)?;
    let mut metrics = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let m = federation.run_round()?;
        on_round(&m, federation.global())?;
        metrics.push(m);
    }
    let (global, clients) = federation.into_parts();
    Ok(TrainingOutcome {
        global,
        clients,
        metrics,
    })
}
