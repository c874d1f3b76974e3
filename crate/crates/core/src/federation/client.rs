use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BatchSampler, Dataset, TrainBatch};
use crate::encoder::{EmaEncoder, ModelParams, Role};
use crate::error::{Error, Result};
use crate::losses::{self, KdInputs, LossValues};
use crate::numerics::{sgd_step, Graph, Real, SgdState, Var};

use super::{FederationConfig, Method};

/// Roles trained locally and averaged by the server.
pub const SHARED_ROLES: [Role; 2] = [Role::Backbone, Role::ProjectionHead];

/// Independent RNG stream of client `id` under run seed `seed`.
pub fn client_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64 + 1);
    rng
}

/// Everything one client owns between rounds.
#[derive(Clone, Debug)]
pub struct ClientState<T> {
    pub id: usize,
    pub indices: Vec<usize>,
    pub model: ModelParams<T>,
    pub ema: Option<EmaEncoder<T>>,
    pub optimizer: SgdState<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Real> ClientState<T> {
    pub fn new(
        id: usize,
        indices: Vec<usize>,
        initial: &ModelParams<T>,
        cfg: &FederationConfig,
    ) -> Result<Self> {
        let ema = match cfg.method {
            Method::Byol => Some(EmaEncoder::new(initial, cfg.ema_decay)?),
            Method::Simclr => None,
        };
        Ok(ClientState {
            id,
            indices,
            model: initial.clone(),
            ema,
            optimizer: SgdState::with_params(
                cfg.optimizer,
                initial.tensors().iter().map(|(k, v)| (k.as_str(), v)),
            ),
            rng: client_rng(cfg.seed, id),
        })
    }
}

/// Mean loss components of one client's local update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub client: usize,
    pub steps: usize,
    pub losses: LossValues,
}

/// One optimisation step on a batch. `global` is the frozen round snapshot.
pub(crate) fn train_step<T: Real>(
    model: &mut ModelParams<T>,
    ema: Option<&mut EmaEncoder<T>>,
    optimizer: &mut SgdState<T>,
    global: &ModelParams<T>,
    batch: &TrainBatch<T>,
    cfg: &FederationConfig,
) -> Result<LossValues> {
    let n = batch.indices.len();
    let graph = Graph::new();
    let local = model.bind(&graph, true);
    let views = [
        graph.constant(batch.view.clone()),
        graph.constant(batch.view_tilde.clone()),
        graph.constant(batch.refs.clone()),
    ];
    let needs_refs = cfg.fedx;
    let x = if needs_refs {
        Var::concat_rows(&views)
    } else {
        Var::concat_rows(&views[..2])
    };
    let z_all = local.backbone(x)?;
    let z = z_all.slice_rows(0, n);
    let z_tilde = z_all.slice_rows(n, 2 * n);

    let local_c = match cfg.method {
        Method::Simclr => losses::local_contrastive_simclr(z, z_tilde, cfg.loss.tau)?,
        Method::Byol => {
            let target_net = ema
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("BYOL requires an EMA target".into()))?;
            let target = target_net.embed_on(&graph, views[1])?;
            losses::local_contrastive_byol(local.predictor(z)?, target)?
        }
    };

    let (loss, values) = if cfg.fedx {
        let projected = local.projection(z_all.slice_rows(0, 2 * n))?;
        let frozen = global.bind(&graph, false);
        let g_all = frozen.backbone(x)?;
        let inputs = KdInputs {
            z,
            z_tilde,
            z_ref: z_all.slice_rows(2 * n, 3 * n),
            zl: projected.slice_rows(0, n),
            zl_tilde: projected.slice_rows(n, 2 * n),
            zg: g_all.slice_rows(0, n),
            zg_tilde: g_all.slice_rows(n, 2 * n),
            zg_ref: g_all.slice_rows(2 * n, 3 * n),
        };
        let terms = losses::kd_terms(&inputs, local_c, &cfg.loss)?;
        (terms.total(), terms.values())
    } else {
        let values = LossValues {
            local_c: local_c.item().as_f64(),
            ..LossValues::default()
        };
        (local_c, values)
    };
    if !values.is_finite() || !loss.item().is_finite() {
        // caller reports the divergence; the model is left untouched
        return Ok(values);
    }
    let grads = graph.backward(loss)?;
    sgd_step(model.tensors_mut(), &grads, optimizer)?;
    if let Some(ema) = ema {
        ema.update(model)?;
    }
    Ok(values)
}

fn divergence(round: usize, client: usize, step: usize, v: LossValues) -> Error {
    Error::Divergence {
        round,
        client,
        step,
        local_c: v.local_c,
        local_r: v.local_r,
        global_c: v.global_c,
        global_r: v.global_r,
    }
}

/// Runs `epochs` passes of local training, accumulating mean losses.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_epochs<T: Real>(
    model: &mut ModelParams<T>,
    mut ema: Option<&mut EmaEncoder<T>>,
    optimizer: &mut SgdState<T>,
    rng: &mut ChaCha8Rng,
    global: &ModelParams<T>,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &FederationConfig,
    (round, client): (usize, usize),
) -> Result<ClientReport> {
    let mut report = ClientReport {
        client,
        ..ClientReport::default()
    };
    if cfg.local_epochs == 0 {
        return Ok(report);
    }
    let sampler = BatchSampler::new(
        dataset,
        indices,
        cfg.batch_size,
        cfg.augment,
        cfg.augment_both_views,
    )?;
    let mut sum = LossValues::default();
    for _ in 0..cfg.local_epochs {
        let batches: Vec<TrainBatch<T>> = sampler.epoch(rng).collect();
        for batch in &batches {
            let v = match train_step(model, ema.as_deref_mut(), optimizer, global, batch, cfg) {
                Ok(v) if v.is_finite() => v,
                Ok(v) => return Err(divergence(round, client, report.steps, v)),
                Err(Error::ZeroNorm(_)) => {
                    let nan = LossValues {
                        local_c: f64::NAN,
                        local_r: f64::NAN,
                        global_c: f64::NAN,
                        global_r: f64::NAN,
                    };
                    return Err(divergence(round, client, report.steps, nan));
                }
                Err(e) => return Err(e),
            };
            sum.local_c += v.local_c;
            sum.local_r += v.local_r;
            sum.global_c += v.global_c;
            sum.global_r += v.global_r;
            report.steps += 1;
        }
    }
    let n = report.steps.max(1) as f64;
    report.losses = LossValues {
        local_c: sum.local_c / n,
        local_r: sum.local_r / n,
        global_c: sum.global_c / n,
        global_r: sum.global_r / n,
    };
    Ok(report)
}

/// Local update of one client for one round.
///
/// Replaces the shared roles of the local model with the global snapshot,
/// then trains for `cfg.local_epochs` epochs. The snapshot is only read.
pub fn local_update<T: Real>(
    client: &mut ClientState<T>,
    global: &ModelParams<T>,
    dataset: &Dataset,
    cfg: &FederationConfig,
    round: usize,
) -> Result<ClientReport> {
    client.model.copy_roles_from(global, &SHARED_ROLES)?;
    if cfg.reset_optimizer_each_round {
        client.optimizer.reset();
    }
    if cfg.reset_ema_each_round {
        if let Some(ema) = client.ema.as_mut() {
            ema.reset_from(global)?;
        }
    }
    train_epochs(
        &mut client.model,
        client.ema.as_mut(),
        &mut client.optimizer,
        &mut client.rng,
        global,
        dataset,
        &client.indices,
        cfg,
        (round, client.id),
    )
}
