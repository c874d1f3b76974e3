use serde::{Deserialize, Serialize};

use crate::data::AugmentPolicy;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::numerics::SgdConfig;

/// Local contrastive objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simclr,
    Byol,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simclr" => Ok(Method::Simclr),
            "byol" => Ok(Method::Byol),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub method: Method,
    /// Two-sided distillation on; off trains the local contrastive loss only.
    pub fedx: bool,
    pub batch_size: usize,
    pub seed: u64,
    /// Thread count for concurrent local updates.
    pub workers: usize,
    pub loss: LossConfig,
    pub optimizer: SgdConfig,
    pub augment: AugmentPolicy,
    /// Augment the anchor view `B` too, not only `B̃`.
    pub augment_both_views: bool,
    pub ema_decay: f64,
    /// Re-seed each client's EMA target from the downloaded global backbone every round.
    pub reset_ema_each_round: bool,
    /// Zero each client's momentum buffers at the start of every round.
    pub reset_optimizer_each_round: bool,
    /// Test-time probe size for the per-round local/global angle; 0 disables it.
    pub angle_probe: usize,
    /// Record wall-clock time in round metrics; off writes 0 so reruns compare byte for byte.
    pub record_wall_time: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            clients: 10,
            rounds: 100,
            local_epochs: 10,
            method: Method::Simclr,
            fedx: true,
            batch_size: 128,
            seed: 0,
            workers: 1,
            loss: LossConfig::default(),
            optimizer: SgdConfig::default(),
            augment: AugmentPolicy::default(),
            augment_both_views: true,
            ema_decay: 0.99,
            reset_ema_each_round: false,
            reset_optimizer_each_round: true,
            angle_probe: 0,
            record_wall_time: true,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Config("clients must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "EMA decay {} outside [0, 1]",
                self.ema_decay
            )));
        }
        self.loss.validate()?;
        self.optimizer.validate()
    }

    /// Smallest shard that still yields one batch.
    pub fn min_client_size(&self) -> usize {
        self.batch_size.max(32)
    }
}
