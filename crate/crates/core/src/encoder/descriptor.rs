use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Tanh,
}

impl From<ActivationKind> for Activation {
    fn from(kind: ActivationKind) -> Self {
        match kind {
            ActivationKind::Relu => Activation::Relu,
            ActivationKind::Tanh => Activation::Tanh,
        }
    }
}

/// Which sub-network a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Backbone,
    ProjectionHead,
    Predictor,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Backbone => "backbone",
            Role::ProjectionHead => "head",
            Role::Predictor => "predictor",
        }
    }

    pub fn of(name: &str) -> Option<Role> {
        let prefix = name.split('.').next()?;
        [Role::Backbone, Role::ProjectionHead, Role::Predictor]
            .into_iter()
            .find(|r| r.prefix() == prefix)
    }
}

/// Architecture of the encoder family: MLP backbone `f`, projection head `h`
/// and optional BYOL predictor `g`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDescriptor {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub head_hidden: usize,
    pub activation: ActivationKind,
    pub bias: bool,
    pub predictor: bool,
}

impl EncoderDescriptor {
    /// Default desk-scale layout: `input → 256 → 256 → 64`, head and
    /// predictor `64 → 128 → 64`.
    pub fn mlp(input_dim: usize) -> Self {
        EncoderDescriptor {
            input_dim,
            hidden: vec![256, 256],
            embed_dim: 64,
            head_hidden: 128,
            activation: ActivationKind::Relu,
            bias: true,
            predictor: false,
        }
    }

    pub fn with_predictor(mut self, predictor: bool) -> Self {
        self.predictor = predictor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let widths = std::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain([self.embed_dim, self.head_hidden]);
        for w in widths {
            if w == 0 {
                return Err(Error::InvalidArgument(format!(
                    "encoder widths must be positive: {self:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn backbone_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.embed_dim);
        w
    }

    pub fn head_widths(&self) -> Vec<usize> {
        vec![self.embed_dim, self.head_hidden, self.embed_dim]
    }

    /// Ordered `(name, shape)` layout of every parameter.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut push_mlp = |role: Role, widths: &[usize]| {
            for (i, pair) in widths.windows(2).enumerate() {
                out.push((
                    format!("{}.{i}.weight", role.prefix()),
                    vec![pair[0], pair[1]],
                ));
                if self.bias {
                    out.push((format!("{}.{i}.bias", role.prefix()), vec![pair[1]]));
                }
            }
        };
        push_mlp(Role::Backbone, &self.backbone_widths());
        push_mlp(Role::ProjectionHead, &self.head_widths());
        if self.predictor {
            push_mlp(Role::Predictor, &self.head_widths());
        }
        out
    }

    /// Stable hex digest of the descriptor.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("descriptor serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}
