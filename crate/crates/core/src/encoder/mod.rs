//! MLP backbone `f`, projection head `h`, BYOL predictor `g`, EMA target and
//! parameter (de)serialization.

mod descriptor;
mod ema;
mod model;
mod record;

pub(crate) use descriptor::hex_digest;
pub use descriptor::{ActivationKind, EncoderDescriptor, Role};
pub use ema::EmaEncoder;
pub(crate) use model::bind_tensors;
pub use model::{build_encoder, embed, BoundModel, Head, ModelParams};
pub use record::{export_params, import_params, validate_manifest, ManifestEntry, ParamRecord};
