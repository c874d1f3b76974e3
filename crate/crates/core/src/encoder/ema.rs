use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::numerics::{Graph, Real, Tensor, Var};

use super::model::bind_tensors;
use super::{EncoderDescriptor, ModelParams, Role};

/// Exponential-moving-average copy of a backbone, used as the BYOL target.
///
/// The shadow is only ever bound as constants, so it never receives gradients.
#[derive(Clone, Debug)]
pub struct EmaEncoder<T> {
    descriptor: EncoderDescriptor,
    shadow: IndexMap<String, Tensor<T>>,
    decay: f64,
}

impl<T: Real> EmaEncoder<T> {
    pub fn new(source: &ModelParams<T>, decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidArgument(format!(
                "EMA decay {decay} outside [0, 1]"
            )));
        }
        let shadow = source
            .iter_role(Role::Backbone)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(EmaEncoder {
            descriptor: source.descriptor().clone(),
            shadow,
            decay,
        })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn shadow(&self) -> &IndexMap<String, Tensor<T>> {
        &self.shadow
    }

    pub fn shadow_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.shadow
    }

    /// `shadow ← decay·shadow + (1 − decay)·source` over the backbone.
    pub fn update(&mut self, source: &ModelParams<T>) -> Result<()> {
        let d = T::of(self.decay);
        let one_minus = T::of(1.0 - self.decay);
        for (name, s) in self.shadow.iter_mut() {
            let src = source
                .get(name)
                .ok_or_else(|| Error::Shape(format!("source lacks {name}")))?;
            if src.shape() != s.shape() {
                return Err(Error::Shape(format!(
                    "EMA shadow {name} {:?} vs source {:?}",
                    s.shape(),
                    src.shape()
                )));
            }
            for (sv, &x) in s.data_mut().iter_mut().zip(src.data()) {
                *sv = d * *sv + one_minus * x;
            }
        }
        Ok(())
    }

    /// Overwrites the shadow with the source backbone.
    pub fn reset_from(&mut self, source: &ModelParams<T>) -> Result<()> {
        *self = EmaEncoder::new(source, self.decay)?;
        Ok(())
    }

    /// Target embeddings `f_ema(x)`; always untracked.
    pub fn embed_on<'g>(&self, graph: &'g Graph<T>, x: Var<'g, T>) -> Result<Var<'g, T>> {
        bind_tensors(graph, &self.descriptor, &self.shadow, false).backbone(x)
    }
}
