use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, Graph, Real, Tensor, Var};

use super::{EncoderDescriptor, Role};

/// Which output an embedding call returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Backbone output `f(x)`.
    None,
    /// `h ∘ f(x)`.
    Projection,
    /// `g ∘ f(x)` (BYOL predictor).
    Predictor,
}

/// Named parameters of one encoder, in deterministic layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    descriptor: EncoderDescriptor,
    tensors: IndexMap<String, Tensor<T>>,
}

/// Builds a freshly initialised encoder.
///
/// Weights and biases are drawn from `U(-1/√fan_in, 1/√fan_in)`; the draw is
/// made in `f64` so both precisions start from the same values.
pub fn build_encoder<T: Real>(descriptor: &EncoderDescriptor, seed: u64) -> Result<ModelParams<T>> {
    descriptor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = IndexMap::new();
    for (name, shape) in descriptor.layout() {
        let fan_in = if name.ends_with(".weight") {
            shape[0]
        } else {
            // bias of layer i: fan-in is the weight's input width
            let weight = name.replace(".bias", ".weight");
            tensors
                .get(&weight)
                .map(|w: &Tensor<T>| w.shape()[0])
                .expect("weight precedes bias in layout")
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    Ok(ModelParams {
        descriptor: descriptor.clone(),
        tensors,
    })
}

impl<T: Real> ModelParams<T> {
    /// Assembles parameters, checking names and shapes against the descriptor layout.
    pub fn from_tensors(
        descriptor: EncoderDescriptor,
        tensors: IndexMap<String, Tensor<T>>,
    ) -> Result<Self> {
        let layout = descriptor.layout();
        if layout.len() != tensors.len() {
            return Err(Error::DescriptorMismatch(format!(
                "descriptor lists {} parameters, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in layout.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::DescriptorMismatch(format!(
                    "expected {name} {shape:?}, got {got_name} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(ModelParams {
            descriptor,
            tensors,
        })
    }

    pub fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    pub fn tensors(&self) -> &IndexMap<String, Tensor<T>> {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn iter_role(&self, role: Role) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors
            .iter()
            .filter(move |(name, _)| Role::of(name) == Some(role))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Copies every tensor of the given roles from `other`.
    pub fn copy_roles_from(&mut self, other: &ModelParams<T>, roles: &[Role]) -> Result<()> {
        if self.descriptor.backbone_widths() != other.descriptor.backbone_widths()
            || self.descriptor.head_widths() != other.descriptor.head_widths()
        {
            return Err(Error::DescriptorMismatch(
                "cannot copy between encoders of different widths".into(),
            ));
        }
        for (name, t) in &other.tensors {
            if Role::of(name).is_some_and(|r| roles.contains(&r)) {
                if let Some(dst) = self.tensors.get_mut(name) {
                    dst.data_mut().copy_from_slice(t.data());
                }
            }
        }
        Ok(())
    }

    /// Cheap order-sensitive checksum over the raw bits of every element.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (name, t) in &self.tensors {
            for b in name.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
            }
            for v in t.data() {
                h = (h ^ v.as_f64().to_bits()).wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            descriptor: self.descriptor.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Places every parameter on `graph`, tracked (named) or as constants.
    pub fn bind<'g>(&self, graph: &'g Graph<T>, tracked: bool) -> BoundModel<'g, T> {
        bind_tensors(graph, &self.descriptor, &self.tensors, tracked)
    }

    /// Untracked forward pass.
    pub fn embed(&self, x: &Tensor<T>, head: Head) -> Result<Tensor<T>> {
        let graph = Graph::new();
        let bound = self.bind(&graph, false);
        let xv = graph.constant(x.clone());
        let out = bound.embed(xv, head)?;
        Ok((*out.value()).clone())
    }
}

pub(crate) fn bind_tensors<'g, T: Real>(
    graph: &'g Graph<T>,
    descriptor: &EncoderDescriptor,
    tensors: &IndexMap<String, Tensor<T>>,
    tracked: bool,
) -> BoundModel<'g, T> {
    let vars = tensors
        .iter()
        .map(|(name, t)| {
            let v = if tracked {
                graph.param(name, t.clone())
            } else {
                graph.constant(t.clone())
            };
            (name.clone(), v)
        })
        .collect();
    BoundModel {
        descriptor: descriptor.clone(),
        vars,
    }
}

/// Encoder parameters placed on a graph.
pub struct BoundModel<'g, T: Real> {
    descriptor: EncoderDescriptor,
    vars: IndexMap<String, Var<'g, T>>,
}

impl<'g, T: Real> BoundModel<'g, T> {
    fn mlp(&self, role: Role, layers: usize, mut x: Var<'g, T>) -> Result<Var<'g, T>> {
        let act: Activation = self.descriptor.activation.into();
        for i in 0..layers {
            let w = self
                .vars
                .get(&format!("{}.{i}.weight", role.prefix()))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("model has no {role:?} layer {i}"))
                })?;
            x = x.matmul(w);
            if let Some(b) = self.vars.get(&format!("{}.{i}.bias", role.prefix())) {
                x = x.add_row(b);
            }
            if i + 1 < layers {
                x = x.activate(act);
            }
        }
        Ok(x)
    }

    /// `f(x)` for a `batch × input_dim` matrix.
    pub fn backbone(&self, x: Var<'g, T>) -> Result<Var<'g, T>> {
        let cols = x.shape().last().copied().unwrap_or(0);
        if cols != self.descriptor.input_dim {
            return Err(Error::Shape(format!(
                "encoder expects {} inputs, got {cols}",
                self.descriptor.input_dim
            )));
        }
        self.mlp(Role::Backbone, self.descriptor.hidden.len() + 1, x)
    }

    pub fn projection(&self, z: Var<'g, T>) -> Result<Var<'g, T>> {
        self.mlp(Role::ProjectionHead, 2, z)
    }

    pub fn predictor(&self, z: Var<'g, T>) -> Result<Var<'g, T>> {
        if !self.descriptor.predictor {
            return Err(Error::InvalidArgument(
                "predictor head requested but absent".into(),
            ));
        }
        self.mlp(Role::Predictor, 2, z)
    }

    pub fn embed(&self, x: Var<'g, T>, head: Head) -> Result<Var<'g, T>> {
        if x.value().rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let z = self.backbone(x)?;
        match head {
            Head::None => Ok(z),
            Head::Projection => self.projection(z),
            Head::Predictor => self.predictor(z),
        }
    }
}

/// Free-function form of [`ModelParams::embed`].
pub fn embed<T: Real>(params: &ModelParams<T>, x: &Tensor<T>, head: Head) -> Result<Tensor<T>> {
    params.embed(x, head)
}
