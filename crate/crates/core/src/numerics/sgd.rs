use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Real, Tensor};

/// Hyperparameters of momentum SGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-5,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be non-negative, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffers of a momentum-SGD optimizer, one per parameter name.
///
/// Update rule: `g' = g + wd·w; v' = μ·v + g'; w' = w − lr·v'`.
#[derive(Clone, Debug)]
pub struct SgdState<T> {
    pub config: SgdConfig,
    buffers: IndexMap<String, Vec<T>>,
}

impl<T: Real> SgdState<T> {
    pub fn new(config: SgdConfig) -> Self {
        SgdState {
            config,
            buffers: IndexMap::new(),
        }
    }

    /// Registers a zero buffer for every named parameter.
    pub fn with_params<'a>(
        config: SgdConfig,
        params: impl IntoIterator<Item = (&'a str, &'a Tensor<T>)>,
    ) -> Self {
        let buffers = params
            .into_iter()
            .map(|(name, t)| (name.to_string(), vec![T::zero(); t.numel()]))
            .collect();
        SgdState { config, buffers }
    }

    pub fn buffer(&self, name: &str) -> Option<&[T]> {
        self.buffers.get(name).map(Vec::as_slice)
    }

    pub fn reset(&mut self) {
        for b in self.buffers.values_mut() {
            b.fill(T::zero());
        }
    }

    /// Applies one update to `param` using its gradient `grad`.
    pub fn step_one(&mut self, name: &str, param: &mut Tensor<T>, grad: &Tensor<T>) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::Shape(format!(
                "parameter {name} has shape {:?} but gradient {:?}",
                param.shape(),
                grad.shape()
            )));
        }
        let buf = self
            .buffers
            .entry(name.to_string())
            .or_insert_with(|| vec![T::zero(); param.numel()]);
        if buf.len() != param.numel() {
            return Err(Error::Shape(format!(
                "momentum buffer for {name} holds {} values, parameter {}",
                buf.len(),
                param.numel()
            )));
        }
        let lr = T::of(self.config.lr);
        let mu = T::of(self.config.momentum);
        let wd = T::of(self.config.weight_decay);
        for ((w, &g), v) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(buf.iter_mut())
        {
            let g = g + wd * *w;
            *v = mu * *v + g;
            *w -= lr * *v;
        }
        Ok(())
    }
}

/// Steps every parameter that has a gradient; parameters without one are left untouched.
pub fn sgd_step<T: Real>(
    params: &mut IndexMap<String, Tensor<T>>,
    grads: &IndexMap<String, Tensor<T>>,
    state: &mut SgdState<T>,
) -> Result<()> {
    for (name, grad) in grads {
        let param = params
            .get_mut(name)
            .ok_or_else(|| Error::Shape(format!("gradient for unknown parameter {name}")))?;
        state.step_one(name, param, grad)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> IndexMap<String, Tensor<f64>> {
        IndexMap::from([("w".to_string(), Tensor::scalar(w))])
    }

    fn cfg(lr: f64, momentum: f64, weight_decay: f64) -> SgdConfig {
        SgdConfig {
            lr,
            momentum,
            weight_decay,
        }
    }

    #[test]
    fn plain_gradient_step() {
        let mut p = single(1.0);
        let mut s = SgdState::new(cfg(0.1, 0.0, 0.0));
        sgd_step(&mut p, &single(2.0), &mut s).unwrap();
        assert!((p["w"].item() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = single(1.25);
        let mut s = SgdState::new(cfg(0.0, 0.9, 1e-5));
        for _ in 0..3 {
            sgd_step(&mut p, &single(7.0), &mut s).unwrap();
        }
        assert_eq!(p["w"].item(), 1.25);
    }

    #[test]
    fn momentum_recurrence() {
        let mut p = single(0.5);
        let mut s = SgdState::new(cfg(0.1, 0.9, 0.0));
        sgd_step(&mut p, &single(1.0), &mut s).unwrap();
        sgd_step(&mut p, &single(1.0), &mut s).unwrap();
        assert!((p["w"].item() - (0.5 - 0.1 - 0.19)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = IndexMap::from([("w".to_string(), Tensor::<f64>::zeros(&[2]))]);
        let g = IndexMap::from([("w".to_string(), Tensor::<f64>::zeros(&[3]))]);
        let mut s = SgdState::new(SgdConfig::default());
        assert!(matches!(sgd_step(&mut p, &g, &mut s), Err(Error::Shape(_))));
    }
}
