use crate::encoder::{ModelParams, Role};
use crate::error::{Error, Result};
use crate::numerics::Real;

/// FedAvg: weighted mean of the given roles across client models.
///
/// Computed as `p₀ + Σ_m w_m (p_m − p₀)` in `f64` and clamped to the
/// clients' range, so identical clients and a single client reproduce their
/// parameters bit for bit. Tensors of other roles are copied from the first model.
pub fn aggregate_models<T: Real>(
    models: &[&ModelParams<T>],
    weights: &[f64],
    roles: &[Role],
) -> Result<ModelParams<T>> {
    let first = *models
        .first()
        .ok_or_else(|| Error::InvalidArgument("aggregation over zero clients".into()))?;
    if models.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "aggregation weights must be non-negative and sum to 1, got {total}"
        )));
    }
    if let Some(m) = models.iter().find(|m| m.descriptor() != first.descriptor()) {
        return Err(Error::DescriptorMismatch(format!(
            "client descriptor {:?} differs from {:?}",
            m.descriptor(),
            first.descriptor()
        )));
    }
    let mut out = first.clone();
    for (name, tensor) in out.tensors_mut().iter_mut() {
        if !Role::of(name).is_some_and(|r| roles.contains(&r)) {
            continue;
        }
        let sources: Vec<&[T]> = models
            .iter()
            .map(|m| m.get(name).expect("same descriptor, same names").data())
            .collect();
        for (i, dst) in tensor.data_mut().iter_mut().enumerate() {
            let base = sources[0][i];
            let mut acc = base.as_f64();
            let (mut lo, mut hi) = (base, base);
            for (src, &w) in sources.iter().zip(weights).skip(1) {
                let v = src[i];
                acc += w * (v.as_f64() - base.as_f64());
                lo = lo.min(v);
                hi = hi.max(v);
            }
            *dst = T::of(acc).max(lo).min(hi);
        }
    }
    Ok(out)
}
