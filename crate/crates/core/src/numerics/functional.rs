//! Scalar reference operations on plain vectors.

use crate::error::{Error, Result};

use super::Real;

/// `aᵀb / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine similarity of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na <= T::zero() || nb <= T::zero() {
        return Err(Error::ZeroNorm("cosine similarity operand"));
    }
    Ok((dot / (na * nb)).max(-T::one()).min(T::one()))
}

/// `softmax(scores / tau)` computed with max subtraction.
pub fn softmax_with_temperature<T: Real>(scores: &[T], tau: T) -> Result<Vec<T>> {
    if tau.is_nan() || tau <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("softmax scores".into()));
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| ((s - max) / tau).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `Σ p ln(p/q)`, with `0 · ln(0/q) = 0`.
pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "KL divergence of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let tol = T::of(1e-6);
    for (name, v) in [("p", p), ("q", q)] {
        let total: T = v.iter().copied().sum();
        if (total - T::one()).abs() > tol || v.iter().any(|&x| x < T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "{name} is not a probability vector (sum {total})"
            )));
        }
    }
    let mut acc = T::zero();
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > T::zero() {
            if qi <= T::zero() {
                return Err(Error::SupportViolation { index });
            }
            acc += pi * (pi / qi).ln();
        }
    }
    Ok(acc.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0f64, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0f64, 2.0], &[2.0, 1.0]).unwrap();
        assert!((s - 0.8).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0f64, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn softmax_examples() {
        let u = softmax_with_temperature(&[0.3f64, 0.3, 0.3], 0.7).unwrap();
        for v in u {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax_with_temperature(&[0.0f64, 2f64.ln()], 1.0).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        // exp(9), exp(1), exp(-5) normalised
        let e = [9f64.exp(), 1f64.exp(), (-5f64).exp()];
        let z: f64 = e.iter().sum();
        let p = softmax_with_temperature(&[0.9f64, 0.1, -0.5], 0.1).unwrap();
        for (a, b) in p.iter().zip(e) {
            assert!((a - b / z).abs() < 1e-15);
        }
        assert!(softmax_with_temperature(&[1.0f64], 0.0).is_err());
        assert!(softmax_with_temperature(&[1.0f64], -1.0).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.2f64, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        let v = kl_divergence(&[1.0f64, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let oracle = 0.7 * (0.7f64 / 0.4).ln() + 0.3 * (0.3f64 / 0.6).ln();
        let v = kl_divergence(&[0.7f64, 0.3], &[0.4, 0.6]).unwrap();
        assert!((v - oracle).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&[0.5f64, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation { index: 1 })
        ));
    }
}
