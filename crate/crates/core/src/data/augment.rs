use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random crop with reflect padding, horizontal flip and per-channel affine
/// colour jitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    /// Reflect padding in pixels before a random crop back to the input size.
    pub crop_padding: usize,
    pub flip_prob: f64,
    /// Per-channel multiplicative jitter range `[lo, hi]`.
    pub jitter_scale: [f64; 2],
    /// Per-channel additive jitter range `[lo, hi]`.
    pub jitter_shift: [f64; 2],
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            crop_padding: 2,
            flip_prob: 0.5,
            jitter_scale: [0.8, 1.2],
            jitter_shift: [-0.1, 0.1],
        }
    }
}

impl AugmentPolicy {
    /// Zero-strength policy: every view equals its input.
    pub fn identity() -> Self {
        AugmentPolicy {
            crop_padding: 0,
            flip_prob: 0.0,
            jitter_scale: [1.0, 1.0],
            jitter_shift: [0.0, 0.0],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self, shape: (usize, usize, usize)) -> Result<()> {
        let (_, h, w) = shape;
        if self.crop_padding > 0 && (self.crop_padding >= h || self.crop_padding >= w) {
            return Err(Error::Config(format!(
                "crop padding {} needs images larger than {h}x{w}",
                self.crop_padding
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!(
                "flip probability {} outside [0, 1]",
                self.flip_prob
            )));
        }
        let [slo, shi] = self.jitter_scale;
        let [tlo, thi] = self.jitter_shift;
        if !(slo <= shi && tlo <= thi && slo >= 0.0) {
            return Err(Error::Config(format!("bad jitter ranges {self:?}")));
        }
        Ok(())
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// One stochastic view of a `channels × height × width` sample in `[0, 1]`.
pub fn augment_view<R: Rng>(
    sample: &[f32],
    shape: (usize, usize, usize),
    policy: &AugmentPolicy,
    rng: &mut R,
) -> Vec<f32> {
    let (c, h, w) = shape;
    debug_assert_eq!(sample.len(), c * h * w);
    let pad = policy.crop_padding as isize;
    let (dy, dx) = if pad > 0 {
        (
            rng.random_range(0..=2 * pad as i64) as isize,
            rng.random_range(0..=2 * pad as i64) as isize,
        )
    } else {
        (pad, pad)
    };
    let flip = policy.flip_prob > 0.0 && rng.random_bool(policy.flip_prob);
    let mut out = Vec::with_capacity(sample.len());
    for ch in 0..c {
        let scale = uniform(rng, policy.jitter_scale) as f32;
        let shift = uniform(rng, policy.jitter_shift) as f32;
        let plane = &sample[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            let sy = reflect(y as isize + dy - pad, h);
            for x in 0..w {
                let xx = if flip { w - 1 - x } else { x };
                let sx = reflect(xx as isize + dx - pad, w);
                out.push((plane[sy * w + sx] * scale + shift).clamp(0.0, 1.0));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(c: usize, h: usize, w: usize) -> Vec<f32> {
        (0..c * h * w)
            .map(|i| (i as f32) / (c * h * w) as f32)
            .collect()
    }

    #[test]
    fn identity_policy_is_identity() {
        let x = ramp(3, 6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            augment_view(&x, (3, 6, 6), &AugmentPolicy::identity(), &mut rng),
            x
        );
    }

    #[test]
    fn same_seed_same_view() {
        let x = ramp(3, 6, 6);
        let p = AugmentPolicy::default();
        let a = augment_view(&x, (3, 6, 6), &p, &mut ChaCha8Rng::seed_from_u64(5));
        let b = augment_view(&x, (3, 6, 6), &p, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn flip_only_mirrors_rows() {
        let x = ramp(1, 2, 3);
        let p = AugmentPolicy {
            flip_prob: 1.0,
            ..AugmentPolicy::identity()
        };
        let y = augment_view(&x, (1, 2, 3), &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(y, vec![x[2], x[1], x[0], x[5], x[4], x[3]]);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
    }
}
