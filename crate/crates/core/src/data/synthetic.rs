//! Procedural class-structured image sets for desk-scale experiments.
//!
//! Each class owns a prototype made of a few coloured Gaussian blobs. A sample
//! is its class prototype after a random translation, optional mirror,
//! per-channel gain, an unrelated distractor blob, background level and pixel
//! noise, so class identity is carried by blob layout rather than raw colour.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub channels: usize,
    pub size: usize,
    pub blobs_per_class: usize,
    pub max_shift: usize,
    pub gain_range: [f64; 2],
    pub distractor_amplitude: f64,
    pub noise_std: f64,
    /// Seed of the class prototypes; sample seeds are passed to [`SyntheticImages::generate`].
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 10,
            channels: 3,
            size: 8,
            blobs_per_class: 2,
            max_shift: 2,
            gain_range: [0.7, 1.3],
            distractor_amplitude: 1.0,
            noise_std: 0.1,
            seed: 2023,
        }
    }
}

#[derive(Clone, Debug)]
struct Blob {
    cy: f64,
    cx: f64,
    sigma: f64,
    color: Vec<f64>,
}

impl Blob {
    fn random<R: Rng>(rng: &mut R, cfg: &SyntheticConfig, amplitude: f64) -> Self {
        let s = cfg.size as f64;
        Blob {
            cy: rng.random_range(0.0..s),
            cx: rng.random_range(0.0..s),
            sigma: rng.random_range(0.8..1.8),
            color: (0..cfg.channels)
                .map(|_| amplitude * rng.random_range(0.2..1.0))
                .collect(),
        }
    }

    fn paint(&self, img: &mut [f64], cfg: &SyntheticConfig, dy: f64, dx: f64, gain: &[f64]) {
        let n = cfg.size;
        for (ch, plane) in img.chunks_mut(n * n).enumerate() {
            for y in 0..n {
                for x in 0..n {
                    let ry = y as f64 - (self.cy + dy);
                    let rx = x as f64 - (self.cx + dx);
                    let v = (-(ry * ry + rx * rx) / (2.0 * self.sigma * self.sigma)).exp();
                    plane[y * n + x] += gain[ch] * self.color[ch] * v;
                }
            }
        }
    }
}

/// Generator holding the class prototypes.
#[derive(Clone, Debug)]
pub struct SyntheticImages {
    cfg: SyntheticConfig,
    prototypes: Vec<Vec<Blob>>,
}

impl SyntheticImages {
    pub fn new(cfg: SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let prototypes = (0..cfg.classes)
            .map(|_| {
                (0..cfg.blobs_per_class)
                    .map(|_| Blob::random(&mut rng, &cfg, 1.0))
                    .collect()
            })
            .collect();
        SyntheticImages { cfg, prototypes }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    /// `per_class` samples of every class, class-interleaved.
    pub fn generate(&self, per_class: usize, seed: u64) -> Result<Dataset> {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).expect("finite noise");
        let dim = cfg.channels * cfg.size * cfg.size;
        let mut samples = Vec::with_capacity(per_class * cfg.classes * dim);
        let mut labels = Vec::with_capacity(per_class * cfg.classes);
        let shift = cfg.max_shift as f64;
        for _ in 0..per_class {
            for (label, proto) in self.prototypes.iter().enumerate() {
                let mut img = vec![rng.random_range(0.0..0.25); dim];
                let dy = if shift > 0.0 {
                    rng.random_range(-shift..=shift)
                } else {
                    0.0
                };
                let dx = if shift > 0.0 {
                    rng.random_range(-shift..=shift)
                } else {
                    0.0
                };
                let mirror = rng.random_bool(0.5);
                let gain: Vec<f64> = (0..cfg.channels)
                    .map(|_| rng.random_range(cfg.gain_range[0]..=cfg.gain_range[1]))
                    .collect();
                for blob in proto {
                    let mut b = blob.clone();
                    if mirror {
                        b.cx = cfg.size as f64 - 1.0 - b.cx;
                    }
                    b.paint(&mut img, cfg, dy, dx, &gain);
                }
                if cfg.distractor_amplitude > 0.0 {
                    let ones = vec![1.0; cfg.channels];
                    Blob::random(&mut rng, cfg, cfg.distractor_amplitude)
                        .paint(&mut img, cfg, 0.0, 0.0, &ones);
                }
                samples.extend(img.into_iter().map(|v| {
                    let n = if cfg.noise_std > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    (v + n).clamp(0.0, 1.0) as f32
                }));
                labels.push(label);
            }
        }
        Dataset::new(
            (cfg.channels, cfg.size, cfg.size),
            cfg.classes,
            samples,
            labels,
        )
    }
}
