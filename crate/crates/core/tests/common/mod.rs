#![allow(dead_code)]

pub mod oracle;

use fedx::numerics::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builds the loss on a fresh graph from tracked inputs named `x0, x1, ...`.
pub fn eval_loss<F>(inputs: &[Tensor<f64>], build: &F) -> f64
where
    F: for<'g> Fn(&[Var<'g, f64>]) -> Var<'g, f64>,
{
    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    build(&vars).item()
}

/// Largest relative error between autodiff and central differences over
/// every element of the first `live` inputs. The remaining inputs are ones
/// the loss detaches, so their finite differences are not gradients.
/// Denominators are floored at 1e-4 so near-zero entries compare absolutely.
pub fn max_relative_error<F>(inputs: &[Tensor<f64>], live: usize, step: f64, build: F) -> f64
where
    F: for<'g> Fn(&[Var<'g, f64>]) -> Var<'g, f64>,
{
    let g = Graph::new();
    let vars: Vec<_> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| g.param(&format!("x{i}"), t.clone()))
        .collect();
    let loss = build(&vars);
    let grads = g.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate().take(live) {
        let name = format!("x{i}");
        for j in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += step;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= step;
            let fd = (eval_loss(&plus, &build) - eval_loss(&minus, &build)) / (2.0 * step);
            let ad = grads.get(&name).map_or(0.0, |g| g.data()[j]);
            let denom = fd.abs().max(ad.abs()).max(1e-4);
            worst = worst.max((fd - ad).abs() / denom);
        }
    }
    worst
}
