//! Scalar-loop reference implementations. Nothing here touches the graph:
//! rows are plain `Vec<f64>` and every sum is an explicit loop.

#![allow(dead_code, clippy::needless_range_loop)]

use fedx::encoder::{ActivationKind, ModelParams, Role};
use fedx::numerics::Tensor;

pub type Rows = Vec<Vec<f64>>;

pub fn rows(t: &Tensor<f64>) -> Rows {
    let cols = t.shape()[1];
    t.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub fn simclr(z: &Rows, zt: &Rows, tau: f64) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    for i in 0..n {
        let pos = (cosine(&z[i], &zt[i]) / tau).exp();
        let mut denom = 0.0;
        for k in 0..n {
            if k != i {
                denom += (cosine(&z[i], &z[k]) / tau).exp();
            }
            denom += (cosine(&z[i], &zt[k]) / tau).exp();
        }
        total += -(pos / denom).ln();
    }
    total / n as f64
}

pub fn byol(p: &Rows, t: &Rows) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        let np: f64 = p[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        let nt: f64 = t[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        for d in 0..p[i].len() {
            let diff = p[i][d] / np - t[i][d] / nt;
            total += diff * diff;
        }
    }
    total / p.len() as f64
}

pub fn relationship(anchor: &[f64], refs: &Rows, tau: f64) -> Vec<f64> {
    let e: Vec<f64> = refs
        .iter()
        .map(|r| (cosine(anchor, r) / tau).exp())
        .collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += p[i] * (p[i] / q[i]).ln();
    }
    s
}

pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

pub fn relational(a: &Rows, b: &Rows, refs: &Rows, tau: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        total += jsd(
            &relationship(&a[i], refs, tau),
            &relationship(&b[i], refs, tau),
        );
    }
    total / a.len() as f64
}

pub fn global_contrastive(zl: &Rows, zg_tilde: &Rows, zg: &Rows, tau: f64, positive: bool) -> f64 {
    let n = zl.len();
    let mut total = 0.0;
    for i in 0..n {
        let pos = (cosine(&zl[i], &zg_tilde[i]) / tau).exp();
        let mut denom = if positive { pos } else { 0.0 };
        for k in 0..n {
            if k != i {
                denom += (cosine(&zl[i], &zl[k]) / tau).exp();
                denom += (cosine(&zl[i], &zg[k]) / tau).exp();
            }
        }
        total += -(pos / denom).ln();
    }
    total / n as f64
}

fn mlp(model: &ModelParams<f64>, role: Role, layers: usize, x: &[f64]) -> Vec<f64> {
    let act = model.descriptor().activation;
    let mut h = x.to_vec();
    for l in 0..layers {
        let w = model.get(&format!("{}.{l}.weight", role.prefix())).unwrap();
        let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
        let mut out = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut s = 0.0;
            for i in 0..fan_in {
                s += h[i] * w.data()[i * fan_out + o];
            }
            if let Some(b) = model.get(&format!("{}.{l}.bias", role.prefix())) {
                s += b.data()[o];
            }
            out[o] = if l + 1 < layers {
                match act {
                    ActivationKind::Relu => s.max(0.0),
                    ActivationKind::Tanh => s.tanh(),
                }
            } else {
                s
            };
        }
        h = out;
    }
    h
}

pub fn backbone(model: &ModelParams<f64>, x: &Rows) -> Rows {
    let layers = model.descriptor().hidden.len() + 1;
    x.iter()
        .map(|r| mlp(model, Role::Backbone, layers, r))
        .collect()
}

pub fn projection(model: &ModelParams<f64>, z: &Rows) -> Rows {
    z.iter()
        .map(|r| mlp(model, Role::ProjectionHead, 2, r))
        .collect()
}

/// Full FedSimCLR+FedX objective for one batch, from raw inputs.
pub fn fedx_total(
    local: &ModelParams<f64>,
    global: &ModelParams<f64>,
    x: &Rows,
    x_tilde: &Rows,
    x_ref: &Rows,
    tau: f64,
) -> f64 {
    let z = backbone(local, x);
    let zt = backbone(local, x_tilde);
    let zr = backbone(local, x_ref);
    let zl = projection(local, &z);
    let zlt = projection(local, &zt);
    let zg = backbone(global, x);
    let zgt = backbone(global, x_tilde);
    let zgr = backbone(global, x_ref);
    simclr(&z, &zt, tau)
        + relational(&z, &zt, &zr, tau)
        + global_contrastive(&zl, &zgt, &zg, tau, false)
        + relational(&zl, &zlt, &zgr, tau)
}

/// Angle in degrees between two vectors through `acos` of the clamped cosine.
pub fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    cosine(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}
