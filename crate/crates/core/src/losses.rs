//! Training objectives: local contrastive (SimCLR or BYOL), local and global
//! relational distillation, global contrastive distillation and their sums.
//!
//! Every batched loss averages its per-anchor terms over the batch. Inputs
//! are `rows × dim` embedding matrices on a [`Graph`]; similarities are
//! cosine similarities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Graph, Real, Tensor, Var};

/// Loss hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Temperature shared by every objective.
    pub tau: f64,
    /// Adds the positive pair to the global contrastive denominator
    /// (standard InfoNCE) instead of the as-written `2n − 2` negatives.
    pub global_positive_in_denominator: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.1,
            global_positive_in_denominator: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )))
    }
}

fn check_aligned<T: Real>(a: &Var<'_, T>, b: &Var<'_, T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?} are not index-aligned",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `(2n−1)`-way instance discrimination: each anchor `z_i` scores its
/// positive `z̃_i` against every other embedding of `B ∪ B̃`.
pub fn local_contrastive_simclr<'g, T: Real>(
    z: Var<'g, T>,
    z_tilde: Var<'g, T>,
    tau: f64,
) -> Result<Var<'g, T>> {
    check_tau(tau)?;
    check_aligned(&z, &z_tilde, "local contrastive")?;
    let n = z.shape()[0];
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "contrastive loss needs n ≥ 2, got {n}"
        )));
    }
    let zn = z.normalize_rows()?;
    let zt = z_tilde.normalize_rows()?;
    let all = Var::concat_rows(&[zn, zt]);
    let logits = zn.matmul_t(&all).scale(T::of(1.0 / tau));
    let mut mask = vec![true; n * 2 * n];
    for i in 0..n {
        mask[i * 2 * n + i] = false;
    }
    let positives: Vec<usize> = (0..n).map(|i| n + i).collect();
    let lse = logits.masked_logsumexp_rows(&mask);
    Ok(lse.sub(&logits.pick(&positives)).mean())
}

/// Mean squared distance between L2-normalised predictions and detached targets.
pub fn local_contrastive_byol<'g, T: Real>(
    prediction: Var<'g, T>,
    target: Var<'g, T>,
) -> Result<Var<'g, T>> {
    check_aligned(&prediction, &target, "BYOL loss")?;
    let p = prediction.normalize_rows()?;
    let t = target.detach().normalize_rows()?;
    Ok(p.sub(&t).square().sum_cols().mean())
}

/// Row `i`: `softmax_j(sim(anchor_i, ref_j) / τ)` over the reference batch.
pub fn relationship_matrix<'g, T: Real>(
    anchors: Var<'g, T>,
    refs: Var<'g, T>,
    tau: f64,
) -> Result<Var<'g, T>> {
    check_tau(tau)?;
    if refs.shape()[0] == 0 {
        return Err(Error::InvalidArgument("empty reference batch".into()));
    }
    let a = anchors.normalize_rows()?;
    let r = refs.normalize_rows()?;
    Ok(a.matmul_t(&r).scale(T::of(1.0 / tau)).softmax_rows())
}

/// Jensen–Shannon divergence between matching rows of two relationship
/// matrices, averaged over rows.
///
/// The mixture `½(r + r̃)` is a detached target: gradients reach `r` and `r̃`
/// only through the first arguments of the two KL terms.
pub fn relational_loss<'g, T: Real>(r: Var<'g, T>, r_tilde: Var<'g, T>) -> Result<Var<'g, T>> {
    check_aligned(&r, &r_tilde, "relational loss")?;
    let mix = r.add(&r_tilde).scale(T::of(0.5)).detach();
    let ln_mix = mix.ln();
    let kl_r = r.mul(&r.ln().sub(&ln_mix)).sum_cols();
    let kl_t = r_tilde.mul(&r_tilde.ln().sub(&ln_mix)).sum_cols();
    Ok(kl_r.add(&kl_t).scale(T::of(0.5)).mean())
}

/// Local relational loss: relationship vectors of both views against the
/// live local embeddings of the reference batch.
pub fn local_relational<'g, T: Real>(
    z: Var<'g, T>,
    z_tilde: Var<'g, T>,
    z_ref: Var<'g, T>,
    tau: f64,
) -> Result<Var<'g, T>> {
    let r = relationship_matrix(z, z_ref, tau)?;
    let rt = relationship_matrix(z_tilde, z_ref, tau)?;
    relational_loss(r, rt)
}

/// Relationship vectors of the projected local views against detached
/// global embeddings of the reference batch.
pub fn global_relationship_vectors<'g, T: Real>(
    zl: Var<'g, T>,
    zl_tilde: Var<'g, T>,
    zg_ref: Var<'g, T>,
    tau: f64,
) -> Result<(Var<'g, T>, Var<'g, T>)> {
    let refs = zg_ref.detach();
    Ok((
        relationship_matrix(zl, refs, tau)?,
        relationship_matrix(zl_tilde, refs, tau)?,
    ))
}

pub fn global_relational<'g, T: Real>(
    zl: Var<'g, T>,
    zl_tilde: Var<'g, T>,
    zg_ref: Var<'g, T>,
    tau: f64,
) -> Result<Var<'g, T>> {
    let (r, rt) = global_relationship_vectors(zl, zl_tilde, zg_ref, tau)?;
    relational_loss(r, rt)
}

/// Global contrastive distillation.
///
/// Anchor `zl_i` (projected local view of `x_i`) is pulled toward the global
/// embedding `zg̃_i` of the other view. Negatives are the other `n − 1`
/// projected local embeddings and the other `n − 1` global embeddings of `B`.
/// The positive is excluded from the denominator unless
/// `positive_in_denominator` is set. Global inputs are detached here.
pub fn global_contrastive<'g, T: Real>(
    zl: Var<'g, T>,
    zg_tilde: Var<'g, T>,
    zg: Var<'g, T>,
    tau: f64,
    positive_in_denominator: bool,
) -> Result<Var<'g, T>> {
    check_tau(tau)?;
    check_aligned(&zl, &zg_tilde, "global contrastive")?;
    check_aligned(&zl, &zg, "global contrastive")?;
    let n = zl.shape()[0];
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "contrastive loss needs n ≥ 2, got {n}"
        )));
    }
    let l = zl.normalize_rows()?;
    let gt = zg_tilde.detach().normalize_rows()?;
    let g = zg.detach().normalize_rows()?;
    let local_local = l.matmul_t(&l);
    let local_global = l.matmul_t(&g);
    let positive = l.mul(&gt).sum_cols().as_column();
    let logits = local_local
        .concat_cols(&local_global)
        .concat_cols(&positive)
        .scale(T::of(1.0 / tau));
    let width = 2 * n + 1;
    let mut mask = vec![true; n * width];
    for i in 0..n {
        mask[i * width + i] = false;
        mask[i * width + n + i] = false;
        mask[i * width + 2 * n] = positive_in_denominator;
    }
    let lse = logits.masked_logsumexp_rows(&mask);
    Ok(lse.sub(&logits.pick(&vec![2 * n; n])).mean())
}

/// The four loss components of one step.
#[derive(Clone, Copy)]
pub struct KdTerms<'g, T: Real> {
    pub local_c: Var<'g, T>,
    pub local_r: Var<'g, T>,
    pub global_c: Var<'g, T>,
    pub global_r: Var<'g, T>,
}

impl<'g, T: Real> KdTerms<'g, T> {
    pub fn local_kd(&self) -> Var<'g, T> {
        total_local_kd(self.local_c, self.local_r)
    }

    pub fn global_kd(&self) -> Var<'g, T> {
        total_global_kd(self.global_c, self.global_r)
    }

    pub fn total(&self) -> Var<'g, T> {
        total_kd(self.local_kd(), self.global_kd())
    }

    pub fn values(&self) -> LossValues {
        LossValues {
            local_c: self.local_c.item().as_f64(),
            local_r: self.local_r.item().as_f64(),
            global_c: self.global_c.item().as_f64(),
            global_r: self.global_r.item().as_f64(),
        }
    }
}

pub fn total_local_kd<'g, T: Real>(contrastive: Var<'g, T>, relational: Var<'g, T>) -> Var<'g, T> {
    contrastive.add(&relational)
}

pub fn total_global_kd<'g, T: Real>(contrastive: Var<'g, T>, relational: Var<'g, T>) -> Var<'g, T> {
    contrastive.add(&relational)
}

pub fn total_kd<'g, T: Real>(local_kd: Var<'g, T>, global_kd: Var<'g, T>) -> Var<'g, T> {
    local_kd.add(&global_kd)
}

/// Embeddings feeding one FedX step. Global entries come from the frozen
/// global backbone and are detached inside the losses.
#[derive(Clone, Copy)]
pub struct KdInputs<'g, T: Real> {
    /// `f(x_i)` for `B`, `B̃`, `B_r`.
    pub z: Var<'g, T>,
    pub z_tilde: Var<'g, T>,
    pub z_ref: Var<'g, T>,
    /// `h ∘ f` of `B` and `B̃`.
    pub zl: Var<'g, T>,
    pub zl_tilde: Var<'g, T>,
    /// `F(x)` for `B`, `B̃`, `B_r`.
    pub zg: Var<'g, T>,
    pub zg_tilde: Var<'g, T>,
    pub zg_ref: Var<'g, T>,
}

/// Relational and global terms of FedX around a caller-supplied local
/// contrastive term (SimCLR or BYOL).
pub fn kd_terms<'g, T: Real>(
    inputs: &KdInputs<'g, T>,
    local_c: Var<'g, T>,
    cfg: &LossConfig,
) -> Result<KdTerms<'g, T>> {
    Ok(KdTerms {
        local_c,
        local_r: local_relational(inputs.z, inputs.z_tilde, inputs.z_ref, cfg.tau)?,
        global_c: global_contrastive(
            inputs.zl,
            inputs.zg_tilde,
            inputs.zg,
            cfg.tau,
            cfg.global_positive_in_denominator,
        )?,
        global_r: global_relational(inputs.zl, inputs.zl_tilde, inputs.zg_ref, cfg.tau)?,
    })
}

/// Scalar loss components of a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub local_c: f64,
    pub local_r: f64,
    pub global_c: f64,
    pub global_r: f64,
}

impl LossValues {
    pub fn local_kd(&self) -> f64 {
        self.local_c + self.local_r
    }

    pub fn global_kd(&self) -> f64 {
        self.global_c + self.global_r
    }

    pub fn total(&self) -> f64 {
        self.local_kd() + self.global_kd()
    }

    pub fn is_finite(&self) -> bool {
        [self.local_c, self.local_r, self.global_c, self.global_r]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// A single relationship probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationVector<T> {
    pub probabilities: Vec<T>,
    pub tau: f64,
}

/// Relationship vector of one anchor against a `refs × dim` reference batch.
pub fn relationship_vector<T: Real>(
    anchor: &[T],
    refs: &Tensor<T>,
    tau: f64,
) -> Result<RelationVector<T>> {
    let graph = Graph::new();
    let a = graph.constant(Tensor::new(vec![1, anchor.len()], anchor.to_vec())?);
    let r = graph.constant(refs.clone());
    if refs.cols() != anchor.len() {
        return Err(Error::Shape(format!(
            "anchor of length {} vs references of width {}",
            anchor.len(),
            refs.cols()
        )));
    }
    let m = relationship_matrix(a, r, tau)?;
    Ok(RelationVector {
        probabilities: m.value().data().to_vec(),
        tau,
    })
}

/// Jensen–Shannon divergence of two relationship vectors.
pub fn relational_loss_value<T: Real>(
    r: &RelationVector<T>,
    r_tilde: &RelationVector<T>,
) -> Result<T> {
    let n = r.probabilities.len();
    if n != r_tilde.probabilities.len() {
        return Err(Error::Shape(format!(
            "relationship vectors of lengths {n} and {}",
            r_tilde.probabilities.len()
        )));
    }
    let graph = Graph::new();
    let a = graph.constant(Tensor::new(vec![1, n], r.probabilities.clone())?);
    let b = graph.constant(Tensor::new(vec![1, n], r_tilde.probabilities.clone())?);
    Ok(relational_loss(a, b)?.item())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat<'g>(g: &'g Graph<f64>, rows: usize, data: &[f64]) -> Var<'g, f64> {
        let cols = data.len() / rows;
        g.constant(Tensor::new(vec![rows, cols], data.to_vec()).unwrap())
    }

    #[test]
    fn simclr_identical_embeddings_give_ln3() {
        let g = Graph::new();
        let z = mat(&g, 2, &[1.0, 2.0, 1.0, 2.0]);
        let l = local_contrastive_simclr(z, z, 1.0).unwrap().item();
        assert!((l - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn simclr_orthogonal_negatives() {
        // z1 = z̃1 = e1, z2 = z̃2 = e2: anchor sees e^1 (positive) + 2 e^0
        let g = Graph::new();
        let z = mat(&g, 2, &[1.0, 0.0, 0.0, 1.0]);
        let l = local_contrastive_simclr(z, z, 1.0).unwrap().item();
        let expected = (1.0 + 2.0 / 1f64.exp()).ln();
        assert!((l - expected).abs() < 1e-12, "{l} vs {expected}");
    }

    #[test]
    fn simclr_requires_negatives() {
        let g = Graph::new();
        let z = mat(&g, 1, &[1.0, 0.0]);
        assert!(local_contrastive_simclr(z, z, 0.1).is_err());
        let zero = mat(&g, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            local_contrastive_simclr(zero, zero, 0.1),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn byol_closed_forms() {
        let g = Graph::new();
        let a = mat(&g, 2, &[1.0, 0.0, 0.0, 3.0]);
        let neg = mat(&g, 2, &[-2.0, 0.0, 0.0, -1.0]);
        let orth = mat(&g, 2, &[0.0, 5.0, 1.0, 0.0]);
        assert!(local_contrastive_byol(a, a).unwrap().item().abs() < 1e-12);
        assert!((local_contrastive_byol(a, neg).unwrap().item() - 4.0).abs() < 1e-12);
        assert!((local_contrastive_byol(a, orth).unwrap().item() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn relationship_vector_cases() {
        let refs = Tensor::new(vec![3, 2], vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
        // anchor e1 has sims [1, 0, -1]
        let r = relationship_vector(&[2.0f64, 0.0], &refs, 0.1).unwrap();
        let e = [10f64.exp(), 1.0, (-10f64).exp()];
        let z: f64 = e.iter().sum();
        for (p, v) in r.probabilities.iter().zip(e) {
            assert!((p - v / z).abs() < 1e-12);
        }
        let single = Tensor::new(vec![1, 2], vec![0.3, -0.2]).unwrap();
        assert_eq!(
            relationship_vector(&[1.0f64, 1.0], &single, 0.1)
                .unwrap()
                .probabilities,
            vec![1.0]
        );
        // equidistant refs: anchor on the bisector of e1 and e2
        let eq = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let u = relationship_vector(&[1.0f64, 1.0], &eq, 0.1).unwrap();
        assert!((u.probabilities[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relational_loss_cases() {
        let rv = |p: Vec<f64>| RelationVector {
            probabilities: p,
            tau: 0.1,
        };
        let a = rv(vec![0.7, 0.3]);
        let b = rv(vec![0.4, 0.6]);
        assert!(relational_loss_value(&a, &a).unwrap().abs() < 1e-15);
        let m = [0.55, 0.45];
        let oracle = 0.5 * (0.7 * (0.7f64 / m[0]).ln() + 0.3 * (0.3f64 / m[1]).ln())
            + 0.5 * (0.4 * (0.4f64 / m[0]).ln() + 0.6 * (0.6f64 / m[1]).ln());
        assert!((relational_loss_value(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert!(relational_loss_value(&a, &rv(vec![1.0])).is_err());
    }

    #[test]
    fn relational_loss_disjoint_support_is_ln2() {
        // exact zeros would hit ln(0); use the smallest positive mass instead
        let tiny = 1e-300;
        let rv = |p: Vec<f64>| RelationVector {
            probabilities: p,
            tau: 1.0,
        };
        let v = relational_loss_value(&rv(vec![1.0, tiny]), &rv(vec![tiny, 1.0])).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn global_contrastive_identical_is_ln2() {
        let g = Graph::new();
        let z = mat(&g, 2, &[0.5, 0.5, 0.5, 0.5]);
        let l = global_contrastive(z, z, z, 1.0, false).unwrap().item();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let with_pos = global_contrastive(z, z, z, 1.0, true).unwrap().item();
        assert!((with_pos - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn totals_are_sums() {
        let g = Graph::new();
        let c = |v: f64| g.constant(Tensor::scalar(v));
        let zero = total_kd(
            total_local_kd(c(0.0), c(0.0)),
            total_global_kd(c(0.0), c(0.0)),
        );
        assert_eq!(zero.item(), 0.0);
        let t = total_kd(
            total_local_kd(c(0.25), c(0.5)),
            total_global_kd(c(1.0), c(2.0)),
        );
        assert!((t.item() - 3.75).abs() < 1e-15);
    }
}
