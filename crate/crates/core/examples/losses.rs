//! The training objectives on hand-made embeddings, with gradients from the
//! reverse-mode tape.
//!
//! Run with `cargo run --example losses`.

use fedx::losses::{
    global_contrastive, global_relational, local_contrastive_byol, local_contrastive_simclr,
    local_relational, relationship_vector,
};
use fedx::numerics::{Graph, Tensor};

fn main() -> fedx::Result<()> {
    let z = Tensor::new(vec![3, 2], vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.2])?;
    let z_tilde = Tensor::new(vec![3, 2], vec![0.9, 0.1, 0.1, 0.8, -0.9, 0.0])?;
    let refs = Tensor::new(vec![4, 2], vec![1.0, 1.0, -1.0, 1.0, 0.0, -1.0, 0.5, 0.0])?;

    let r = relationship_vector(&[1.0f64, 0.0], &refs, 0.5)?;
    println!(
        "relationship vector of e1 against 4 references: {:.3?}",
        r.probabilities
    );

    let g = Graph::new();
    let zv = g.param("z", z);
    let ztv = g.constant(z_tilde);
    let rv = g.constant(refs);
    let simclr = local_contrastive_simclr(zv, ztv, 0.5)?;
    let byol = local_contrastive_byol(zv, ztv)?;
    let local_r = local_relational(zv, ztv, rv, 0.5)?;
    // z̃ stands in for the global model's embeddings here
    let global_c = global_contrastive(zv, ztv, ztv, 0.5, false)?;
    let global_r = global_relational(zv, ztv, rv, 0.5)?;
    for (name, v) in [
        ("simclr", simclr),
        ("byol", byol),
        ("local relational", local_r),
        ("global contrastive", global_c),
        ("global relational", global_r),
    ] {
        println!("{name:>20}: {:.5}", v.item());
    }

    let total = simclr.add(&local_r).add(&global_c).add(&global_r);
    let grads = g.backward(total)?;
    println!("d total / d z = {:.4?}", grads["z"].data());
    Ok(())
}
