mod common;

use common::oracle::{self, rows};
use common::{random_matrix, rng};
use fedx::encoder::{build_encoder, EncoderDescriptor};
use fedx::losses::{
    global_contrastive, global_relational, kd_terms, local_contrastive_byol,
    local_contrastive_simclr, local_relational, relational_loss_value, relationship_vector,
    KdInputs, LossConfig,
};
use fedx::numerics::{Graph, Tensor, Var};
use rand::Rng;

const INSTANCES: u64 = 100;
const TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

#[test]
fn vectorized_losses_match_scalar_oracles() {
    for seed in 0..INSTANCES {
        let mut r = rng(seed);
        let n = r.random_range(2..7);
        let d = r.random_range(2..9);
        let tau = r.random_range(0.1..1.0);
        let a = random_matrix(&mut r, n, d);
        let b = random_matrix(&mut r, n, d);
        let c = random_matrix(&mut r, n, d);
        let m = r.random_range(1..7);
        let refs = random_matrix(&mut r, m, d);
        let g = Graph::new();
        let [va, vb, vc, vr] = [&a, &b, &c, &refs].map(|t| g.constant(t.clone()));
        let (ra, rb, rc, rr) = (rows(&a), rows(&b), rows(&c), rows(&refs));

        let got = local_contrastive_simclr(va, vb, tau).unwrap().item();
        assert!(
            close(got, oracle::simclr(&ra, &rb, tau)),
            "simclr seed {seed}"
        );

        let got = local_contrastive_byol(va, vb).unwrap().item();
        assert!(close(got, oracle::byol(&ra, &rb)), "byol seed {seed}");

        let p = relationship_vector(&ra[0], &refs, tau).unwrap();
        let want = oracle::relationship(&ra[0], &rr, tau);
        for (x, y) in p.probabilities.iter().zip(&want) {
            assert!(close(*x, *y), "relationship seed {seed}");
        }
        let q = relationship_vector(&rb[0], &refs, tau).unwrap();
        let got = relational_loss_value(&p, &q).unwrap();
        assert!(
            close(got, oracle::jsd(&want, &q.probabilities)),
            "jsd seed {seed}"
        );

        let got = local_relational(va, vb, vr, tau).unwrap().item();
        assert!(
            close(got, oracle::relational(&ra, &rb, &rr, tau)),
            "local relational seed {seed}"
        );

        let got = global_relational(va, vb, vr, tau).unwrap().item();
        assert!(
            close(got, oracle::relational(&ra, &rb, &rr, tau)),
            "global relational seed {seed}"
        );

        for positive in [false, true] {
            let got = global_contrastive(va, vb, vc, tau, positive)
                .unwrap()
                .item();
            let want = oracle::global_contrastive(&ra, &rb, &rc, tau, positive);
            assert!(
                close(got, want),
                "global contrastive seed {seed} positive {positive}"
            );
        }
    }
}

#[test]
fn full_objective_matches_end_to_end_oracle() {
    let desc = EncoderDescriptor {
        hidden: vec![16],
        embed_dim: 8,
        head_hidden: 12,
        ..EncoderDescriptor::mlp(10)
    };
    let local = build_encoder::<f64>(&desc, 1).unwrap();
    let global = build_encoder::<f64>(&desc, 2).unwrap();
    let mut r = rng(9);
    let x = random_matrix(&mut r, 4, 10);
    let xt = random_matrix(&mut r, 4, 10);
    let xr = random_matrix(&mut r, 4, 10);
    let cfg = LossConfig::default();

    let g = Graph::new();
    let lm = local.bind(&g, true);
    let gm = global.bind(&g, false);
    let xs = [&x, &xt, &xr].map(|t| g.constant(t.clone()));
    let z: Vec<Var<f64>> = xs.iter().map(|v| lm.backbone(*v).unwrap()).collect();
    let zg: Vec<Var<f64>> = xs.iter().map(|v| gm.backbone(*v).unwrap()).collect();
    let inputs = KdInputs {
        z: z[0],
        z_tilde: z[1],
        z_ref: z[2],
        zl: lm.projection(z[0]).unwrap(),
        zl_tilde: lm.projection(z[1]).unwrap(),
        zg: zg[0],
        zg_tilde: zg[1],
        zg_ref: zg[2],
    };
    let local_c = local_contrastive_simclr(z[0], z[1], cfg.tau).unwrap();
    let got = kd_terms(&inputs, local_c, &cfg).unwrap().total().item();
    let want = oracle::fedx_total(&local, &global, &rows(&x), &rows(&xt), &rows(&xr), cfg.tau);
    assert!((got - want).abs() < 1e-5, "{got} vs {want}");
}

fn constant<'g>(g: &'g Graph<f64>, rows: usize, data: &[f64]) -> Var<'g, f64> {
    g.constant(Tensor::new(vec![rows, data.len() / rows], data.to_vec()).unwrap())
}

#[test]
fn closed_form_values() {
    let g = Graph::new();
    let same = constant(&g, 2, &[0.3, -1.2, 0.3, -1.2]);
    let simclr = local_contrastive_simclr(same, same, 1.0).unwrap().item();
    assert!((simclr - 3f64.ln()).abs() < TOL);
    let gc = global_contrastive(same, same, same, 1.0, false)
        .unwrap()
        .item();
    assert!((gc - 2f64.ln()).abs() < TOL);
    let lr = local_relational(
        same,
        same,
        constant(&g, 3, &[1.0, 0.0, 0.0, 1.0, -1.0, 1.0]),
        0.5,
    )
    .unwrap()
    .item();
    assert!(lr.abs() < TOL);
    let a = constant(&g, 2, &[1.0, 2.0, -3.0, 0.5]);
    let anti = constant(&g, 2, &[-2.0, -4.0, 6.0, -1.0]);
    assert!(local_contrastive_byol(a, a).unwrap().item().abs() < TOL);
    assert!((local_contrastive_byol(a, anti).unwrap().item() - 4.0).abs() < TOL);
}
