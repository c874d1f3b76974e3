//! Two stochastic views of one synthetic image, printed as ASCII.
//!
//! Run with `cargo run --example augmentation`.

use fedx::data::{augment_view, AugmentPolicy, SyntheticConfig, SyntheticImages};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(pixels: &[f32], size: usize) {
    const RAMP: &[u8] = b" .:-=+*#%@";
    // first channel only
    for row in pixels[..size * size].chunks(size) {
        let line: String = row
            .iter()
            .map(|v| RAMP[((v * 9.0).round() as usize).min(9)] as char)
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> fedx::Result<()> {
    let cfg = SyntheticConfig::default();
    let size = cfg.size;
    let data = SyntheticImages::new(cfg).generate(1, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("original (class {}):", data.label(0));
    show(data.sample(0), size);
    for v in 0..2 {
        println!("view {v}:");
        show(
            &augment_view(
                data.sample(0),
                data.shape(),
                &AugmentPolicy::default(),
                &mut rng,
            ),
            size,
        );
    }
    Ok(())
}
